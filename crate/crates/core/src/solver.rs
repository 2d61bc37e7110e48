//! Discrete complex Monge-Ampère solves on the model torus, Moser norm
//! traces, the energy inequality, Skoda integrals and the oscillation
//! experiment.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{
    complex_hessian, complex_hessian_at, ma_density, solve_half_laplacian, Herm2, TorusField,
    TorusGrid,
};
use crate::krylov::{gmres, GmresOptions};
use crate::weights::{luxembourg_norm, DensitySample, WeightSpec};

/// Exact discrete solve of `1 + L phi = f` for n = 1, normalized to `sup phi = 0`.
pub fn solve_poisson_spectral(f: &TorusField) -> Result<TorusField> {
    if f.grid().n() != 1 {
        return Err(LabError::InvalidInput(
            "the spectral solve is the n = 1 path".into(),
        ));
    }
    check_probability_density(f)?;
    let phi = solve_half_laplacian(&f.map(|v| v - 1.0));
    Ok(phi.with_sup(0.0))
}

fn check_probability_density(f: &TorusField) -> Result<()> {
    let m = f.mean();
    if (m - 1.0).abs() > 1e-10 {
        return Err(LabError::Normalization(format!(
            "density has mean {m}, expected 1"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl NewtonOptions {
    /// Defaults: `1e-10` for n = 1, `1e-7` for n = 2.
    pub fn for_dim(n: usize) -> Self {
        Self {
            tol: if n == 1 { 1e-10 } else { 1e-7 },
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub linear_iterations: usize,
    /// `max |MA(phi) - kappa f|`.
    pub residual: f64,
    /// Normalizing constant of the bordered system `MA(phi) = kappa f`.
    pub kappa: f64,
    pub osc: f64,
    /// `(r, ||phi||_r)` of the sup-normalized solution for `r = 1, 2, 4, ..., 64`.
    pub norm_trace: Vec<(f64, f64)>,
    #[serde(skip)]
    pub wall_time_ms: f64,
    pub min_eigenvalue: f64,
    pub flags: Vec<String>,
}

/// `tr(adj(M) H(delta))`, the derivative of `det(I + H)` in direction `delta`.
fn jacobian_apply(m: &[Herm2], grid: &TorusGrid, delta: &[f64]) -> Vec<f64> {
    let n = grid.n();
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let k = complex_hessian_at(delta, grid, i);
            if n == 1 {
                k.a
            } else {
                let a = &m[i];
                a.d * k.a + a.a * k.d - 2.0 * (a.re * k.re + a.im * k.im)
            }
        })
        .collect()
}

fn residual_field(phi: &TorusField, f: &TorusField, kappa: f64) -> (Vec<f64>, f64, f64) {
    let hess = complex_hessian(phi);
    let n = phi.grid().n();
    let r: Vec<f64> = hess
        .matrices()
        .iter()
        .zip(f.values())
        .map(|(m, fv)| m.det(n) - kappa * fv)
        .collect();
    let max = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (r, max, hess.min_eigenvalue())
}

/// Damped Newton for `det(I + H(phi)) = kappa f` with `mean phi = 0`.
///
/// The linear systems are bordered by the unknown `kappa` and solved by
/// GMRES, right-preconditioned with the FFT inverse of the linearization
/// at `phi = 0`. Steps are halved until the residual decreases and all
/// eigenvalues stay positive. The returned field is shifted to `sup = 0`.
pub fn solve_ma_newton(
    f: &TorusField,
    opts: &NewtonOptions,
    init: Option<&TorusField>,
) -> Result<(TorusField, SolveReport)> {
    let start = Instant::now();
    let grid = *f.grid();
    if f.values().iter().any(|&v| !(v > 0.0)) {
        return Err(LabError::InvalidInput("density must be positive".into()));
    }
    check_probability_density(f)?;
    let mut phi = match init {
        Some(p) => {
            f.check_same_grid(p)?;
            p.with_zero_mean()
        }
        None => TorusField::zeros(grid),
    };
    let mut kappa = 1.0;
    let len = grid.len();
    let mut linear_iterations = 0;
    let (mut r, mut res, min_eig) = residual_field(&phi, f, kappa);
    if min_eig <= 0.0 {
        return Err(LabError::DampingFailure("initial guess is not psh".into()));
    }
    let mut iterations = 0;
    while res >= opts.tol {
        if iterations == opts.max_iter {
            return Err(LabError::MaxIterations {
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        let hess = complex_hessian(&phi);
        let mats = hess.matrices().to_vec();
        // bordered operator on (delta, s): (J delta - s f, mean delta)
        let apply = |v: &[f64]| {
            let (delta, s) = v.split_at(len);
            let mut out = jacobian_apply(&mats, &grid, delta);
            out.iter_mut()
                .zip(f.values())
                .for_each(|(o, fv)| *o -= s[0] * fv);
            out.push(delta.iter().sum::<f64>() / len as f64);
            out
        };
        let precond = |v: &[f64]| {
            let (rhs, t) = v.split_at(len);
            let mean = rhs.iter().sum::<f64>() / len as f64;
            let field =
                TorusField::new(grid, rhs.iter().map(|x| x - mean).collect()).expect("finite");
            let mut out = solve_half_laplacian(&field).into_values();
            out.iter_mut().for_each(|o| *o += t[0]);
            out.push(-mean);
            out
        };
        let mut b: Vec<f64> = r.iter().map(|v| -v).collect();
        b.push(-phi.mean());
        let lin = gmres(
            apply,
            precond,
            &b,
            &GmresOptions {
                rel_tol: 1e-12,
                ..Default::default()
            },
        )
        .or_else(|e| match e {
            LabError::MaxIterations { .. } => gmres(
                apply,
                precond,
                &b,
                &GmresOptions {
                    rel_tol: 1e-8,
                    restart: 120,
                    max_iter: 2400,
                },
            ),
            other => Err(other),
        })?;
        linear_iterations += lin.iterations;
        let (delta, s) = lin.x.split_at(len);
        let mut step = 1.0;
        let mut accepted = false;
        let mut lost_psh = false;
        while step > 1e-6 {
            let trial = TorusField::new(
                grid,
                phi.values()
                    .iter()
                    .zip(delta)
                    .map(|(p, d)| p + step * d)
                    .collect(),
            )?;
            let k_trial = kappa + step * s[0];
            let (r_t, res_t, eig_t) = residual_field(&trial, f, k_trial);
            if eig_t <= 0.0 {
                lost_psh = true;
            } else if res_t < res {
                phi = trial;
                kappa = k_trial;
                r = r_t;
                res = res_t;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if lost_psh {
                return Err(LabError::DampingFailure(format!(
                    "no damped step keeps the Hessian positive (residual {res:.3e})"
                )));
            }
            return Err(LabError::MaxIterations {
                iterations,
                residual: res,
            });
        }
    }
    let phi = phi.with_sup(0.0);
    let hess = complex_hessian(&phi);
    let mut flags = Vec::new();
    if (kappa - 1.0).abs() > 1e-6 {
        flags.push(format!("kappa differs from 1 by {:.3e}", kappa - 1.0));
    }
    let norm_trace = (0..7).map(|k| {
        let r = 2f64.powi(k);
        (r, phi.lp_norm(r).unwrap_or(f64::NAN))
    });
    let report = SolveReport {
        iterations,
        linear_iterations,
        residual: res,
        kappa,
        osc: phi.osc(),
        norm_trace: norm_trace.collect(),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        min_eigenvalue: hess.min_eigenvalue(),
        flags,
    };
    Ok((phi, report))
}

// ---------------------------------------------------------------------------
// Moser iteration
// ---------------------------------------------------------------------------

/// Exponents `r_0 = 1/(q-1)`, `r_k = (n/(n-1)) (r_{k-1}/q + 1)` with `q = p/(p-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoserSchedule {
    pub n: u32,
    pub p: f64,
    pub q: f64,
    pub r0: f64,
}

impl MoserSchedule {
    pub fn new(n: u32, p: f64) -> Result<Self> {
        if n < 2 {
            return Err(LabError::DegenerateSchedule(
                "the recursion divides by n - 1; use n >= 2 (norms themselves are available for any n)".into(),
            ));
        }
        if !(p > n as f64) {
            return Err(LabError::InvalidInput(format!(
                "Moser schedule needs p > n, got p = {p}, n = {n}"
            )));
        }
        let q = p / (p - 1.0);
        Ok(Self {
            n,
            p,
            q,
            r0: 1.0 / (q - 1.0),
        })
    }

    /// `r_0, ..., r_k`.
    pub fn exponents(&self, k: usize) -> Vec<f64> {
        let c = self.n as f64 / (self.n as f64 - 1.0);
        let mut out = Vec::with_capacity(k + 1);
        let mut r = self.r0;
        out.push(r);
        for _ in 0..k {
            r = c * (r / self.q + 1.0);
            out.push(r);
        }
        out
    }

    /// Limit ratio `n / ((n-1) q)`.
    pub fn limit_ratio(&self) -> f64 {
        self.n as f64 / ((self.n as f64 - 1.0) * self.q)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoserTrace {
    /// `(k, r_k, ||phi||_{r_k})`.
    pub steps: Vec<(usize, f64, f64)>,
    pub sup_norm: f64,
    /// Norm at the last step.
    pub limit: f64,
    pub relative_gap: f64,
    pub monotone: bool,
    /// `r_K / r_{K-1}`.
    pub last_ratio: f64,
    /// First `r_k` past which every traced norm is within 0.5% of the sup norm.
    pub within_half_percent_from: Option<f64>,
}

pub fn moser_trace(phi: &TorusField, schedule: &MoserSchedule, steps: usize) -> Result<MoserTrace> {
    if steps == 0 {
        return Err(LabError::InvalidInput(
            "need at least one Moser step".into(),
        ));
    }
    let rs = schedule.exponents(steps);
    let trace = rs
        .iter()
        .enumerate()
        .map(|(k, &r)| phi.lp_norm(r.max(1.0)).map(|v| (k, r, v)))
        .collect::<Result<Vec<_>>>()?;
    let sup_norm = phi.sup_abs();
    let limit = trace.last().expect("nonempty").2;
    let monotone = trace.windows(2).all(|w| w[1].2 >= w[0].2 * (1.0 - 1e-14));
    let gap = |v: f64| {
        if sup_norm > 0.0 {
            (sup_norm - v).abs() / sup_norm
        } else {
            0.0
        }
    };
    let within = (0..trace.len())
        .find(|&k| trace[k..].iter().all(|s| gap(s.2) <= 5e-3))
        .map(|k| trace[k].1);
    Ok(MoserTrace {
        relative_gap: gap(limit),
        last_ratio: rs[steps] / rs[steps - 1],
        steps: trace,
        sup_norm,
        limit,
        monotone,
        within_half_percent_from: within,
    })
}

// ---------------------------------------------------------------------------
// Energy inequality
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyCheck {
    /// `mean((-phi)^r (f - 1))`.
    pub lhs: f64,
    /// `(1/n) r/(r+1)^2 ||grad (-phi)^{(r+1)/2}||^2`.
    pub rhs: f64,
    pub slack: f64,
    /// `max |MA(phi) - f|`.
    pub residual: f64,
    pub small_r: bool,
}

/// Discrete energy inequality for `phi <= -1` solving `MA(phi) = f`.
///
/// In this normalization the dimensional constant is `1/n`; for n = 1 the
/// continuum inequality is an identity, so the slack measures pure
/// discretization error.
pub fn energy_chain_check(phi: &TorusField, f: &TorusField, r: f64) -> Result<EnergyCheck> {
    phi.check_same_grid(f)?;
    if !(r > 0.0) {
        return Err(LabError::InvalidInput(format!(
            "energy exponent r = {r} must be positive"
        )));
    }
    if phi.max() > -1.0 + 1e-12 {
        return Err(LabError::Normalization(format!(
            "need phi <= -1, found sup phi = {}",
            phi.max()
        )));
    }
    let n = phi.grid().n() as f64;
    let lhs = phi
        .values()
        .iter()
        .zip(f.values())
        .map(|(p, fv)| (-p).powf(r) * (fv - 1.0))
        .sum::<f64>()
        / phi.values().len() as f64;
    let u = phi.map(|p| (-p).powf(0.5 * (r + 1.0)));
    let rhs = r / ((r + 1.0) * (r + 1.0)) * u.grad_energy() / n;
    let dens = ma_density(phi).density;
    let residual = dens
        .values()
        .iter()
        .zip(f.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(EnergyCheck {
        lhs,
        rhs,
        slack: lhs - rhs,
        residual,
        small_r: r < 0.1,
    })
}

// ---------------------------------------------------------------------------
// Skoda integrals
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SkodaValue {
    pub alpha: f64,
    pub value: f64,
    pub ln_value: f64,
}

/// `mean exp(-alpha phi)` in log-sum-exp form, for `sup phi = 0`.
pub fn skoda_integral(phi: &TorusField, alpha: f64) -> Result<SkodaValue> {
    if phi.max().abs() > 1e-9 {
        return Err(LabError::Normalization(format!(
            "Skoda integral needs sup phi = 0, found {}",
            phi.max()
        )));
    }
    let m = phi
        .values()
        .iter()
        .map(|p| -alpha * p)
        .fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = phi.values().iter().map(|p| (-alpha * p - m).exp()).sum();
    let ln_value = m + s.ln() - (phi.values().len() as f64).ln();
    Ok(SkodaValue {
        alpha,
        value: ln_value.exp(),
        ln_value,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkodaScan {
    pub values: Vec<SkodaValue>,
    /// Largest tested `alpha` with integral `<= cap`.
    pub largest_admissible: Option<f64>,
}

pub fn skoda_scan(phi: &TorusField, alphas: &[f64], cap: f64) -> Result<SkodaScan> {
    let values = alphas
        .iter()
        .map(|&a| skoda_integral(phi, a))
        .collect::<Result<Vec<_>>>()?;
    let largest_admissible = values
        .iter()
        .filter(|v| v.value <= cap)
        .map(|v| v.alpha)
        .reduce(f64::max);
    Ok(SkodaScan {
        values,
        largest_admissible,
    })
}

/// `log` of the periodic distance to a point, shifted to `sup = 0`.
pub fn log_distance_field(grid: TorusGrid, center: &[f64]) -> TorusField {
    let dims = grid.dims();
    TorusField::from_fn(grid, |x| {
        let d2: f64 = (0..dims)
            .map(|k| {
                let d = (x[k] - center[k]).rem_euclid(1.0);
                let d = d.min(1.0 - d);
                d * d
            })
            .sum();
        0.5 * d2.ln()
    })
    .with_sup(0.0)
}

// ---------------------------------------------------------------------------
// Oscillation experiment
// ---------------------------------------------------------------------------

/// Densities `f_eps ∝ (sin^2(pi x1) + eps)^{-a}`, normalized to mean 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityFamily {
    pub a: f64,
}

impl DensityFamily {
    pub fn sample(&self, grid: TorusGrid, eps: f64) -> Result<TorusField> {
        if !(eps > 0.0) {
            return Err(LabError::InvalidInput(format!(
                "family parameter eps = {eps} must be positive"
            )));
        }
        let a = self.a;
        let raw = TorusField::from_fn(grid, |x| {
            let s = (std::f64::consts::PI * x[0]).sin();
            (s * s + eps).powf(-a)
        });
        let m = raw.mean();
        Ok(raw.map(|v| v / m))
    }
}

/// Grid size used for parameter `eps`: resolves the `sqrt(eps)` layer.
pub fn refined_size(base: usize, eps: f64) -> usize {
    let need = (1.0 / eps.sqrt()).ceil() as usize;
    base.max(need.next_power_of_two())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OscRow {
    pub eps: f64,
    pub grid_size: usize,
    pub osc: f64,
    pub lp_norm: f64,
    pub lux: Vec<f64>,
    pub error: Option<String>,
}

pub struct OscExperiment<'a> {
    pub family: &'a DensityFamily,
    pub eps_grid: &'a [f64],
    pub weights: &'a [WeightSpec],
    /// Exponent of the reported `||f||_p`; `inf` for the sup norm.
    pub p: f64,
    pub n: usize,
    pub base_size: usize,
}

/// Runs every row concurrently; rows come back in `eps_grid` order and a
/// failing row records its error instead of aborting the sweep.
pub fn osc_experiment(exp: &OscExperiment<'_>) -> Vec<OscRow> {
    exp.eps_grid
        .par_iter()
        .map(|&eps| {
            let size = if exp.n == 1 {
                refined_size(exp.base_size, eps)
            } else {
                exp.base_size
            };
            let row = (|| -> Result<OscRow> {
                let grid = TorusGrid::new(exp.n, size)?;
                let f = exp.family.sample(grid, eps)?;
                let phi = if exp.n == 1 {
                    solve_poisson_spectral(&f)?
                } else {
                    solve_ma_newton(&f, &NewtonOptions::for_dim(exp.n), None)?.0
                };
                let sample = DensitySample::uniform(f.values().to_vec())?;
                let lux = exp
                    .weights
                    .iter()
                    .map(|w| luxembourg_norm(&sample, w))
                    .collect::<Result<Vec<_>>>()?;
                Ok(OscRow {
                    eps,
                    grid_size: size,
                    osc: phi.osc(),
                    lp_norm: f.lp_norm(exp.p)?,
                    lux,
                    error: None,
                })
            })();
            row.unwrap_or_else(|e| OscRow {
                eps,
                grid_size: size,
                osc: f64::NAN,
                lp_norm: f64::NAN,
                lux: vec![f64::NAN; exp.weights.len()],
                error: Some(e.to_string()),
            })
        })
        .collect()
}

/// CSV text with header `eps,osc,lp_norm,lux_<weight>...`.
pub fn osc_rows_csv(rows: &[OscRow], weights: &[WeightSpec]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["eps".to_string(), "osc".into(), "lp_norm".into()];
    header.extend(weights.iter().map(|w| format!("lux_{}", w.name())));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![fmt_num(r.eps), fmt_num(r.osc), fmt_num(r.lp_norm)];
        rec.extend(r.lux.iter().map(|v| fmt_num(*v)));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| LabError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| LabError::Io(e.to_string()))
}

/// Shortest round-trip decimal representation; `nan` for failed cells.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:?}")
    }
}

// ---------------------------------------------------------------------------
// Sobolev constant
// ---------------------------------------------------------------------------

/// Empirical Sobolev quotient `max ||u - mean u||_s / ||grad u||_2` over
/// random trigonometric fields, `s = 2 dim / (dim - 2)` in real dimension
/// `dim = 2n > 2` and `s = 4` on the real 2-torus.
pub fn sobolev_constant_estimate(grid: TorusGrid, samples: usize, seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dims = grid.dims();
    let s = if dims > 2 {
        2.0 * dims as f64 / (dims as f64 - 2.0)
    } else {
        4.0
    };
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let modes: Vec<([i32; 4], f64, f64)> = (0..6)
            .map(|_| {
                let mut k = [0; 4];
                for kk in k.iter_mut().take(dims) {
                    *kk = rng.gen_range(-3..=3);
                }
                (
                    k,
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        let u = TorusField::from_fn(grid, |x| {
            modes
                .iter()
                .map(|(k, amp, ph)| {
                    let arg: f64 = (0..dims).map(|d| k[d] as f64 * x[d]).sum();
                    amp * (std::f64::consts::TAU * arg + ph).cos()
                })
                .sum()
        })
        .with_zero_mean();
        let g = u.grad_energy().sqrt();
        if g > 1e-12 {
            best = best.max(u.lp_norm(s)? / g);
        }
    }
    Ok(best)
}
