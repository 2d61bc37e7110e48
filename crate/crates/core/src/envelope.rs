//! The omega-psh envelope `P(h)` as a discrete obstacle problem, and the
//! envelope-based reduction from a general operator `g` to Monge-Ampère.
//!
//! For n = 1 the discrete problem is exact: find the largest `psi <= h`
//! with `1 + L psi >= 0`, where `L` is the 5-point operator `tr H`. For
//! n = 2 nonnegativity of `omega + dd^c psi` is enforced along the two
//! coordinate complex lines and the two diagonal lines `z1 = +-z2`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{complex_hessian, ma_density, TorusField, TorusGrid};
use crate::operators::{eval_g, OperatorSpec};
use crate::weights::{inverse_conjugate, luxembourg_norm, DensitySample, WeightSpec};

/// Relative tolerance on `|psi - h|` defining the contact set.
pub const CONTACT_TOL: f64 = 1e-8;

/// Off-contact mass tolerance, as a fraction of the total mass.
pub fn mass_tol(n: usize) -> f64 {
    if n == 1 {
        1e-6
    } else {
        1e-3
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeOptions {
    /// Target for the complementarity residual `max |min(h - psi, 1 + L_line psi)|`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_sweeps: 200_000,
        }
    }
}

/// One complex line of the sweep: the four lattice neighbours and the
/// scale `kappa` with line operator `1 + (S - 4 psi) / kappa`.
struct Line {
    neighbours: Vec<[usize; 4]>,
    kappa: f64,
}

fn lines(g: &TorusGrid) -> Vec<Line> {
    let h2 = g.spacing() * g.spacing();
    let len = g.len();
    let axis_line = |a: usize, b: usize| Line {
        neighbours: (0..len)
            .map(|i| {
                [
                    g.shift(i, a, 1),
                    g.shift(i, a, -1),
                    g.shift(i, b, 1),
                    g.shift(i, b, -1),
                ]
            })
            .collect(),
        kappa: 4.0 * h2,
    };
    if g.n() == 1 {
        return vec![axis_line(0, 1)];
    }
    let diag = |sign: i64| {
        let step = |i: usize, a: usize, b: usize, s: i64| g.shift(g.shift(i, a, s), b, sign * s);
        Line {
            neighbours: (0..len)
                .map(|i| {
                    [
                        step(i, 0, 2, 1),
                        step(i, 0, 2, -1),
                        step(i, 1, 3, 1),
                        step(i, 1, 3, -1),
                    ]
                })
                .collect(),
            kappa: 8.0 * h2,
        }
    };
    vec![axis_line(0, 1), axis_line(2, 3), diag(1), diag(-1)]
}

fn line_sum(v: &[f64], nb: &[usize; 4]) -> f64 {
    v[nb[0]] + v[nb[1]] + v[nb[2]] + v[nb[3]]
}

fn complementarity_residual(h: &[f64], psi: &[f64], lines: &[Line]) -> f64 {
    (0..psi.len())
        .into_par_iter()
        .map(|i| {
            let op = lines
                .iter()
                .map(|l| 1.0 + (line_sum(psi, &l.neighbours[i]) - 4.0 * psi[i]) / l.kappa)
                .fold(f64::INFINITY, f64::min);
            (h[i] - psi[i]).min(op).abs()
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub psi: TorusField,
    pub contact: Vec<bool>,
    pub contact_tol: f64,
    /// `int_{off contact} MA(psi)` against the uniform probability measure.
    pub off_contact_mass: f64,
    pub max_off_contact_density: f64,
    pub total_mass: f64,
    pub iterations: usize,
    pub residual: f64,
    /// `(sweep, residual)` every 50 sweeps.
    pub history: Vec<(usize, f64)>,
    /// Smallest eigenvalue of `I + H(psi)` over the grid.
    pub min_eigenvalue: f64,
    /// Largest `|second difference|` of `psi` along any axis.
    pub max_second_difference: f64,
}

/// Mask statistics written next to the binary field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    pub n: usize,
    pub size: usize,
    pub contact_points: usize,
    pub total_points: usize,
    pub contact_tol: f64,
    pub off_contact_mass: f64,
    pub max_off_contact_density: f64,
    pub total_mass: f64,
    pub mass_tol: f64,
    pub iterations: usize,
    pub residual: f64,
    pub min_eigenvalue: f64,
    pub max_second_difference: f64,
}

impl EnvelopeResult {
    pub fn contact_points(&self) -> usize {
        self.contact.iter().filter(|&&c| c).count()
    }

    /// `off_contact_mass <= mass_tol(n) * total_mass`.
    pub fn complementarity_holds(&self) -> bool {
        self.off_contact_mass
            <= mass_tol(self.psi.grid().n()) * self.total_mass.max(f64::MIN_POSITIVE)
    }

    pub fn summary(&self) -> EnvelopeSummary {
        let g = self.psi.grid();
        EnvelopeSummary {
            n: g.n(),
            size: g.size(),
            contact_points: self.contact_points(),
            total_points: g.len(),
            contact_tol: self.contact_tol,
            off_contact_mass: self.off_contact_mass,
            max_off_contact_density: self.max_off_contact_density,
            total_mass: self.total_mass,
            mass_tol: mass_tol(g.n()),
            iterations: self.iterations,
            residual: self.residual,
            min_eigenvalue: self.min_eigenvalue,
            max_second_difference: self.max_second_difference,
        }
    }

    /// Writes `psi` in the binary field format plus a JSON sidecar.
    pub fn write(&self, field_path: &Path, sidecar_path: &Path) -> Result<()> {
        self.psi.write_binary(field_path)?;
        std::fs::write(
            sidecar_path,
            serde_json::to_string_pretty(&self.summary())? + "\n",
        )?;
        Ok(())
    }
}

pub fn compute_envelope(h: &TorusField) -> Result<EnvelopeResult> {
    compute_envelope_with(h, &EnvelopeOptions::default())
}

/// Projected SOR sweeps `psi_i <- min(h_i, psi_i + w (b_i - psi_i))`, where
/// `b_i` is the largest value keeping every line operator nonnegative.
pub fn compute_envelope_with(h: &TorusField, opts: &EnvelopeOptions) -> Result<EnvelopeResult> {
    let g = *h.grid();
    let lines = lines(&g);
    let hv = h.values();
    let mut psi = hv.to_vec();
    let omega = 2.0 / (1.0 + (std::f64::consts::PI * g.spacing()).sin());
    let omega = if g.n() == 1 {
        omega
    } else {
        1.0 + 0.5 * (omega - 1.0)
    };
    let mut history = Vec::new();
    let mut residual = complementarity_residual(hv, &psi, &lines);
    let mut iterations = 0;
    while residual > opts.tol {
        if iterations >= opts.max_sweeps {
            return Err(LabError::MaxIterations {
                iterations,
                residual,
            });
        }
        for i in 0..psi.len() {
            let b = lines
                .iter()
                .map(|l| (line_sum(&psi, &l.neighbours[i]) + l.kappa) / 4.0)
                .fold(f64::INFINITY, f64::min);
            psi[i] = hv[i].min(psi[i] + omega * (b - psi[i]));
        }
        iterations += 1;
        if iterations % 10 == 0 || iterations < 10 {
            residual = complementarity_residual(hv, &psi, &lines);
            if iterations % 50 == 0 {
                history.push((iterations, residual));
            }
        }
    }
    history.push((iterations, residual));
    let psi = TorusField::new(g, psi)?;
    let contact_tol = (CONTACT_TOL * h.osc()).max(1e-14 * h.sup_abs()).max(1e-300);
    let contact: Vec<bool> = psi
        .values()
        .iter()
        .zip(hv)
        .map(|(p, hh)| (p - hh).abs() <= contact_tol)
        .collect();
    let ma = ma_density(&psi).density;
    let len = g.len() as f64;
    let total_mass = ma.values().iter().map(|v| v.max(0.0)).sum::<f64>() / len;
    let off: Vec<f64> = ma
        .values()
        .iter()
        .zip(&contact)
        .filter(|(_, &c)| !c)
        .map(|(v, _)| v.max(0.0))
        .collect();
    let off_contact_mass = off.iter().sum::<f64>() / len;
    let max_off_contact_density = off.iter().copied().fold(0.0, f64::max);
    let min_eigenvalue = complex_hessian(&psi).min_eigenvalue();
    let h2 = g.spacing() * g.spacing();
    let max_second_difference = (0..g.len())
        .flat_map(|i| (0..g.dims()).map(move |a| (i, a)))
        .map(|(i, a)| {
            ((psi.values()[g.shift(i, a, 1)] - 2.0 * psi.values()[i]
                + psi.values()[g.shift(i, a, -1)])
                / h2)
                .abs()
        })
        .fold(0.0, f64::max);
    Ok(EnvelopeResult {
        psi,
        contact,
        contact_tol,
        off_contact_mass,
        max_off_contact_density,
        total_mass,
        iterations,
        residual,
        history,
        min_eigenvalue,
        max_second_difference,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionReport {
    pub operator: String,
    pub delta: f64,
    pub c: f64,
    /// `max |g(lambda(phi)) - c f^{1/n}|`.
    pub g_residual: f64,
    pub contact_points: usize,
    pub total_points: usize,
    /// `max_{contact} (delta^n MA(psi) - c^n f)`, clipped below at 0.
    pub max_violation: f64,
    /// `max_{contact} (MA(psi) - MA(phi))`, the first link of the chain.
    pub contact_ma_excess: f64,
    pub off_contact_mass: f64,
    pub total_mass: f64,
    pub envelope_iterations: usize,
}

/// Verifies `delta^n MA(psi) <= c^n f` on the contact set of `psi = P(phi)`
/// for a `phi` solving `g(lambda(phi)) = c f^{1/n}` within `g_tol`.
pub fn reduction_check(
    phi: &TorusField,
    g: &OperatorSpec,
    delta: f64,
    c: f64,
    f: &TorusField,
    g_tol: f64,
) -> Result<ReductionReport> {
    phi.check_same_grid(f)?;
    let grid = phi.grid();
    let n = grid.n();
    if g.n() != n {
        return Err(LabError::InvalidInput(format!(
            "operator dimension {} on an n = {n} grid",
            g.n()
        )));
    }
    if !(delta > 0.0 && c > 0.0) {
        return Err(LabError::InvalidInput(
            "delta and c must be positive".into(),
        ));
    }
    let hess = complex_hessian(phi);
    let mut g_residual: f64 = 0.0;
    for i in 0..grid.len() {
        let gv = eval_g(g, &hess.eigenvalues(i)).map_err(|e| {
            LabError::Precondition(format!("phi is not admissible for g at point {i}: {e}"))
        })?;
        g_residual = g_residual.max((gv - c * f.values()[i].max(0.0).powf(1.0 / n as f64)).abs());
    }
    if g_residual > g_tol {
        return Err(LabError::Precondition(format!(
            "phi misses the g-equation by {g_residual:.3e} > {g_tol:.3e}"
        )));
    }
    let env = compute_envelope(phi)?;
    let ma_psi = ma_density(&env.psi).density;
    let ma_phi = ma_density(phi).density;
    let dn = delta.powi(n as i32);
    let cn = c.powi(n as i32);
    let mut max_violation: f64 = 0.0;
    let mut contact_ma_excess = f64::NEG_INFINITY;
    for i in (0..grid.len()).filter(|&i| env.contact[i]) {
        max_violation = max_violation.max(dn * ma_psi.values()[i] - cn * f.values()[i]);
        contact_ma_excess = contact_ma_excess.max(ma_psi.values()[i] - ma_phi.values()[i]);
    }
    Ok(ReductionReport {
        operator: g.name(),
        delta,
        c,
        g_residual,
        contact_points: env.contact_points(),
        total_points: grid.len(),
        max_violation,
        contact_ma_excess,
        off_contact_mass: env.off_contact_mass,
        total_mass: env.total_mass,
        envelope_iterations: env.iterations,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainLink {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

impl ChainLink {
    pub fn new(name: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack: rhs - lhs,
            holds: lhs <= rhs + tol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupBoundReport {
    pub weight: String,
    pub norm_f: f64,
    pub w_one: f64,
    pub mean_neg_phi: f64,
    /// `h_HY(-sup psi)`, bounding `-sup psi` through `h_HY = (w*)^{-1}`.
    pub h_of_sup: f64,
    pub links: Vec<ChainLink>,
    /// Final link without the `w(1)` term produced by Young's inequality.
    pub literal_final: ChainLink,
    pub all_hold: bool,
}

fn h_hy_mean(spec: &WeightSpec, field: &TorusField, weight: Option<&TorusField>) -> Result<f64> {
    let vals: Vec<Result<f64>> = field
        .values()
        .par_iter()
        .enumerate()
        .map(|(i, &v)| Ok(inverse_conjugate(spec, -v)?.s * weight.map_or(1.0, |w| w.values()[i])))
        .collect();
    let mut s = 0.0;
    for v in vals {
        s += v?;
    }
    Ok(s / field.values().len() as f64)
}

/// Evaluates each link of
/// `0 <= h(-sup psi) <= int h(-psi) MA(psi) <= (c/delta)^n int h(-phi) f
///    <= (c/delta)^n ||f||_w (w(1) + int (-phi))`
/// with `h = h_HY`.
pub fn sup_bound_check(
    psi: &TorusField,
    phi: &TorusField,
    f: &TorusField,
    w: &WeightSpec,
    delta: f64,
    c: f64,
    n: usize,
) -> Result<SupBoundReport> {
    psi.check_same_grid(phi)?;
    psi.check_same_grid(f)?;
    if psi.grid().n() != n {
        return Err(LabError::InvalidInput(format!(
            "n = {n} on a grid of dimension {}",
            psi.grid().n()
        )));
    }
    if phi.max().abs() > 1e-12 {
        return Err(LabError::Normalization(format!(
            "sup phi = {}, expected 0",
            phi.max()
        )));
    }
    let above = psi.zip_with(phi, |a, b| a - b)?.max();
    if above > 1e-9 * phi.osc().max(1.0) {
        return Err(LabError::Normalization(format!(
            "psi exceeds phi by {above:.3e}"
        )));
    }
    let ratio = (c / delta).powi(n as i32);
    let tol = 1e-9;
    let h_of_sup = inverse_conjugate(w, -psi.max())?.s;
    let ma_psi = ma_density(psi).density;
    let int_psi = h_hy_mean(w, psi, Some(&ma_psi))?;
    let int_phi = ratio * h_hy_mean(w, phi, Some(f))?;
    let norm_f = luxembourg_norm(&DensitySample::uniform(f.values().to_vec())?, w)?;
    let w_one = w.eval(1.0)?;
    let mean_neg_phi = -phi.mean();
    let young = ratio * norm_f * (w_one + mean_neg_phi);
    let links = vec![
        ChainLink::new("0 <= h(-sup psi)", 0.0, h_of_sup, tol),
        ChainLink::new(
            "h(-sup psi) <= int h(-psi) MA(psi)",
            h_of_sup,
            int_psi,
            tol * int_psi.abs().max(1.0),
        ),
        ChainLink::new(
            "int h(-psi) MA(psi) <= (c/delta)^n int h(-phi) f",
            int_psi,
            int_phi,
            tol * int_phi.abs().max(1.0),
        ),
        ChainLink::new(
            "(c/delta)^n int h(-phi) f <= (c/delta)^n ||f||_w (w(1) + int -phi)",
            int_phi,
            young,
            tol * young.abs().max(1.0),
        ),
    ];
    let literal_final = ChainLink::new(
        "(c/delta)^n int h(-phi) f <= (c/delta)^n ||f||_w int -phi",
        int_phi,
        ratio * norm_f * mean_neg_phi,
        tol,
    );
    let all_hold = links.iter().all(|l| l.holds);
    Ok(SupBoundReport {
        weight: w.name(),
        norm_f,
        w_one,
        mean_neg_phi,
        h_of_sup,
        links,
        literal_final,
        all_hold,
    })
}
