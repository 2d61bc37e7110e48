//! Symmetric elliptic operators `g` on cones `Gamma`, their structural
//! conditions, the n = 1 `g`-equation and the domination principle.
//!
//! Conditions checked on samples:
//!
//! 1. `g` is symmetric in the eigenvalues.
//! 2. `dg/d lambda_j > 0` on `Gamma`.
//! 3. `g(lambda) >= delta (prod lambda_j)^{1/n}` on the positive orthant.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{complex_hessian, solve_half_laplacian, TorusField};
use crate::interp::MonotoneCubic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConeKind {
    PositiveOrthant,
    HalfSpaceTrace,
    GardingSigmaK { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub n: usize,
}

impl ConeSpec {
    pub fn contains(&self, lambda: &[f64]) -> bool {
        if lambda.len() != self.n || lambda.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self.kind {
            ConeKind::PositiveOrthant => lambda.iter().all(|&v| v > 0.0),
            ConeKind::HalfSpaceTrace => lambda.iter().sum::<f64>() > 0.0,
            ConeKind::GardingSigmaK { k } => {
                let s = elementary_symmetric(lambda);
                (1..=k).all(|j| s[j] > 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OperatorKind {
    /// `(sigma_k / binom(n, k))^{1/k}`.
    SigmaKRoot { k: usize },
    /// `(prod lambda)^{1/n}`.
    GeometricMean,
    /// `sigma_1 / n`.
    ArithmeticMean,
    /// `(1/n) sum G(lambda_j)` with `G` an increasing table.
    Custom { table: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub cone: ConeSpec,
    /// Determinantal majorization constant.
    pub delta: f64,
}

impl OperatorSpec {
    pub fn sigma_k(k: usize, n: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(LabError::InvalidInput(format!(
                "sigma_k needs 1 <= k <= n, got k = {k}, n = {n}"
            )));
        }
        Ok(Self {
            kind: OperatorKind::SigmaKRoot { k },
            cone: ConeSpec {
                kind: ConeKind::GardingSigmaK { k },
                n,
            },
            delta: 1.0,
        })
    }

    pub fn geometric(n: usize) -> Self {
        Self {
            kind: OperatorKind::GeometricMean,
            cone: ConeSpec {
                kind: ConeKind::PositiveOrthant,
                n,
            },
            delta: 1.0,
        }
    }

    pub fn arithmetic(n: usize) -> Self {
        Self {
            kind: OperatorKind::ArithmeticMean,
            cone: ConeSpec {
                kind: ConeKind::HalfSpaceTrace,
                n,
            },
            delta: 1.0,
        }
    }

    /// Tabulated `G`; the cone is the positive orthant.
    pub fn custom(table: Vec<(f64, f64)>, n: usize, delta: f64) -> Result<Self> {
        let spec = Self {
            kind: OperatorKind::Custom { table },
            cone: ConeSpec {
                kind: ConeKind::PositiveOrthant,
                n,
            },
            delta,
        };
        spec.custom_interp()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.cone.n
    }

    pub fn name(&self) -> String {
        match &self.kind {
            OperatorKind::SigmaKRoot { k } => format!("sigma{k}root_n{}", self.n()),
            OperatorKind::GeometricMean => format!("geometric_n{}", self.n()),
            OperatorKind::ArithmeticMean => format!("arithmetic_n{}", self.n()),
            OperatorKind::Custom { .. } => format!("custom_n{}", self.n()),
        }
    }

    fn custom_interp(&self) -> Result<Option<MonotoneCubic>> {
        let OperatorKind::Custom { table } = &self.kind else {
            return Ok(None);
        };
        let (xs, ys): (Vec<f64>, Vec<f64>) = table.iter().copied().unzip();
        if ys.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::InvalidInput(
                "custom operator table must be strictly increasing".into(),
            ));
        }
        MonotoneCubic::new(xs, ys).map(Some)
    }
}

/// Operator description as it appears in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub kind: String,
    #[serde(default)]
    pub k: Option<usize>,
    pub n: usize,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub table: Option<Vec<(f64, f64)>>,
}

impl OperatorConfig {
    pub fn into_spec(self) -> Result<OperatorSpec> {
        if self.n == 0 {
            return Err(LabError::InvalidInput(
                "operator dimension n must be positive".into(),
            ));
        }
        let mut spec = match self.kind.to_ascii_lowercase().as_str() {
            "sigma-k-root" | "sigmakroot" | "sigma-k" => OperatorSpec::sigma_k(
                self.k
                    .ok_or_else(|| LabError::InvalidInput("sigma-k-root needs k".into()))?,
                self.n,
            )?,
            "geometric-mean" | "geometricmean" | "geometric" => OperatorSpec::geometric(self.n),
            "arithmetic-mean" | "arithmeticmean" | "arithmetic" => OperatorSpec::arithmetic(self.n),
            "custom" => {
                let table = self.table.clone().ok_or_else(|| {
                    LabError::InvalidInput("custom operator needs a table".into())
                })?;
                let delta = self.delta.ok_or_else(|| {
                    LabError::InvalidInput("custom operator must declare delta".into())
                })?;
                OperatorSpec::custom(table, self.n, delta)?
            }
            other => {
                return Err(LabError::InvalidInput(format!(
                    "unknown operator kind '{other}'"
                )))
            }
        };
        if let Some(d) = self.delta {
            spec.delta = d;
        }
        Ok(spec)
    }
}

/// `[sigma_0, ..., sigma_n]` of `lambda`.
pub fn elementary_symmetric(lambda: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; lambda.len() + 1];
    s[0] = 1.0;
    for (i, &l) in lambda.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            s[j] += l * s[j - 1];
        }
    }
    s
}

pub fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn check_cone(spec: &OperatorSpec, lambda: &[f64]) -> Result<()> {
    if !spec.cone.contains(lambda) {
        return Err(LabError::ConeViolation(format!(
            "{lambda:?} is not in the cone of {}",
            spec.name()
        )));
    }
    Ok(())
}

pub fn eval_g(spec: &OperatorSpec, lambda: &[f64]) -> Result<f64> {
    check_cone(spec, lambda)?;
    let n = spec.n();
    // a canonical order makes the evaluation exactly symmetric
    let mut sorted = lambda.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lambda = &sorted[..];
    Ok(match &spec.kind {
        OperatorKind::SigmaKRoot { k } => {
            (elementary_symmetric(lambda)[*k] / binomial(n, *k)).powf(1.0 / *k as f64)
        }
        OperatorKind::GeometricMean => {
            (lambda.iter().map(|v| v.ln()).sum::<f64>() / n as f64).exp()
        }
        OperatorKind::ArithmeticMean => lambda.iter().sum::<f64>() / n as f64,
        OperatorKind::Custom { .. } => {
            let g = spec.custom_interp()?.expect("custom kind");
            let mut total = 0.0;
            for &l in lambda {
                total += g.eval(l).map_err(|_| {
                    LabError::Range(format!("eigenvalue {l} outside the custom table"))
                })?;
            }
            total / n as f64
        }
    })
}

pub fn grad_g(spec: &OperatorSpec, lambda: &[f64]) -> Result<Vec<f64>> {
    check_cone(spec, lambda)?;
    let n = spec.n();
    Ok(match &spec.kind {
        OperatorKind::SigmaKRoot { k } => {
            let k = *k;
            let binom = binomial(n, k);
            let g = eval_g(spec, lambda)?;
            (0..n)
                .map(|j| {
                    let rest: Vec<f64> = lambda
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != j)
                        .map(|(_, &v)| v)
                        .collect();
                    let sk1 = elementary_symmetric(&rest)[k - 1];
                    g.powf(1.0 - k as f64) * sk1 / (k as f64 * binom)
                })
                .collect()
        }
        OperatorKind::GeometricMean => {
            let g = eval_g(spec, lambda)?;
            lambda.iter().map(|l| g / (n as f64 * l)).collect()
        }
        OperatorKind::ArithmeticMean => vec![1.0 / n as f64; n],
        OperatorKind::Custom { .. } => {
            let mut out = Vec::with_capacity(n);
            for j in 0..n {
                let h = 1e-6 * lambda[j].abs().max(1.0);
                let mut up = lambda.to_vec();
                let mut dn = lambda.to_vec();
                up[j] += h;
                dn[j] -= h;
                out.push((eval_g(spec, &up)? - eval_g(spec, &dn)?) / (2.0 * h));
            }
            out
        }
    })
}

/// `[(sigma_k / binom(n, k))^{1/k}]` for `k = 1..n`; nonincreasing on the
/// positive orthant.
pub fn maclaurin_chain(lambda: &[f64]) -> Vec<f64> {
    let n = lambda.len();
    let s = elementary_symmetric(lambda);
    (1..=n)
        .map(|k| (s[k] / binomial(n, k)).powf(1.0 / k as f64))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub operator: String,
    pub samples: usize,
    /// Largest relative change of `g` under a random permutation.
    pub symmetry_defect: f64,
    /// Smallest `dg/d lambda_j` over cone samples.
    pub min_partial: f64,
    /// Measured majorization constant over orthant samples.
    pub delta_hat: f64,
    pub declared_delta: f64,
    /// Every orthant sample is in the cone and every `sum <= 0` sample is not.
    pub cone_inclusion: bool,
    /// Largest upward step along the Maclaurin chain on orthant samples.
    pub maclaurin_defect: f64,
    pub symmetric: bool,
    pub elliptic: bool,
    pub majorized: bool,
    pub passed: bool,
}

fn sample_cone(spec: &OperatorSpec, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let n = spec.n();
    for _ in 0..10_000 {
        let l: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
        if spec.cone.contains(&l) && eval_g(spec, &l).is_ok() {
            return Ok(l);
        }
    }
    Err(LabError::InvalidInput(format!(
        "could not sample the cone of {}",
        spec.name()
    )))
}

fn sample_orthant(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-3.0f64..3.0).exp()).collect()
}

/// Samples conditions (1)-(3) and the cone inclusions with a seeded generator.
pub fn check_conditions(spec: &OperatorSpec, samples: usize, seed: u64) -> Result<ConditionReport> {
    let n = spec.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut symmetry_defect: f64 = 0.0;
    let mut min_partial = f64::INFINITY;
    let mut delta_hat = f64::INFINITY;
    let mut cone_inclusion = true;
    let mut maclaurin_defect: f64 = 0.0;
    let custom = matches!(spec.kind, OperatorKind::Custom { .. });
    for _ in 0..samples {
        let l = sample_cone(spec, &mut rng)?;
        let g = eval_g(spec, &l)?;
        let mut p = l.clone();
        p.shuffle(&mut rng);
        symmetry_defect = symmetry_defect.max((eval_g(spec, &p)? - g).abs() / g.abs().max(1e-300));
        min_partial = grad_g(spec, &l)?.into_iter().fold(min_partial, f64::min);

        let mut o = sample_orthant(n, &mut rng);
        if custom {
            // keep the orthant sample inside the table
            let (lo, hi) = spec.custom_interp()?.expect("custom kind").domain();
            o.iter_mut().for_each(|v| *v = v.clamp(lo.max(1e-12), hi));
        }
        cone_inclusion &= spec.cone.contains(&o);
        if let Ok(go) = eval_g(spec, &o) {
            let geo = (o.iter().map(|v| v.ln()).sum::<f64>() / n as f64).exp();
            delta_hat = delta_hat.min(go / geo);
        }
        let chain = maclaurin_chain(&o);
        for w in chain.windows(2) {
            maclaurin_defect = maclaurin_defect.max((w[1] - w[0]) / w[0]);
        }

        let mut neg: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let s: f64 = neg.iter().sum();
        if s > 0.0 {
            neg.iter_mut().for_each(|v| *v -= s / n as f64 + 1e-3);
        }
        cone_inclusion &= !spec.cone.contains(&neg);
    }
    let symmetric = symmetry_defect == 0.0;
    let elliptic = min_partial > 0.0;
    let majorized = delta_hat >= spec.delta - 1e-9;
    Ok(ConditionReport {
        operator: spec.name(),
        samples,
        symmetry_defect,
        min_partial,
        delta_hat,
        declared_delta: spec.delta,
        cone_inclusion,
        maclaurin_defect,
        symmetric,
        elliptic,
        majorized,
        passed: symmetric && elliptic && majorized && cone_inclusion,
    })
}

/// Solution of `g(lambda(phi)) = c f^{1/n}` on an n = 1 grid.
#[derive(Debug, Clone)]
pub struct GSolution {
    pub phi: TorusField,
    pub c: f64,
    /// `max |g(lambda(phi)) - c f|`.
    pub residual: f64,
}

/// Inverse of the one-variable `g` on `(0, oo)` by bisection.
fn invert_g1(spec: &OperatorSpec, y: f64) -> Result<f64> {
    match spec.kind {
        OperatorKind::Custom { .. } => {
            let (lo, hi) = spec.custom_interp()?.expect("custom kind").domain();
            let (mut a, mut b) = (lo.max(0.0), hi);
            let ga = if a > 0.0 {
                eval_g(spec, &[a])?
            } else {
                eval_g(spec, &[f64::MIN_POSITIVE]).unwrap_or(f64::NEG_INFINITY)
            };
            let gb = eval_g(spec, &[b])?;
            if !(y > ga && y <= gb) {
                return Err(LabError::Range(format!(
                    "{y} is outside the range ({ga}, {gb}] of g"
                )));
            }
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= 0.0 || eval_g(spec, &[m])? < y {
                    a = m;
                } else {
                    b = m;
                }
            }
            Ok(0.5 * (a + b))
        }
        _ => {
            if y > 0.0 {
                Ok(y)
            } else {
                Err(LabError::Range(format!(
                    "{y} is outside the range (0, oo) of g"
                )))
            }
        }
    }
}

/// n = 1: inverts `g`, fixes `c` by mean-1 compatibility of the eigenvalue
/// field, and solves `1 + L phi = lambda` spectrally with `sup phi = 0`.
pub fn solve_g_equation(spec: &OperatorSpec, f: &TorusField, tol: f64) -> Result<GSolution> {
    if f.grid().n() != 1 || spec.n() != 1 {
        return Err(LabError::InvalidInput(
            "the g-equation solve is the n = 1 path".into(),
        ));
    }
    if f.min() <= 0.0 {
        return Err(LabError::Range(
            "f must be positive for eigenvalues in the cone".into(),
        ));
    }
    let mean_lambda = |c: f64| -> Result<f64> {
        let mut s = 0.0;
        for &v in f.values() {
            s += invert_g1(spec, c * v)?;
        }
        Ok(s / f.values().len() as f64)
    };
    let (mut lo, mut hi) = (1.0, 1.0);
    while mean_lambda(lo)? > 1.0 {
        lo *= 0.5;
    }
    while mean_lambda(hi)? < 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if mean_lambda(m)? < 1.0 {
            lo = m;
        } else {
            hi = m;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    let mut lambda = Vec::with_capacity(f.values().len());
    for &v in f.values() {
        lambda.push(invert_g1(spec, c * v)?);
    }
    let lambda = TorusField::new(*f.grid(), lambda)?;
    let phi = solve_half_laplacian(&lambda.map(|v| v - 1.0)).with_sup(0.0);
    let hess = complex_hessian(&phi);
    let mut residual: f64 = 0.0;
    for (i, &fv) in f.values().iter().enumerate() {
        let g = eval_g(spec, &hess.eigenvalues(i))?;
        residual = residual.max((g - c * fv).abs());
    }
    if residual > tol {
        return Err(LabError::MaxIterations {
            iterations: 1,
            residual,
        });
    }
    Ok(GSolution { phi, c, residual })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationReport {
    pub min_index: usize,
    pub min_point: Vec<f64>,
    /// `min (phi - psi)`.
    pub min_value: f64,
    /// Smallest eigenvalue of `dd^c (phi - psi)` at the minimum point.
    pub hessian_gap: f64,
    /// `min_j (lambda_j(phi) - lambda_j(psi))` at the minimum point, sorted eigenvalues.
    pub eigen_gap: f64,
    /// `g(lambda(phi)) - g(lambda(psi))` at the minimum point, when both are in the cone.
    pub g_gap: Option<f64>,
    /// Size of `{phi < psi}`.
    pub hypothesis_set_size: usize,
    /// `g(lambda(phi)) <= c g(lambda(psi))` at every point of `{phi < psi}`.
    pub hypothesis_holds: bool,
    /// Points of `{phi < psi}` where `g` could not be evaluated.
    pub outside_cone: usize,
    pub conclusion_holds: bool,
    pub flags: Vec<String>,
}

/// Discrete check of the minimum-point mechanism behind the domination principle.
pub fn domination_check(
    phi: &TorusField,
    psi: &TorusField,
    spec: &OperatorSpec,
    c: f64,
) -> Result<DominationReport> {
    phi.check_same_grid(psi)?;
    if !(0.0..1.0).contains(&c) {
        return Err(LabError::InvalidInput(format!(
            "c must lie in [0, 1), got {c}"
        )));
    }
    let g = phi.grid();
    let n = g.n();
    let diff = phi.zip_with(psi, |a, b| a - b)?;
    let (min_index, min_value) =
        diff.values()
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
            );
    let h_phi = complex_hessian(phi);
    let h_psi = complex_hessian(psi);
    let h_diff = crate::grid::complex_hessian_at(diff.values(), g, min_index);
    let hessian_gap = h_diff.eigenvalues(n)[0];
    let lp = h_phi.eigenvalues(min_index);
    let ls = h_psi.eigenvalues(min_index);
    let eigen_gap = lp
        .iter()
        .zip(&ls)
        .map(|(a, b)| a - b)
        .fold(f64::INFINITY, f64::min);
    let g_gap = match (eval_g(spec, &lp), eval_g(spec, &ls)) {
        (Ok(a), Ok(b)) => Some(a - b),
        _ => None,
    };
    let mut hypothesis_set_size = 0;
    let mut hypothesis_holds = true;
    let mut outside_cone = 0;
    for i in 0..g.len() {
        if diff.values()[i] >= 0.0 {
            continue;
        }
        hypothesis_set_size += 1;
        match (
            eval_g(spec, &h_phi.eigenvalues(i)),
            eval_g(spec, &h_psi.eigenvalues(i)),
        ) {
            (Ok(a), Ok(b)) => hypothesis_holds &= a <= c * b,
            (Err(_), Ok(_)) => {}
            _ => {
                outside_cone += 1;
                hypothesis_holds = false;
            }
        }
    }
    let conclusion_holds = hypothesis_set_size == 0;
    let mut flags = Vec::new();
    if hypothesis_set_size == 0 {
        flags.push("vacuous: {phi < psi} is empty".into());
    } else if hypothesis_holds {
        flags.push(format!(
            "hypothesis holds yet phi < psi at {hypothesis_set_size} points (discretization error)"
        ));
    }
    if hessian_gap < 0.0 {
        flags.push(format!(
            "negative Hessian gap {hessian_gap:.3e} at the minimum point"
        ));
    }
    Ok(DominationReport {
        min_index,
        min_point: g.point(min_index)[..g.dims()].to_vec(),
        min_value,
        hessian_gap,
        eigen_gap,
        g_gap,
        hypothesis_set_size,
        hypothesis_holds,
        outside_cone,
        conclusion_holds,
        flags,
    })
}
