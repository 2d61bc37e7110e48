//! Radial psh functions `v = chi(log |z|^2)` near an isolated singularity.
//!
//! Everything runs on the logarithmic scale `sigma = ln|t|`, `t = -e^sigma`,
//! and profiles expose `ln chi'` and `ln chi''` as functions of `sigma` so
//! that integrands far out (|t| ~ e^{10^4}) never have to form `t`.
//!
//! Normalization: `dd^c = (i/pi) d dbar`, for which
//! `(dd^c v)^n = c_n chi'^{n-1} chi'' e^{-nt} dV` with `c_n = n! (2/pi)^n`.

use std::cell::RefCell;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::interp::MonotoneCubic;
use crate::quad;
use crate::weights::TailFunction;

/// Offset in the triple-log example `chi(t) = -log log log(-t + 10000)`.
pub const TRIPLE_LOG_OFFSET: f64 = 10_000.0;

/// Upper limit of `sigma` for which `t = -e^sigma` is still a finite double.
const SIGMA_MAX: f64 = 700.0;

/// `c_n = n! (2/pi)^n`: c_1 = 0.63662, c_2 = 0.81057.
pub fn c_n(n: u32) -> f64 {
    (1..=n)
        .map(|k| k as f64 * 2.0 / std::f64::consts::PI)
        .product()
}

/// Three-state verdict for truncation studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convergence {
    Converged,
    Diverging,
    Inconclusive,
}

/// Tabulated `(t, chi, chi', chi'')` on an increasing t-grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampledChi {
    chi: MonotoneCubic,
    chi1: MonotoneCubic,
    t: Vec<f64>,
    chi2: Vec<f64>,
}

impl SampledChi {
    pub fn new(rows: &[ProfileRow]) -> Result<Self> {
        let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
        if rows
            .iter()
            .any(|r| r.t > 0.0 || r.chi1 <= 0.0 || r.chi2 < 0.0)
        {
            return Err(LabError::InvalidInput(
                "sampled profile needs t <= 0, chi' > 0 and chi'' >= 0".into(),
            ));
        }
        let chi = MonotoneCubic::new(t.clone(), rows.iter().map(|r| r.chi).collect())?;
        let chi1 = MonotoneCubic::new(t.clone(), rows.iter().map(|r| r.chi1).collect())
            .map_err(|_| LabError::Convexity("sampled chi' must be nondecreasing".into()))?;
        Ok(Self {
            chi,
            chi1,
            chi2: rows.iter().map(|r| r.chi2).collect(),
            t,
        })
    }

    fn chi2_at(&self, t: f64) -> Result<f64> {
        let (lo, hi) = (self.t[0], self.t[self.t.len() - 1]);
        if !(t >= lo && t <= hi) {
            return Err(LabError::OutOfDomain(format!(
                "{t} outside sampled profile [{lo}, {hi}]"
            )));
        }
        let i = self
            .t
            .partition_point(|&x| x <= t)
            .clamp(1, self.t.len() - 1)
            - 1;
        let s = (t - self.t[i]) / (self.t[i + 1] - self.t[i]);
        Ok(self.chi2[i] + s * (self.chi2[i + 1] - self.chi2[i]))
    }
}

/// A radial density `F(t)`, stored through its log-moment
/// `g(t) = ln(F(t) e^{nt})` which stays moderate where `F` itself overflows.
#[derive(Clone)]
pub struct DensityProfile {
    n: u32,
    ln_moment: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for DensityProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DensityProfile")
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

impl DensityProfile {
    /// From `F` itself.
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(n: u32, density: F) -> Self {
        let nf = n as f64;
        Self {
            n,
            ln_moment: Arc::new(move |t| density(t).ln() + nf * t),
        }
    }

    /// From `g(t) = ln(F(t) e^{nt})`.
    pub fn from_log_moment<G: Fn(f64) -> f64 + Send + Sync + 'static>(n: u32, g: G) -> Self {
        Self {
            n,
            ln_moment: Arc::new(g),
        }
    }

    /// The density produced by a profile under the forward map.
    pub fn of_profile(profile: &RadialProfile) -> Self {
        let p = profile.clone();
        Self::from_log_moment(profile.n, move |t| ln_moment(&p, t).unwrap_or(f64::NAN))
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn c_n(&self) -> f64 {
        c_n(self.n)
    }

    pub fn ln_moment(&self, t: f64) -> f64 {
        (self.ln_moment)(t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.ln_moment(t) - self.n as f64 * t).exp()
    }

    /// `G(t) = int_{-oo}^t F(s) e^{ns} ds`.
    fn cumulative(&self, t: f64) -> f64 {
        let g = |s: f64| self.ln_moment(s).exp();
        if t > -1.0 {
            return self.cumulative(-1.0) + quad::integrate(g, -1.0, t, 0.0, 1e-12).value;
        }
        let sigma_t = (-t).ln();
        sigma_integral(
            |sig| (self.ln_moment(-sig.exp()) + sig).exp(),
            sigma_t,
            SIGMA_MAX,
        )
    }
}

#[derive(Debug, Clone)]
pub enum ChiKind {
    /// `chi(t) = e^t`, i.e. `v = |z|^2`.
    Exponential,
    /// `chi(t) = t`, i.e. `v = log |z|^2`.
    Linear,
    /// `chi(t) = -log log log(-t + 10000)`.
    TripleLog,
    Sampled(SampledChi),
    /// Quadrature inverse of a density profile.
    Inverted(DensityProfile),
}

/// Convex increasing `chi` on `(-oo, 0]` in complex dimension `n`.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub kind: ChiKind,
    pub n: u32,
    /// Truncation point for improper integrals.
    pub t_cut: f64,
}

/// Triple-log intermediates at `t = -e^sigma`: `(a, b) = (ln u, ln ln u)`, `u = -t + 10000`.
fn triple_log_ab(sigma: f64) -> (f64, f64) {
    let a = if sigma > 30.0 {
        sigma + (TRIPLE_LOG_OFFSET * (-sigma).exp()).ln_1p()
    } else {
        (sigma.exp() + TRIPLE_LOG_OFFSET).ln()
    };
    (a, a.ln())
}

impl RadialProfile {
    pub fn new(kind: ChiKind, n: u32) -> Self {
        Self {
            kind,
            n,
            t_cut: -(50f64.exp()),
        }
    }

    pub fn exponential(n: u32) -> Self {
        Self::new(ChiKind::Exponential, n)
    }

    pub fn linear(n: u32) -> Self {
        Self::new(ChiKind::Linear, n)
    }

    pub fn triple_log(n: u32) -> Self {
        Self::new(ChiKind::TripleLog, n)
    }

    pub fn sampled(rows: &[ProfileRow], n: u32) -> Result<Self> {
        let t_cut = rows.first().map(|r| r.t).unwrap_or(-1.0);
        Ok(Self {
            kind: ChiKind::Sampled(SampledChi::new(rows)?),
            n,
            t_cut,
        })
    }

    pub fn named(name: &str, n: u32) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Ok(Self::exponential(n)),
            "linear" => Ok(Self::linear(n)),
            "triplelog" | "triple-log" | "triple_log" => Ok(Self::triple_log(n)),
            other => Err(LabError::InvalidInput(format!("unknown profile '{other}'"))),
        }
    }

    pub fn with_cut(mut self, t_cut: f64) -> Self {
        self.t_cut = t_cut;
        self
    }

    /// `(ln chi'(t), ln chi''(t))` at `t = -e^sigma`.
    pub fn ln_derivs_sigma(&self, sigma: f64) -> Result<(f64, f64)> {
        match &self.kind {
            ChiKind::Exponential => {
                let t = -sigma.exp();
                Ok((t, t))
            }
            ChiKind::Linear => Ok((0.0, f64::NEG_INFINITY)),
            ChiKind::TripleLog => {
                let (a, b) = triple_log_ab(sigma);
                let ln_u = a;
                let ln1 = -(ln_u + a.ln() + b.ln());
                Ok((ln1, (a * b + b + 1.0).ln() + 2.0 * ln1))
            }
            ChiKind::Sampled(s) => {
                let t = -sigma.exp();
                Ok((s.chi1.eval(t)?.ln(), s.chi2_at(t)?.ln()))
            }
            ChiKind::Inverted(f) => {
                let t = -sigma.exp();
                let nf = self.n as f64;
                let g = f.cumulative(t);
                if !(g > 0.0) || !g.is_finite() {
                    return Err(LabError::NonIntegrable(format!(
                        "cumulative density {g} at t = {t}"
                    )));
                }
                let ln1 = ((nf / f.c_n()) * g).ln() / nf;
                let ln2 = f.ln_moment(t) - f.c_n().ln() - (nf - 1.0) * ln1;
                Ok((ln1, ln2))
            }
        }
    }

    /// Largest `sigma` at which the profile is defined.
    pub fn sigma_limit(&self) -> f64 {
        match &self.kind {
            ChiKind::Sampled(s) => (-s.t[0]).ln(),
            _ => f64::INFINITY,
        }
    }

    fn sigma_of(t: f64) -> Result<f64> {
        if t > 0.0 {
            return Err(LabError::OutOfDomain(format!(
                "profile argument t = {t} must be <= 0"
            )));
        }
        Ok((-t).ln())
    }

    /// `chi'(t)`.
    pub fn chi1(&self, t: f64) -> Result<f64> {
        if let ChiKind::Sampled(s) = &self.kind {
            Self::sigma_of(t)?;
            return s.chi1.eval(t);
        }
        Ok(self.ln_derivs_sigma(Self::sigma_of(t)?)?.0.exp())
    }

    /// `chi''(t)`.
    pub fn chi2(&self, t: f64) -> Result<f64> {
        if let ChiKind::Sampled(s) = &self.kind {
            Self::sigma_of(t)?;
            return s.chi2_at(t);
        }
        Ok(self.ln_derivs_sigma(Self::sigma_of(t)?)?.1.exp())
    }

    /// `chi(t)`; inverted profiles are anchored at `chi(0) = 0`.
    pub fn chi(&self, t: f64) -> Result<f64> {
        let sigma = Self::sigma_of(t)?;
        match &self.kind {
            ChiKind::Exponential => Ok(t.exp()),
            ChiKind::Linear => Ok(t),
            ChiKind::TripleLog => Ok(-triple_log_ab(sigma).1.ln()),
            ChiKind::Sampled(s) => s.chi.eval(t),
            ChiKind::Inverted(_) => {
                let f = |s: f64| self.chi1(s).unwrap_or(f64::NAN);
                if t >= -1.0 {
                    return Ok(-quad::integrate(f, t, 0.0, 1e-15, 1e-11).value);
                }
                let head = quad::integrate(f, -1.0, 0.0, 1e-15, 1e-11).value;
                let tail = sigma_integral(
                    |sig| (self.ln_derivs_sigma(sig).map(|d| d.0).unwrap_or(f64::NAN) + sig).exp(),
                    0.0,
                    sigma,
                );
                Ok(-head - tail)
            }
        }
    }

    /// Profile samples on `t_k = -e^{sigma_k}` for `sigma_k` uniform on `[sigma_lo, sigma_hi]`, plus `t = 0`.
    pub fn sample(&self, sigma_lo: f64, sigma_hi: f64, count: usize) -> Result<Vec<ProfileRow>> {
        let mut rows = Vec::with_capacity(count + 1);
        for k in 0..count {
            let sig = sigma_hi - (sigma_hi - sigma_lo) * k as f64 / (count.max(2) - 1) as f64;
            let t = -sig.exp();
            rows.push(ProfileRow {
                t,
                chi: self.chi(t)?,
                chi1: self.chi1(t)?,
                chi2: self.chi2(t)?,
            });
        }
        rows.push(ProfileRow {
            t: 0.0,
            chi: self.chi(0.0)?,
            chi1: self.chi1(0.0)?,
            chi2: self.chi2(0.0)?,
        });
        Ok(rows)
    }
}

/// One CSV row of a sampled profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub t: f64,
    pub chi: f64,
    pub chi1: f64,
    pub chi2: f64,
}

pub fn write_profile_csv(rows: &[ProfileRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_profile_csv(path: &Path) -> Result<Vec<ProfileRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["t", "chi", "chi1", "chi2"] {
        return Err(LabError::InvalidInput(
            "profile CSV header must be 't,chi,chi1,chi2'".into(),
        ));
    }
    rdr.deserialize()
        .map(|r| r.map_err(LabError::from))
        .collect()
}

/// Adaptive quadrature over `[a, b]` split at powers of two, so integrands
/// concentrated at small `sigma` are not skipped by wide panels.
fn sigma_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut edges = vec![a];
    let mut x = 1.0;
    while x <= a {
        x *= 2.0;
    }
    while x < b {
        edges.push(x);
        x *= 2.0;
    }
    edges.push(b);
    edges
        .windows(2)
        .map(|e| quad::integrate(&f, e[0], e[1], 0.0, 1e-11).value)
        .sum()
}

/// `ln(c_n chi'^{n-1} chi'')` at `t`.
pub fn ln_moment(profile: &RadialProfile, t: f64) -> Result<f64> {
    let sigma = RadialProfile::sigma_of(t)?;
    ln_moment_sigma(profile, sigma)
}

fn ln_moment_sigma(profile: &RadialProfile, sigma: f64) -> Result<f64> {
    let (l1, l2) = profile.ln_derivs_sigma(sigma)?;
    let nf = profile.n as f64;
    Ok(c_n(profile.n).ln() + scaled(nf - 1.0, l1) + l2)
}

fn scaled(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// `ln F(t)` where `F = c_n chi'^{n-1} chi'' e^{-nt}`.
pub fn ln_forward_density(profile: &RadialProfile, t: f64) -> Result<f64> {
    Ok(ln_moment(profile, t)? - profile.n as f64 * t)
}

/// `F(t) = c_n chi'(t)^{n-1} chi''(t) e^{-nt}`; may overflow to infinity far out.
pub fn forward_density(profile: &RadialProfile, t: f64) -> Result<f64> {
    Ok(ln_forward_density(profile, t)?.exp())
}

/// Inverts the forward map: `chi'(t) = [(n/c_n) int_{-oo}^t F e^{ns} ds]^{1/n}`.
///
/// The inner integral is checked for convergence at `-oo` by a doubling
/// study in `sigma`.
pub fn inverse_profile(density: &DensityProfile) -> Result<RadialProfile> {
    let g = |sig: f64| (density.ln_moment(-sig.exp()) + sig).exp();
    let mut increments = Vec::new();
    let mut lo = 1.0;
    while lo < SIGMA_MAX {
        let hi = (2.0 * lo).min(SIGMA_MAX);
        increments.push(sigma_integral(g, lo, hi));
        lo = hi;
    }
    let total: f64 = increments.iter().sum();
    let last = *increments.last().expect("nonempty");
    if !total.is_finite() || last > 1e-8 * total {
        return Err(LabError::NonIntegrable(format!(
            "int F e^(nt) dt does not converge at -infinity (last increment {last:.3e}, total {total:.3e})"
        )));
    }
    Ok(RadialProfile::new(
        ChiKind::Inverted(density.clone()),
        density.n(),
    ))
}

/// Value and truncation verdict of a functional under doubling of `|T|`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationReport {
    pub value: f64,
    /// Values at `2|T|`, `4|T|`, `8|T|`.
    pub doubled: [f64; 3],
    pub verdict: Convergence,
    /// Values at `|T|^2`, `|T|^4`, `|T|^8` (doubling `log|T|`).
    pub log_doubled: [f64; 3],
    /// Same rule applied to the `log|T|` doublings.
    pub log_verdict: Convergence,
}

fn truncation_verdict(values: [f64; 4]) -> Convergence {
    let rel = |a: f64, b: f64| (b - a).abs() / b.abs().max(f64::MIN_POSITIVE);
    let changes = [
        rel(values[0], values[1]),
        rel(values[1], values[2]),
        rel(values[2], values[3]),
    ];
    if values.iter().any(|v| !v.is_finite()) {
        Convergence::Diverging
    } else if changes[0] < 1e-3 {
        Convergence::Converged
    } else if changes.iter().all(|&c| c > 0.1) {
        Convergence::Diverging
    } else {
        Convergence::Inconclusive
    }
}

/// Runs `f` and surfaces the first error recorded by the integrand.
fn with_error_slot<T>(f: impl FnOnce(&RefCell<Option<LabError>>) -> T) -> Result<T> {
    let slot = RefCell::new(None);
    let out = f(&slot);
    match slot.into_inner() {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// `int_T^{-e} chi'' chi'^{n-1} |t|^n h(log|t|)^n dt` in `sigma` coordinates.
pub fn integrability_functional_sigma(
    profile: &RadialProfile,
    h: &TailFunction,
    sigma_t: f64,
) -> Result<f64> {
    let nf = profile.n as f64;
    with_error_slot(|slot| {
        sigma_integral(
            |sig| {
                let terms = profile.ln_derivs_sigma(sig).and_then(|(l1, l2)| {
                    let lh = h.ln_eval(sig).map_err(|e| {
                        LabError::OutOfDomain(format!("tail h undefined at t = -e^{sig}: {e}"))
                    })?;
                    Ok(l2 + scaled(nf - 1.0, l1) + (nf + 1.0) * sig + nf * lh)
                });
                match terms {
                    Ok(v) => v.exp(),
                    Err(e) => {
                        slot.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            },
            1.0,
            sigma_t,
        )
    })
}

/// Integrability functional truncated at `T` with the doubling verdict.
pub fn integrability_functional(
    profile: &RadialProfile,
    h: &TailFunction,
    t_cut: f64,
) -> Result<TruncationReport> {
    if !(t_cut < -std::f64::consts::E) || !t_cut.is_finite() {
        return Err(LabError::InvalidInput(format!(
            "truncation T = {t_cut} must be finite and < -e"
        )));
    }
    integrability_functional_log(profile, h, (-t_cut).ln())
}

/// Integrability functional truncated at `T = -e^sigma_t`, for cutoffs past the range of doubles.
pub fn integrability_functional_log(
    profile: &RadialProfile,
    h: &TailFunction,
    sigma_t: f64,
) -> Result<TruncationReport> {
    if !(sigma_t > 1.0) || !sigma_t.is_finite() {
        return Err(LabError::InvalidInput(format!(
            "log-truncation {sigma_t} must be finite and > 1"
        )));
    }
    let ln2 = std::f64::consts::LN_2;
    let mut values = [0.0; 4];
    let mut log_values = [0.0; 4];
    for k in 0..4 {
        values[k] = integrability_functional_sigma(profile, h, sigma_t + k as f64 * ln2)?;
        log_values[k] = integrability_functional_sigma(profile, h, sigma_t * 2f64.powi(k as i32))?;
    }
    Ok(TruncationReport {
        value: values[0],
        doubled: [values[1], values[2], values[3]],
        verdict: truncation_verdict(values),
        log_doubled: [log_values[1], log_values[2], log_values[3]],
        log_verdict: truncation_verdict(log_values),
    })
}

/// `int_{s_a}^{s_b} h(s)^n / (s log s)^n ds`, the log-scale comparison integral.
pub fn substituted_integral(h: &TailFunction, n: u32, s_a: f64, s_b: f64) -> Result<f64> {
    let nf = n as f64;
    with_error_slot(|slot| {
        sigma_integral(
            |s| match h.ln_eval(s) {
                Ok(lh) => (nf * (lh - s.ln() - s.ln().ln())).exp(),
                Err(e) => {
                    slot.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            s_a,
            s_b,
        )
    })
}

/// Boundedness study of `chi(-oo) = chi(0) - int_{-oo}^0 chi'`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub verdict: Boundedness,
    /// `int_{-e}^0 chi'`.
    pub head: f64,
    /// `int chi'` over `sigma in [2^k, 2^{k+1}]`, with `[1, 2]` first.
    pub increments: Vec<f64>,
    /// Truncated estimate of `int_{-oo}^0 chi'`.
    pub total: f64,
    /// `(K I_K) / ((K/2) I_{K/2})`; stays near 1 for harmonic increments.
    pub harmonic_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundedness {
    Bounded,
    Unbounded,
    Inconclusive,
}

/// Decides whether `int_{-oo} chi'` converges from its increments over
/// `sigma`-doublings.
///
/// `I_k ~ 1/k` is the borderline (log-log divergent) case, so `k I_k`
/// holding steady between `K/2` and `K` signals divergence. Geometric decay
/// with a small extrapolated tail signals convergence.
pub fn is_bounded_profile(profile: &RadialProfile) -> Result<BoundednessReport> {
    let doublings = match &profile.kind {
        ChiKind::Sampled(_) | ChiKind::Inverted(_) => {
            ((-profile.t_cut).ln().max(2.0).log2().floor() as usize).min(9)
        }
        _ => 40,
    };
    let head = profile.chi(0.0)? - profile.chi(-std::f64::consts::E)?;
    let mut increments = Vec::with_capacity(doublings + 1);
    let mut lo: f64 = 1.0;
    for _ in 0..=doublings {
        let hi = 2.0 * lo;
        let inc = with_error_slot(|slot| {
            sigma_integral(
                |sig| match profile.ln_derivs_sigma(sig) {
                    Ok((l1, _)) => (l1 + sig).exp(),
                    Err(e) => {
                        slot.borrow_mut().get_or_insert(e);
                        0.0
                    }
                },
                lo,
                hi,
            )
        })?;
        increments.push(inc);
        lo = hi;
    }
    let total = head + increments.iter().sum::<f64>();
    let k = doublings;
    let ik = increments[k];
    let ih = increments[k / 2];
    let harmonic_ratio = if ih > 0.0 {
        (k as f64 * ik) / ((k / 2) as f64 * ih)
    } else {
        0.0
    };
    let verdict = if !total.is_finite() || harmonic_ratio >= 0.8 {
        Boundedness::Unbounded
    } else if ik == 0.0 {
        Boundedness::Bounded
    } else {
        let q = ik / increments[k - 1];
        let tail = if q < 1.0 {
            ik * q / (1.0 - q)
        } else {
            f64::INFINITY
        };
        if tail < 1e-3 * total.abs() {
            Boundedness::Bounded
        } else {
            Boundedness::Inconclusive
        }
    };
    Ok(BoundednessReport {
        verdict,
        head,
        increments,
        total,
        harmonic_ratio,
    })
}

/// Integrals of the radial rigidity argument truncated at `T`:
/// `A = int chi'^n |t|^{n-1} (log|t|)^p`, `B = int chi'' chi'^{n-1} |t|^n (log|t|)^p`,
/// `C = int chi'`, all over `[T, -e]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RigidityReport {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Hölder partner `D = int |t|^{-1} (log|t|)^{-p/(n-1)}` (unused for n = 1).
    pub d: f64,
    /// `chi'(T)^n int_T^{-e} |t|^{n-1} (log|t|)^p`, the integration-by-parts boundary term.
    pub boundary: f64,
    /// `B + boundary`, an upper bound for `A`.
    pub ibp_bound: f64,
    /// `A^{1/n} D^{1-1/n}` (`A` for n = 1), an upper bound for `C`.
    pub holder_bound: f64,
    pub ibp_holds: bool,
    pub holder_holds: bool,
    /// `B` truncated at `|T|^2` (or the end of a sampled profile), exposing growth of `B` with the cutoff.
    pub b_squared_cut: f64,
    pub b_verdict: Convergence,
}

pub fn rigidity_chain(profile: &RadialProfile, p: f64, t_cut: f64) -> Result<RigidityReport> {
    let n = profile.n;
    let nf = n as f64;
    if !(p > nf - 1.0) {
        return Err(LabError::Precondition(format!(
            "rigidity needs p > n - 1, got p = {p}, n = {n}"
        )));
    }
    if !(t_cut < -std::f64::consts::E) {
        return Err(LabError::InvalidInput(format!(
            "truncation T = {t_cut} must be < -e"
        )));
    }
    let sigma_t = (-t_cut).ln();
    let integral = |which: u8, upper: f64| -> Result<f64> {
        with_error_slot(|slot| {
            sigma_integral(
                |sig| match profile.ln_derivs_sigma(sig) {
                    Ok((l1, l2)) => {
                        let lp = p * sig.ln();
                        let v = match which {
                            0 => nf * l1 + nf * sig + lp,
                            1 => l2 + scaled(nf - 1.0, l1) + (nf + 1.0) * sig + lp,
                            _ => l1 + sig,
                        };
                        v.exp()
                    }
                    Err(e) => {
                        slot.borrow_mut().get_or_insert(e);
                        0.0
                    }
                },
                1.0,
                upper,
            )
        })
    };
    let a = integral(0, sigma_t)?;
    let b = integral(1, sigma_t)?;
    let c = integral(2, sigma_t)?;
    // boundary term: chi'(T)^n * int_1^{sigma_T} e^{n sigma} sigma^p d sigma, assembled in logs
    let (l1_t, _) = profile.ln_derivs_sigma(sigma_t)?;
    let k_scaled = sigma_integral(
        |sig| (nf * (sig - sigma_t) + p * sig.ln()).exp(),
        1.0,
        sigma_t,
    );
    let boundary = (nf * l1_t + nf * sigma_t + k_scaled.ln()).exp();
    let ibp_bound = b + boundary;
    let (d, holder_bound) = if n == 1 {
        (0.0, a)
    } else {
        let q = p / (nf - 1.0);
        let d = if (q - 1.0).abs() < 1e-12 {
            sigma_t.ln()
        } else {
            (sigma_t.powf(1.0 - q) - 1.0) / (1.0 - q)
        };
        (d, a.powf(1.0 / nf) * d.powf(1.0 - 1.0 / nf))
    };
    let slack = 1e-9;
    let sigma_2 = (2.0 * sigma_t).min(profile.sigma_limit());
    let b2 = if sigma_2 > sigma_t {
        integral(1, sigma_2)?
    } else {
        b
    };
    let b_verdict = if sigma_2 <= sigma_t {
        Convergence::Inconclusive
    } else {
        let rel = (b2 - b).abs() / b2.abs().max(f64::MIN_POSITIVE);
        if rel < 1e-3 {
            Convergence::Converged
        } else if rel > 0.1 {
            Convergence::Diverging
        } else {
            Convergence::Inconclusive
        }
    };
    Ok(RigidityReport {
        a,
        b,
        c,
        d,
        boundary,
        ibp_bound,
        holder_bound,
        ibp_holds: a <= ibp_bound * (1.0 + slack) + slack,
        holder_holds: c <= holder_bound * (1.0 + slack) + slack,
        b_squared_cut: b2,
        b_verdict,
    })
}
