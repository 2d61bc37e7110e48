//! Orlicz weights, condition (K), Luxembourg norms and convex conjugates.
//!
//! The named families are
//!
//! * `PowerP`:  `u_p(t) = t^p`
//! * `LogP`:    `v_p(t) = t (log(t + 10))^p`
//! * `LogLogP`: `w_p(t) = t (log(t + 10))^n (log log(t + 10))^p`
//!
//! plus a `Tabulated` fallback interpolated by a monotone cubic.
//!
//! Condition (K) asks for `w(t) ~ t (log t)^n (h(log log t))^n` with `h`
//! increasing and `int^oo ds / h(s) < oo`. The tail `h` is extracted
//! pointwise by inverting that growth formula at `t = exp(exp(s))`; all of
//! the arithmetic is done on `log t` so that `s` can be pushed far past the
//! range where `t` itself is representable.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::interp::MonotoneCubic;
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightFamily {
    PowerP,
    LogP,
    LogLogP,
    Tabulated,
}

impl std::str::FromStr for WeightFamily {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "powerp" | "power" => Ok(WeightFamily::PowerP),
            "logp" | "log" => Ok(WeightFamily::LogP),
            "loglogp" | "loglog" => Ok(WeightFamily::LogLogP),
            "tabulated" | "table" => Ok(WeightFamily::Tabulated),
            other => Err(LabError::InvalidInput(format!(
                "unknown weight family '{other}'"
            ))),
        }
    }
}

/// An Orlicz weight: a named family with exponent `p` and dimension `n`,
/// or a monotone table of `(t, w(t))` samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub family: WeightFamily,
    #[serde(default)]
    pub p: f64,
    #[serde(default = "default_dim")]
    pub n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
    #[serde(skip)]
    interp: OnceLock<MonotoneCubic>,
}

fn default_dim() -> u32 {
    1
}

impl PartialEq for WeightSpec {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
            && self.p == other.p
            && self.n == other.n
            && self.table == other.table
    }
}

impl WeightSpec {
    pub fn power(p: f64) -> Self {
        Self::named(WeightFamily::PowerP, p, 1)
    }

    pub fn log(p: f64, n: u32) -> Self {
        Self::named(WeightFamily::LogP, p, n)
    }

    pub fn loglog(p: f64, n: u32) -> Self {
        Self::named(WeightFamily::LogLogP, p, n)
    }

    pub fn named(family: WeightFamily, p: f64, n: u32) -> Self {
        Self {
            family,
            p,
            n,
            table: None,
            interp: OnceLock::new(),
        }
    }

    pub fn tabulated(table: Vec<(f64, f64)>) -> Result<Self> {
        let spec = Self {
            family: WeightFamily::Tabulated,
            p: 0.0,
            n: 1,
            table: Some(table),
            interp: OnceLock::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Short identifier used in CSV headers, e.g. `logp_p2_n1`.
    pub fn name(&self) -> String {
        match self.family {
            WeightFamily::PowerP => format!("powerp_p{}", self.p),
            WeightFamily::LogP => format!("logp_p{}_n{}", self.p, self.n),
            WeightFamily::LogLogP => format!("loglogp_p{}_n{}", self.p, self.n),
            WeightFamily::Tabulated => "tabulated".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(LabError::InvalidInput(
                "weight dimension n must be >= 1".into(),
            ));
        }
        match self.family {
            WeightFamily::Tabulated => {
                let table = self.table.as_ref().ok_or_else(|| {
                    LabError::InvalidInput("tabulated weight without table".into())
                })?;
                if table.iter().any(|&(t, w)| t < 0.0 || w < 0.0) {
                    return Err(LabError::InvalidInput(
                        "tabulated weight must have t >= 0 and w >= 0".into(),
                    ));
                }
                self.interpolant()?;
                Ok(())
            }
            _ if !self.p.is_finite() => Err(LabError::InvalidInput(
                "weight exponent p must be finite".into(),
            )),
            _ => Ok(()),
        }
    }

    fn interpolant(&self) -> Result<&MonotoneCubic> {
        if let Some(m) = self.interp.get() {
            return Ok(m);
        }
        let table = self
            .table
            .as_ref()
            .ok_or_else(|| LabError::InvalidInput("tabulated weight without table".into()))?;
        let (xs, ys): (Vec<f64>, Vec<f64>) = table.iter().copied().unzip();
        let m = MonotoneCubic::new(xs, ys)?;
        if ys_decreasing(&m) {
            return Err(LabError::InvalidInput(
                "tabulated weight must be increasing".into(),
            ));
        }
        Ok(self.interp.get_or_init(|| m))
    }

    /// `w(t)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(LabError::OutOfDomain(format!(
                "weight argument t = {t} must be >= 0"
            )));
        }
        let n = self.n as f64;
        let p = self.p;
        Ok(match self.family {
            WeightFamily::PowerP => t.powf(p),
            WeightFamily::LogP => t * (t + 10.0).ln().powf(p),
            WeightFamily::LogLogP => {
                let l = (t + 10.0).ln();
                t * l.powf(n) * l.ln().powf(p)
            }
            WeightFamily::Tabulated => self.interpolant()?.eval(t)?,
        })
    }

    /// `w'(t)`, closed form for named families.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(LabError::OutOfDomain(format!(
                "weight argument t = {t} must be >= 0"
            )));
        }
        let n = self.n as f64;
        let p = self.p;
        Ok(match self.family {
            WeightFamily::PowerP => {
                if p == 1.0 {
                    1.0
                } else if t == 0.0 {
                    if p > 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    p * t.powf(p - 1.0)
                }
            }
            WeightFamily::LogP => {
                let l = (t + 10.0).ln();
                l.powf(p) + t * p * l.powf(p - 1.0) / (t + 10.0)
            }
            WeightFamily::LogLogP => {
                let l = (t + 10.0).ln();
                let ll = l.ln();
                let dl = 1.0 / (t + 10.0);
                l.powf(n) * ll.powf(p)
                    + t * (n * l.powf(n - 1.0) * dl * ll.powf(p)
                        + l.powf(n) * p * ll.powf(p - 1.0) * dl / l)
            }
            WeightFamily::Tabulated => self.interpolant()?.derivative(t)?,
        })
    }

    /// Largest `t` at which the weight can be evaluated.
    pub fn t_max(&self) -> f64 {
        match (
            &self.family,
            self.interp.get().or_else(|| self.interpolant().ok()),
        ) {
            (WeightFamily::Tabulated, Some(m)) => m.domain().1,
            _ => f64::INFINITY,
        }
    }

    /// Sampled convexity and monotonicity check on `[0, t_hi]`: second
    /// differences must be `>= -tol * (1 + |w|)`.
    pub fn check_convexity(&self, t_hi: f64, samples: usize) -> Result<()> {
        let t_hi = t_hi.min(self.t_max());
        if let (WeightFamily::Tabulated, Some(table)) = (&self.family, &self.table) {
            let slopes: Vec<f64> = table
                .windows(2)
                .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
                .collect();
            if let Some(i) = slopes
                .windows(2)
                .position(|s| s[1] < s[0] - 1e-12 * (1.0 + s[0].abs()))
            {
                return Err(LabError::Convexity(format!(
                    "tabulated weight slopes decrease near t = {}",
                    table[i + 1].0
                )));
            }
            return Ok(());
        }
        let h = t_hi / samples as f64;
        let mut prev = self.eval(0.0)?;
        for k in 1..samples {
            let t = k as f64 * h;
            let (a, b, c) = (self.eval(t - h)?, self.eval(t)?, self.eval(t + h)?);
            let tol = 1e-9 * (1.0 + b.abs());
            if a - 2.0 * b + c < -tol {
                return Err(LabError::Convexity(format!(
                    "{} is not convex near t = {t}",
                    self.name()
                )));
            }
            if b < prev - tol {
                return Err(LabError::Convexity(format!(
                    "{} is not increasing near t = {t}",
                    self.name()
                )));
            }
            prev = b;
        }
        Ok(())
    }

    /// `log h(s)` for the extracted (K) tail, computed entirely from `log t = e^s`.
    fn ln_extracted_tail(&self, s: f64) -> f64 {
        let n = self.n as f64;
        let ell = s.exp();
        // log(t + 10) = ell + log1p(10 e^{-ell}); log log(t + 10) = s + log1p(corr / ell)
        let corr = (10.0 * (-ell).exp()).ln_1p();
        let ln_l = if ell.is_finite() {
            s + (corr / ell).ln_1p()
        } else {
            s
        };
        let l = if ell.is_finite() {
            ell + corr
        } else {
            f64::INFINITY
        };
        let ratio = match self.family {
            WeightFamily::PowerP => scaled(self.p - 1.0, ell) - n * s,
            WeightFamily::LogP => self.p * ln_l - n * s,
            WeightFamily::LogLogP => {
                // n (log L - log ell) + p log log L
                let lead = if ell.is_finite() {
                    n * (l / ell).ln()
                } else {
                    0.0
                };
                lead + self.p * ln_l.ln()
            }
            WeightFamily::Tabulated => f64::NAN,
        };
        ratio / n
    }
}

fn ys_decreasing(m: &MonotoneCubic) -> bool {
    let ys = m.ys();
    ys[ys.len() - 1] < ys[0]
}

/// `a * b` with the convention `0 * inf = 0`.
fn scaled(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// `w(t)` for `t >= 0`; tabulated weights interpolate and reject queries
/// outside the table.
pub fn eval_weight(spec: &WeightSpec, t: f64) -> Result<f64> {
    spec.eval(t)
}

// ---------------------------------------------------------------------------
// Tail functions and condition (K)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailKind {
    /// `scale * s^exponent`
    Power { exponent: f64, scale: f64 },
    /// `exp(rate * s)`
    Exponential { rate: f64 },
    /// The pointwise (K) tail of a named weight.
    Extracted { weight: WeightSpec },
    /// `(w*)^{-1}`, the inverse of the convex conjugate.
    InverseConjugate { weight: WeightSpec },
    /// Monotone samples `(s, h(s))`.
    Table { points: Vec<(f64, f64)> },
}

/// An increasing positive function on `[s_min, oo)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailFunction {
    pub kind: TailKind,
    pub s_min: f64,
    /// Whether `h` was observed nondecreasing from `s_min` on.
    pub increasing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailVerdict {
    Converges,
    Diverges,
    Unknown,
}

impl TailFunction {
    pub fn power(exponent: f64) -> Self {
        Self {
            kind: TailKind::Power {
                exponent,
                scale: 1.0,
            },
            s_min: 0.0,
            increasing: exponent >= 0.0,
        }
    }

    pub fn exponential(rate: f64) -> Self {
        Self {
            kind: TailKind::Exponential { rate },
            s_min: f64::NEG_INFINITY,
            increasing: rate >= 0.0,
        }
    }

    pub fn inverse_conjugate(weight: WeightSpec) -> Self {
        Self {
            kind: TailKind::InverseConjugate { weight },
            s_min: 0.0,
            increasing: true,
        }
    }

    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        let m = MonotoneCubic::new(xs, ys)?;
        if ys_decreasing(&m) || points.iter().any(|p| p.1 <= 0.0) {
            return Err(LabError::InvalidInput(
                "tail table must be positive and increasing".into(),
            ));
        }
        Ok(Self {
            s_min: points[0].0,
            kind: TailKind::Table { points },
            increasing: true,
        })
    }

    /// Extracted tail of a named weight; `s_min` is where `h` starts increasing.
    pub fn extracted(weight: WeightSpec) -> Result<Self> {
        if weight.family == WeightFamily::Tabulated {
            return Err(LabError::InvalidInput(
                "no tail extraction for tabulated weights".into(),
            ));
        }
        let f = |s: f64| weight.ln_extracted_tail(s);
        // scan s in [-5, 60]: s_min is the first point after the last decrease
        let step = 0.01;
        let (lo, hi) = (-5.0, 60.0);
        let count = ((hi - lo) / step) as usize;
        let mut last_drop = None;
        let mut prev = f(lo);
        for k in 1..=count {
            let s = lo + k as f64 * step;
            let v = f(s);
            if v < prev - 1e-12 * (1.0 + prev.abs()) {
                last_drop = Some(s);
            }
            prev = v;
        }
        let (s_min, increasing) = match last_drop {
            None => (lo, true),
            Some(s) if s < hi - 1.0 => (s, true),
            Some(s) => (s, false),
        };
        Ok(Self {
            kind: TailKind::Extracted { weight },
            s_min,
            increasing,
        })
    }

    /// `log h(s)`.
    pub fn ln_eval(&self, s: f64) -> Result<f64> {
        match &self.kind {
            TailKind::Power { exponent, scale } => {
                if s <= 0.0 {
                    return Err(LabError::OutOfDomain(format!(
                        "power tail needs s > 0, got {s}"
                    )));
                }
                Ok(scale.ln() + exponent * s.ln())
            }
            TailKind::Exponential { rate } => Ok(rate * s),
            TailKind::Extracted { weight } => Ok(weight.ln_extracted_tail(s)),
            TailKind::InverseConjugate { weight } => Ok(inverse_conjugate(weight, s)?.s.ln()),
            TailKind::Table { .. } => Ok(self.eval(s)?.ln()),
        }
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        match &self.kind {
            TailKind::Table { points } => {
                let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
                MonotoneCubic::new(xs, ys)?.eval(s)
            }
            TailKind::InverseConjugate { weight } => Ok(inverse_conjugate(weight, s)?.s),
            _ => Ok(self.ln_eval(s)?.exp()),
        }
    }

    /// Whether `h` is unbounded above.
    pub fn is_unbounded(&self) -> bool {
        match &self.kind {
            TailKind::Power { exponent, .. } => *exponent > 0.0,
            TailKind::Exponential { rate } => *rate > 0.0,
            TailKind::Extracted { weight } => {
                weight.ln_extracted_tail(1e6) > weight.ln_extracted_tail(1e3)
            }
            TailKind::InverseConjugate { .. } => true,
            TailKind::Table { .. } => false,
        }
    }

    /// Classifies `int^oo ds / h(s)` from the growth of `log h` far out.
    pub fn integral_verdict(&self) -> TailVerdict {
        match &self.kind {
            TailKind::Table { .. } => TailVerdict::Unknown,
            _ => classify_growth(|s| self.ln_eval(s).unwrap_or(f64::NAN)),
        }
    }

    /// `int_a^b ds / h(s)` by adaptive quadrature in `u = ln s` (for `a > 0`).
    pub fn reciprocal_integral(&self, a: f64, b: f64) -> Result<f64> {
        if a <= 0.0 {
            let head = quad::integrate(
                |s| (-self.ln_eval(s).unwrap_or(f64::NAN)).exp(),
                a,
                b.min(1.0),
                1e-14,
                1e-12,
            );
            if b <= 1.0 {
                return Ok(head.value);
            }
            return Ok(head.value + self.reciprocal_integral(1.0, b)?);
        }
        let r = quad::integrate(
            |u| {
                let s = u.exp();
                (u - self.ln_eval(s).unwrap_or(f64::NAN)).exp()
            },
            a.ln(),
            b.ln(),
            1e-16,
            1e-11,
        );
        if !r.value.is_finite() {
            return Err(LabError::OutOfDomain(format!(
                "1/h not integrable on [{a}, {b}]"
            )));
        }
        Ok(r.value)
    }

    /// Doubling study of `int_{S_k}^{S_{k+1}} ds/h`, `S_k = S_0 2^k`.
    pub fn tail_increments(&self, s0: f64, doublings: usize) -> Result<TailIntegralReport> {
        let s0 = s0.max(self.s_min).max(1.0);
        let mut increments = Vec::with_capacity(doublings);
        let mut lower = s0;
        for _ in 0..doublings {
            let upper = 2.0 * lower;
            let inc = self
                .reciprocal_integral(lower, upper)
                .unwrap_or(f64::INFINITY);
            increments.push((lower, inc));
            lower = upper;
        }
        // threshold: first S after which every increment is below 1e-6
        let threshold = (0..increments.len())
            .find(|&k| increments[k..].iter().all(|&(_, v)| v < 1e-6))
            .map(|k| increments[k].0);
        Ok(TailIntegralReport {
            increments,
            threshold,
        })
    }
}

/// Increments of the truncated tail integral under doubling of the cutoff.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailIntegralReport {
    /// `(S_k, int_{S_k}^{2 S_k} ds / h)`.
    pub increments: Vec<(f64, f64)>,
    /// Cutoff past which all increments are below `1e-6`, if reached.
    pub threshold: Option<f64>,
}

/// Decides convergence of `int^oo ds / h` from `g = log h` sampled at huge `s`.
///
/// Local log-log slope `kappa` of `h` at `s ~ 2^40`: `kappa > 1` converges,
/// `kappa < 1` diverges. At `kappa = 1` the tail is declared divergent only
/// if `h / s` is constant across scales (no logarithmic corrections).
fn classify_growth<G: Fn(f64) -> f64>(g: G) -> TailVerdict {
    let s1 = 2f64.powi(40);
    let s2 = 2f64.powi(41);
    let (g1, g2) = (g(s1), g(s2));
    if g1.is_nan() || g2.is_nan() {
        return TailVerdict::Unknown;
    }
    if g2 == f64::INFINITY {
        return TailVerdict::Converges;
    }
    if g2 == f64::NEG_INFINITY {
        return TailVerdict::Diverges;
    }
    let kappa = (g2 - g1) / std::f64::consts::LN_2;
    if kappa > 1.0 + 1e-6 {
        return TailVerdict::Converges;
    }
    if kappa < 1.0 - 1e-6 {
        return TailVerdict::Diverges;
    }
    let d: Vec<f64> = [20, 40, 80]
        .iter()
        .map(|&k| g(2f64.powi(k)) - k as f64 * std::f64::consts::LN_2)
        .collect();
    if (d[2] - d[1]).abs() < 1e-6 && (d[1] - d[0]).abs() < 1e-6 {
        TailVerdict::Diverges
    } else {
        TailVerdict::Unknown
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KVerdict {
    SatisfiesK,
    FailsK,
    Unknown,
}

impl std::fmt::Display for KVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            KVerdict::SatisfiesK => "SatisfiesK",
            KVerdict::FailsK => "FailsK",
            KVerdict::Unknown => "Unknown",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KReport {
    pub verdict: KVerdict,
    pub tail: Option<TailFunction>,
    pub convex: bool,
}

/// Condition (K) for a named weight. Tabulated weights always get `Unknown`.
pub fn check_condition_k(spec: &WeightSpec) -> Result<KReport> {
    spec.validate()?;
    if spec.family == WeightFamily::Tabulated {
        return Ok(KReport {
            verdict: KVerdict::Unknown,
            tail: None,
            convex: spec.check_convexity(spec.t_max(), 512).is_ok(),
        });
    }
    let convex = spec.check_convexity(100.0, 2000).is_ok();
    let tail = TailFunction::extracted(spec.clone())?;
    let verdict = if !convex {
        KVerdict::FailsK
    } else {
        match tail.integral_verdict() {
            TailVerdict::Converges if tail.increasing => KVerdict::SatisfiesK,
            TailVerdict::Converges | TailVerdict::Diverges => KVerdict::FailsK,
            TailVerdict::Unknown => KVerdict::Unknown,
        }
    };
    Ok(KReport {
        verdict,
        tail: Some(tail),
        convex,
    })
}

// ---------------------------------------------------------------------------
// Densities and the Luxembourg norm
// ---------------------------------------------------------------------------

/// Values `f_i >= 0` against a probability measure with masses `m_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySample {
    values: Vec<f64>,
    masses: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DensityRow {
    f: f64,
    m: f64,
}

impl DensitySample {
    pub fn new(values: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if values.len() != masses.len() || values.is_empty() {
            return Err(LabError::InvalidInput(
                "density values and masses must have equal nonzero length".into(),
            ));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(LabError::InvalidInput(
                "density values must be finite and nonnegative".into(),
            ));
        }
        if masses.iter().any(|m| !(*m > 0.0)) {
            return Err(LabError::InvalidInput(
                "quadrature masses must be positive".into(),
            ));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LabError::InvalidInput(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        Ok(Self { values, masses })
    }

    /// Equal masses `1/len`.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let m = 1.0 / values.len().max(1) as f64;
        let masses = vec![m; values.len()];
        Self::new(values, masses)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * s).collect(),
            masses: self.masses.clone(),
        }
    }

    pub fn integral<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.values
            .iter()
            .zip(&self.masses)
            .map(|(f, m)| m * g(*f))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.integral(|f| f)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["f", "m"] {
            return Err(LabError::InvalidInput(
                "density CSV header must be 'f,m'".into(),
            ));
        }
        let mut values = Vec::new();
        let mut masses = Vec::new();
        for row in rdr.deserialize() {
            let row: DensityRow = row?;
            values.push(row.f);
            masses.push(row.m);
        }
        Self::new(values, masses)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for (f, m) in self.values.iter().zip(&self.masses) {
            w.serialize(DensityRow { f: *f, m: *m })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `||f||_w = inf { r > 0 : int w(|f|/r) dV <= w(1) }`, relative tolerance 1e-12.
///
/// `r -> int w(f/r)` is nonincreasing; for convex `w` Jensen's inequality
/// puts the root in `[mean f, max f]`.
pub fn luxembourg_norm(f: &DensitySample, spec: &WeightSpec) -> Result<f64> {
    spec.validate()?;
    let target = spec.eval(1.0)?;
    if !(target > 0.0) {
        return Err(LabError::InvalidInput(
            "Luxembourg norm needs w(1) > 0".into(),
        ));
    }
    let fmax = f.max();
    if fmax == 0.0 {
        return Ok(0.0);
    }
    let modular = |r: f64| -> Result<f64> {
        let mut acc = 0.0;
        for (v, m) in f.values().iter().zip(f.masses()) {
            acc += m * spec.eval(v / r)?;
        }
        Ok(acc)
    };
    let mut hi = fmax;
    let mut lo = f.mean();
    // nonconvex weights: Jensen's bracket may fail, walk down instead
    let mut guard = 0;
    while modular(lo)? < target {
        lo *= 0.5;
        guard += 1;
        if guard > 200 {
            return Err(LabError::Range(
                "could not bracket the Luxembourg norm".into(),
            ));
        }
    }
    if modular(hi)? > target {
        return Err(LabError::Range(
            "upper Luxembourg bracket is not admissible".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if modular(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(hi)
}

// ---------------------------------------------------------------------------
// Convex conjugates
// ---------------------------------------------------------------------------

/// Tabulated convex conjugate `w*(s) = sup_{t >= 0} (s t - w(t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugateTable {
    pub s: Vec<f64>,
    pub values: Vec<f64>,
    /// Maximizing `t` for each `s`.
    pub argmax: Vec<f64>,
}

impl ConjugateTable {
    /// Conjugate of the piecewise-linear interpolant of this table,
    /// evaluated at `t` (i.e. the biconjugate of the original weight).
    pub fn biconjugate(&self, t_grid: &[f64]) -> Vec<f64> {
        let pts: Vec<(f64, f64)> = self
            .s
            .iter()
            .copied()
            .zip(self.values.iter().copied())
            .collect();
        sweep_conjugate(&pts, t_grid)
            .into_iter()
            .map(|(v, _)| v)
            .collect()
    }
}

/// Lower convex hull of points sorted by abscissa.
fn lower_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Linear-time discrete conjugate: for increasing slopes `s`, returns
/// `(max_i s x_i - y_i, argmax x)` by walking the lower hull once.
fn sweep_conjugate(pts: &[(f64, f64)], slopes: &[f64]) -> Vec<(f64, f64)> {
    let hull = lower_hull(pts);
    let mut out = Vec::with_capacity(slopes.len());
    let mut i = 0;
    for &s in slopes {
        while i + 1 < hull.len() {
            let edge = (hull[i + 1].1 - hull[i].1) / (hull[i + 1].0 - hull[i].0);
            if edge < s {
                i += 1;
            } else {
                break;
            }
        }
        out.push((s * hull[i].0 - hull[i].1, hull[i].0));
    }
    out
}

/// Maximizer of `s t - w(t)` on `[lo, hi]` for convex differentiable `w`.
fn polish_argmax(spec: &WeightSpec, s: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    if spec.derivative(lo)? >= s {
        return Ok(lo);
    }
    if spec.derivative(hi)? <= s {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spec.derivative(mid)? < s {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1e-300) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Smallest `t` with `w'(t) >= s`, or infinity when none exists.
fn derivative_bracket(spec: &WeightSpec, s: f64) -> Result<f64> {
    let mut hi = 1.0;
    while spec.derivative(hi)? < s {
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(hi)
}

/// `w*(s)` at a single point via the first-order condition `w'(t) = s`.
pub fn conjugate_at(spec: &WeightSpec, s: f64) -> Result<f64> {
    if spec.family == WeightFamily::Tabulated {
        let table = spec.table.as_ref().expect("validated");
        return Ok(sweep_conjugate(table, &[s])[0].0.max(0.0));
    }
    if s < 0.0 {
        return Err(LabError::OutOfDomain(format!(
            "conjugate slope s = {s} must be >= 0"
        )));
    }
    let hi = derivative_bracket(spec, s)?;
    if hi.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let t = polish_argmax(spec, s, 0.0, hi)?;
    Ok((s * t - spec.eval(t)?).max(-spec.eval(0.0)?))
}

/// Convex conjugate on an increasing grid `s_grid ⊂ [0, s_max]`.
///
/// A discrete sweep over the lower hull of a dense `t`-sample picks the
/// supporting point for every slope; for named families that point is then
/// refined by bisection on `w'(t) = s`. Tabulated weights get the exact
/// conjugate of their piecewise-linear interpolant.
pub fn legendre_conjugate(spec: &WeightSpec, s_grid: &[f64]) -> Result<ConjugateTable> {
    spec.validate()?;
    if s_grid.is_empty() || s_grid.windows(2).any(|w| w[1] <= w[0]) || s_grid[0] < 0.0 {
        return Err(LabError::InvalidInput(
            "s_grid must be nonempty, nonnegative and increasing".into(),
        ));
    }
    let s_max = *s_grid.last().expect("nonempty");
    if spec.family == WeightFamily::Tabulated {
        spec.check_convexity(spec.t_max(), 0)?;
        let table = spec.table.as_ref().expect("validated");
        let swept = sweep_conjugate(table, s_grid);
        return Ok(ConjugateTable {
            s: s_grid.to_vec(),
            values: swept.iter().map(|v| v.0).collect(),
            argmax: swept.iter().map(|v| v.1).collect(),
        });
    }
    let t_hi = derivative_bracket(spec, s_max)?;
    if t_hi.is_infinite() {
        return Err(LabError::Range(format!(
            "w* is infinite at s = {s_max} (weight is not superlinear)"
        )));
    }
    spec.check_convexity(t_hi, 4096)?;
    let samples = 4096;
    let dt = t_hi / samples as f64;
    let pts = (0..=samples)
        .map(|k| {
            let t = k as f64 * dt;
            spec.eval(t).map(|w| (t, w))
        })
        .collect::<Result<Vec<_>>>()?;
    let swept = sweep_conjugate(&pts, s_grid);
    let mut values = Vec::with_capacity(s_grid.len());
    let mut argmax = Vec::with_capacity(s_grid.len());
    for (&s, &(_, t0)) in s_grid.iter().zip(&swept) {
        let t = polish_argmax(spec, s, (t0 - dt).max(0.0), (t0 + dt).min(t_hi))?;
        values.push(s * t - spec.eval(t)?);
        argmax.push(t);
    }
    Ok(ConjugateTable {
        s: s_grid.to_vec(),
        values,
        argmax,
    })
}

/// `h_HY(y) = (w*)^{-1}(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseConjugateValue {
    pub s: f64,
    /// Set when `y` lies below the range of `w*`.
    pub below_range: bool,
}

/// Inverse of `w*` by bisection; `y <= 0` maps to the left end of the flat
/// segment `{w* = 0}`.
pub fn inverse_conjugate(spec: &WeightSpec, y: f64) -> Result<InverseConjugateValue> {
    if y <= 0.0 {
        return Ok(InverseConjugateValue {
            s: 0.0,
            below_range: y < 0.0,
        });
    }
    // w* vanishes on [0, w'(0)]
    let mut lo = match spec.family {
        WeightFamily::Tabulated => 0.0,
        _ => spec.derivative(0.0)?.min(1e300),
    };
    let mut hi = lo.max(1.0);
    while conjugate_at(spec, hi)? < y {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(LabError::Range(format!("w* never reaches {y}")));
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if conjugate_at(spec, mid)? < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(InverseConjugateValue {
        s: 0.5 * (lo + hi),
        below_range: false,
    })
}
