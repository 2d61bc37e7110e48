//! Constants of the comparison lemma, the convex profile `chi` that turns
//! condition (K) into a comparison with a bounded psh function, and the
//! `beta_M` weights of the alternative proof.

use serde::{Deserialize, Serialize};

use crate::envelope::ChainLink;
use crate::error::{LabError, Result};
use crate::grid::{ma_density, TorusField};
use crate::interp::MonotoneCubic;
use crate::weights::{TailFunction, TailKind, TailVerdict};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrickInputs {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub gamma: f64,
    /// Skoda-type constant with `||f~||_{p~} <= C1 ||f||_p`.
    pub c1: f64,
    pub fp_norm: f64,
    pub n: u32,
}

impl TrickInputs {
    /// `a / delta^n`.
    pub fn lambda(&self) -> f64 {
        self.a / self.delta.powi(self.n as i32)
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.a) || !open_unit(self.delta) {
            return Err(LabError::InvalidInput(format!(
                "a = {} and delta = {} must lie in (0, 1)",
                self.a, self.delta
            )));
        }
        if !(self.b > 0.0 && self.gamma > 0.0 && self.c1 > 0.0 && self.fp_norm > 0.0) || self.n == 0
        {
            return Err(LabError::InvalidInput(
                "b, gamma, C1, ||f||_p and n must be positive".into(),
            ));
        }
        let lambda = self.lambda();
        if lambda >= 1.0 {
            return Err(LabError::Infeasible(format!(
                "lambda = a / delta^n = {lambda} >= 1; shrink a or grow delta"
            )));
        }
        Ok(())
    }
}

/// `C = log[C1 ||f||_p a^{-1} (1 - delta)^{-n} b delta^n] / gamma`.
pub fn trick_constant(inp: &TrickInputs) -> Result<f64> {
    inp.validate()?;
    let n = inp.n as i32;
    let ln = inp.c1.ln() + inp.fp_norm.ln() - inp.a.ln() - n as f64 * (1.0 - inp.delta).ln()
        + inp.b.ln()
        + n as f64 * inp.delta.ln();
    Ok(ln / inp.gamma)
}

/// Lower barrier `u = delta v + (1 - delta) rho - C`.
pub struct LowerBarrier<'a> {
    pub rho: &'a TorusField,
    pub delta: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `max (MA(phi) - a MA(v) - b f)`.
    pub max_violation: f64,
    pub violation_points: usize,
    pub hypothesis_holds: bool,
    pub min_phi: f64,
    /// `max (u - phi)` for the supplied barrier.
    pub barrier_excess: Option<f64>,
    pub barrier_below: Option<bool>,
}

/// Pointwise check of `MA(phi) <= a MA(v) + b f` and of `u <= phi`.
pub fn comparison_verify(
    phi: &TorusField,
    v: &TorusField,
    f: &TorusField,
    a: f64,
    b: f64,
    barrier: Option<LowerBarrier<'_>>,
) -> Result<ComparisonReport> {
    phi.check_same_grid(v)?;
    phi.check_same_grid(f)?;
    let ma_phi = ma_density(phi).density;
    let ma_v = ma_density(v).density;
    let excess: Vec<f64> = (0..phi.values().len())
        .map(|i| ma_phi.values()[i] - a * ma_v.values()[i] - b * f.values()[i])
        .collect();
    let tol = 1e-12 * ma_phi.sup_abs().max(1.0);
    let max_violation = excess.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let violation_points = excess.iter().filter(|&&e| e > tol).count();
    let hypothesis_holds = violation_points == 0;
    let (barrier_excess, barrier_below) = match barrier {
        Some(bar) => {
            phi.check_same_grid(bar.rho)?;
            let mut m = f64::NEG_INFINITY;
            for i in 0..phi.values().len() {
                let u = bar.delta * v.values()[i] + (1.0 - bar.delta) * bar.rho.values()[i]
                    - bar.constant;
                m = m.max(u - phi.values()[i]);
            }
            (Some(m), Some(m <= 0.0))
        }
        None => (None, None),
    };
    Ok(ComparisonReport {
        max_violation,
        violation_points,
        hypothesis_holds,
        min_phi: phi.min(),
        barrier_excess,
        barrier_below,
    })
}

/// `x0 = log log 10`, the left end of the `b'` quadrature.
pub fn chi_x0() -> f64 {
    std::f64::consts::LN_10.ln()
}

/// `int_a^oo ds / h(s)`: squaring segments `[S, S^2]` in `s`, then a
/// geometric extrapolation of the remaining increments.
pub fn reciprocal_tail(h: &TailFunction, a: f64) -> Result<f64> {
    let mut lo = a;
    let mut total = 0.0;
    let mut prev_inc = f64::NAN;
    let mut ratio = f64::NAN;
    while lo.ln() < 300.0 {
        let hi = if lo < std::f64::consts::E {
            std::f64::consts::E
        } else {
            lo * lo
        };
        let inc = h.reciprocal_integral(lo, hi)?;
        total += inc;
        if inc <= 1e-17 * total {
            return Ok(total);
        }
        ratio = inc / prev_inc;
        prev_inc = inc;
        lo = hi;
    }
    if !(ratio < 0.9) {
        return Err(LabError::ConditionK(format!(
            "int ds / h does not settle (increment ratio {ratio:.3})"
        )));
    }
    Ok(total + prev_inc * ratio / (1.0 - ratio))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChiRow {
    pub y: f64,
    pub chi: f64,
    pub chi1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChiConstruction {
    pub h: TailFunction,
    pub alpha: f64,
    pub c: f64,
    pub n: u32,
    #[serde(rename = "B")]
    pub b: f64,
    /// `(2/c)^{1/n} / alpha`, the constant in `b'(x) h(x) = c'`.
    pub c_prime: f64,
    pub chi_prime_zero: f64,
    /// `alpha / (B h(B))`, the value printed alongside the construction.
    pub chi_prime_zero_stated: f64,
    /// `||chi||_oo` on `(-oo, 0]`, `c' int_{log B}^oo dx/h`.
    pub sup_norm: f64,
    /// `c' int_{x0}^oo dx/h`, a bound independent of `B`.
    pub sup_bound: f64,
    /// Tabulated `chi` on `y <= (B - log 10) / alpha`.
    pub table: Vec<ChiRow>,
    /// Smallest relative slack of `s chi'((B - s)/alpha) h(log s) >= (2/c)^{1/n}`.
    pub min_slack: f64,
    /// Largest relative gap between the spline derivative of the table and `chi'`.
    pub spline_derivative_error: f64,
    pub convex: bool,
    pub increasing: bool,
}

impl ChiConstruction {
    /// `chi'(y) = (2/c)^{1/n} / ((B - alpha y) h(log(B - alpha y)))`.
    pub fn chi_prime(&self, y: f64) -> Result<f64> {
        chi_prime(&self.h, self.alpha, self.c, self.n, self.b, y)
    }

    /// `chi(y) = -c' int_{log B}^{log(B - alpha y)} dx / h`, so `chi(0) = 0`.
    pub fn chi(&self, y: f64) -> Result<f64> {
        let x = (self.b - self.alpha * y).ln();
        Ok(-self.c_prime * signed_integral(&self.h, self.b.ln(), x)?)
    }
}

fn chi_prime(h: &TailFunction, alpha: f64, c: f64, n: u32, b: f64, y: f64) -> Result<f64> {
    let s = b - alpha * y;
    if s <= std::f64::consts::LN_10 {
        return Err(LabError::OutOfDomain(format!(
            "chi' needs B - alpha y > log 10, got {s}"
        )));
    }
    Ok((2.0 / c).powf(1.0 / n as f64) / (s * h.eval(s.ln())?))
}

fn signed_integral(h: &TailFunction, a: f64, b: f64) -> Result<f64> {
    if a <= b {
        h.reciprocal_integral(a, b)
    } else {
        Ok(-h.reciprocal_integral(b, a)?)
    }
}

/// Builds `chi` from `b'(x) = c'/h(x)`, picking `B` among `4, 8, 16, ...`
/// when it is not supplied.
pub fn construct_chi(
    h: &TailFunction,
    alpha: f64,
    c: f64,
    n: u32,
    b: Option<f64>,
) -> Result<ChiConstruction> {
    if !(alpha > 0.0 && c > 0.0) || n == 0 {
        return Err(LabError::InvalidInput(
            "alpha, c and n must be positive".into(),
        ));
    }
    if h.integral_verdict() == TailVerdict::Diverges {
        return Err(LabError::ConditionK("int ds / h(s) diverges".into()));
    }
    let x0 = chi_x0();
    let chi1_zero = |b: f64| chi_prime(h, alpha, c, n, b, 0.0);
    let smallest_ok = |start: f64| -> Result<f64> {
        let mut b = 4.0f64;
        while b < start {
            b *= 2.0;
        }
        while chi1_zero(b)? > 1.0 {
            b *= 2.0;
            if b > 1e300 {
                return Err(LabError::Infeasible("no B makes chi'(0) <= 1".into()));
            }
        }
        Ok(b)
    };
    let b = match b {
        Some(b) => {
            if !(b > std::f64::consts::LN_10) {
                return Err(LabError::InvalidInput(format!(
                    "B = {b} must exceed log 10"
                )));
            }
            let v = chi1_zero(b)?;
            if v > 1.0 {
                return Err(LabError::BTooSmall {
                    chi_prime_zero: v,
                    suggested_b: smallest_ok(b)?,
                });
            }
            b
        }
        None => smallest_ok(0.0)?,
    };
    let c_prime = (2.0 / c).powf(1.0 / n as f64) / alpha;
    let sup_norm = c_prime * reciprocal_tail(h, b.ln())?;
    let sup_bound = c_prime * reciprocal_tail(h, x0)?;
    let chi_prime_zero = chi1_zero(b)?;
    let h_of_b = h.eval(b)?;
    let mut out = ChiConstruction {
        h: h.clone(),
        alpha,
        c,
        n,
        b,
        c_prime,
        chi_prime_zero,
        chi_prime_zero_stated: alpha / (b * h_of_b),
        sup_norm,
        sup_bound,
        table: Vec::new(),
        min_slack: f64::INFINITY,
        spline_derivative_error: 0.0,
        convex: true,
        increasing: true,
    };

    // tabulate on s = B - alpha y, geometric in s from just above log 10
    let s_lo = std::f64::consts::LN_10 * (1.0 + 1e-6);
    let s_hi = b * 1e8;
    let count = 400;
    let mut rows = Vec::with_capacity(count);
    for k in 0..count {
        let s = s_hi * (s_lo / s_hi).powf(k as f64 / (count - 1) as f64);
        let y = (b - s) / alpha;
        rows.push(ChiRow {
            y,
            chi: out.chi(y)?,
            chi1: out.chi_prime(y)?,
        });
    }
    out.increasing =
        rows.windows(2).all(|w| w[1].chi >= w[0].chi) && rows.iter().all(|r| r.chi1 >= 0.0);
    out.convex = rows.windows(2).all(|w| w[1].chi1 >= w[0].chi1);
    let target = (2.0 / c).powf(1.0 / n as f64);
    for r in &rows {
        let s = b - alpha * r.y;
        let lhs = s * r.chi1 * h.eval(s.ln())?;
        out.min_slack = out.min_slack.min((lhs - target) / target);
    }
    let spline = MonotoneCubic::new(
        rows.iter().map(|r| r.y).collect(),
        rows.iter().map(|r| r.chi).collect(),
    )?;
    for r in &rows[1..rows.len() - 1] {
        let d = spline.derivative(r.y)?;
        out.spline_derivative_error = out.spline_derivative_error.max((d - r.chi1).abs() / r.chi1);
    }
    out.table = rows;
    Ok(out)
}

/// `beta_M(phi) = 1 / (1 + lambda e^{M (phi + M)})`.
pub fn beta_field(phi: &TorusField, lambda: f64, m: f64) -> TorusField {
    let ln_l = lambda.ln();
    phi.map(|p| {
        let x = ln_l + m * (p + m);
        if x > 0.0 {
            let e = (-x).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + x.exp())
        }
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaParams {
    pub lambda: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub delta: f64,
    pub c: f64,
    pub n: u32,
    /// Bound for `int h(-phi) f`.
    pub b_hy: f64,
    #[serde(default = "one")]
    pub v_omega: f64,
}

fn one() -> f64 {
    1.0
}

impl BetaParams {
    /// `delta^n / (3^n c^n)`.
    pub fn target(&self) -> f64 {
        (self.delta / (3.0 * self.c)).powi(self.n as i32)
    }

    /// The three selection inequalities, in order.
    pub fn selection(&self, h: &TailFunction) -> Result<Vec<ChainLink>> {
        let q = self.target();
        let hm = h.eval(self.m)?;
        let strict = ChainLink {
            name: "(i) 2/(1+lambda) < delta^n/(3^n c^n)".into(),
            lhs: 2.0 / (1.0 + self.lambda),
            rhs: q,
            slack: q - 2.0 / (1.0 + self.lambda),
            holds: 2.0 / (1.0 + self.lambda) < q,
        };
        Ok(vec![
            strict,
            ChainLink::new(
                "(ii) 2 B_HY/h(M) <= min(1, delta^n/(3^n c^n))",
                2.0 * self.b_hy / hm,
                q.min(1.0),
                0.0,
            ),
            ChainLink::new(
                "(iii) 2^n/3^n <= V/(1+lambda e^{-M^2})",
                (2.0f64 / 3.0).powi(self.n as i32),
                self.v_omega / (1.0 + self.lambda * (-self.m * self.m).exp()),
                0.0,
            ),
        ])
    }

    fn check_selection(&self, h: &TailFunction) -> Result<()> {
        if let Some(bad) = self.selection(h)?.into_iter().find(|l| !l.holds) {
            return Err(LabError::Infeasible(format!(
                "selection inequality {} fails: lhs {:.6e}, rhs {:.6e}",
                bad.name, bad.lhs, bad.rhs
            )));
        }
        Ok(())
    }
}

/// `int h(max(-phi, s_min)) f`, an upper bound for `int h(-phi) f`.
pub fn hy_integral(phi: &TorusField, f: &TorusField, h: &TailFunction) -> Result<f64> {
    phi.check_same_grid(f)?;
    let floor = match h.kind {
        TailKind::Power { .. } => f64::MIN_POSITIVE,
        _ => h.s_min.max(0.0),
    };
    let mut s = 0.0;
    for (p, fv) in phi.values().iter().zip(f.values()) {
        s += h.eval((-p).max(floor))? * fv;
    }
    Ok(s / phi.values().len() as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaBoundsReport {
    pub selection: Vec<ChainLink>,
    /// `int beta_M(phi) f`.
    pub integral: f64,
    /// `int_{phi <= -M} h(-phi) f`, which must not exceed `B_HY`.
    pub tail_hy: f64,
    pub upper: Vec<ChainLink>,
    pub lower: Vec<ChainLink>,
    pub all_hold: bool,
}

/// Evaluates `int beta f <= B/h(M) + 1/(1+lambda) <= delta^n/(3^n c^n)` and
/// `int beta f >= (1 - B/h(M))/(1 + lambda e^{M^2}) >= 1/(2(1 + lambda e^{M^2}))`.
pub fn beta_bounds_check(
    phi: &TorusField,
    f: &TorusField,
    p: &BetaParams,
    h: &TailFunction,
) -> Result<BetaBoundsReport> {
    phi.check_same_grid(f)?;
    if !(p.lambda > 0.0 && p.m > 0.0) {
        return Err(LabError::InvalidInput(
            "lambda and M must be positive".into(),
        ));
    }
    let selection = p.selection(h)?;
    p.check_selection(h)?;
    let len = phi.values().len() as f64;
    let beta = beta_field(phi, p.lambda, p.m);
    let integral = beta
        .values()
        .iter()
        .zip(f.values())
        .map(|(b, fv)| b * fv)
        .sum::<f64>()
        / len;
    let mean_f = f.mean();
    let tail_hy = phi
        .values()
        .iter()
        .zip(f.values())
        .filter(|(v, _)| **v <= -p.m)
        .map(|(v, fv)| h.eval(-v).map(|hv| hv * fv))
        .sum::<Result<f64>>()?
        / len;
    if tail_hy > p.b_hy * (1.0 + 1e-12) {
        return Err(LabError::Precondition(format!(
            "int_(phi <= -M) h(-phi) f = {tail_hy:.6e} exceeds B_HY = {:.6e}",
            p.b_hy
        )));
    }
    let hm = h.eval(p.m)?;
    let tol = 1e-12;
    let mid_upper = p.b_hy / hm + mean_f / (1.0 + p.lambda);
    let big = 1.0 + p.lambda * (p.m * p.m).exp();
    let mid_lower = (mean_f - p.b_hy / hm) / big;
    let upper = vec![
        ChainLink::new(
            "int beta f <= B/h(M) + 1/(1+lambda)",
            integral,
            mid_upper,
            tol,
        ),
        ChainLink::new(
            "B/h(M) + 1/(1+lambda) <= delta^n/(3^n c^n)",
            mid_upper,
            p.target(),
            tol,
        ),
    ];
    let lower = vec![
        ChainLink::new(
            "(1 - B/h(M))/(1+lambda e^{M^2}) <= int beta f",
            mid_lower,
            integral,
            tol,
        ),
        ChainLink::new(
            "1/(2(1+lambda e^{M^2})) <= (1 - B/h(M))/(1+lambda e^{M^2})",
            0.5 / big,
            mid_lower,
            tol,
        ),
    ];
    let all_hold = upper.iter().chain(&lower).all(|l| l.holds);
    Ok(BetaBoundsReport {
        selection,
        integral,
        tail_hy,
        upper,
        lower,
        all_hold,
    })
}

/// Doubling search `M = 1, 2, 4, ...` with the smallest `lambda` allowed by
/// the first selection inequality.
pub fn choose_lambda_m(
    delta: f64,
    c: f64,
    n: u32,
    b_hy: f64,
    v_omega: f64,
    h: &TailFunction,
) -> Result<(f64, f64)> {
    if !h.is_unbounded() {
        return Err(LabError::Infeasible(
            "h is bounded, so 2 B_HY / h(M) cannot be made small".into(),
        ));
    }
    let q = (delta / (3.0 * c)).powi(n as i32);
    let lambda = ((2.0 / q - 1.0) * (1.0 + 1e-12)).max(f64::MIN_POSITIVE);
    let mut m = 1.0;
    let mut last = None;
    while m <= 1024.0 {
        let p = BetaParams {
            lambda,
            m,
            delta,
            c,
            n,
            b_hy,
            v_omega,
        };
        match p.selection(h)?.into_iter().find(|l| !l.holds) {
            None => return Ok((lambda, m)),
            Some(l) => last = Some(l.name),
        }
        m *= 2.0;
    }
    Err(LabError::Infeasible(format!(
        "no M <= 1024 works; selection inequality {} fails",
        last.unwrap_or_default()
    )))
}
