//! Subcommand implementations. Each returns the text of its main output.

use std::f64::consts::PI;
use std::path::Path;

use ma_lab_core::envelope::{compute_envelope_with, reduction_check, EnvelopeOptions};
use ma_lab_core::error::LabError;
use ma_lab_core::grid::{TorusField, TorusGrid};
use ma_lab_core::operators::{check_conditions, domination_check, solve_g_equation, OperatorSpec};
use ma_lab_core::radial::{
    integrability_functional_log, inverse_profile, is_bounded_profile, ln_forward_density,
    read_profile_csv, rigidity_chain, DensityProfile, ProfileRow, RadialProfile,
};
use ma_lab_core::reduction::{
    beta_bounds_check, choose_lambda_m, construct_chi, hy_integral, trick_constant, BetaParams,
    TrickInputs,
};
use ma_lab_core::solver::{
    energy_chain_check, fmt_num, log_distance_field, moser_trace, osc_experiment, osc_rows_csv,
    skoda_scan, solve_ma_newton, solve_poisson_spectral, DensityFamily, MoserSchedule,
    NewtonOptions, OscExperiment,
};
use ma_lab_core::weights::TailFunction;
use ma_lab_core::weights::{
    check_condition_k, legendre_conjugate, luxembourg_norm, DensitySample, WeightFamily, WeightSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::error::{CliError, Required};

type Out = Result<String, CliError>;

fn to_json<T: Serialize>(v: &T) -> Out {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Domain(LabError::Io(e.to_string())))
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_num).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Prefixes I/O failures with the offending path.
fn at<T>(path: &Path, r: Result<T, LabError>) -> Result<T, CliError> {
    r.map_err(|e| match e {
        LabError::Io(m) => CliError::Domain(LabError::Io(format!("{}: {m}", path.display()))),
        other => CliError::Domain(other),
    })
}

fn read_field(path: &Path) -> Result<TorusField, CliError> {
    at(path, TorusField::read_binary(path))
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Domain(LabError::InvalidInput(msg.into()))
}

// ---------------------------------------------------------------------------
// Inputs
// ---------------------------------------------------------------------------

/// `(t, w)` rows of a two-column CSV; a non-numeric first line is a header.
fn read_table(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Domain(LabError::Io(format!("{}: {e}", path.display()))))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match cells.as_slice() {
            [a, b] => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some(r) => rows.push(r),
            None if i == 0 => {}
            None => {
                return Err(invalid(format!(
                    "{}: line {} is not 't,w'",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(rows)
}

fn weight(
    family: Option<&str>,
    p: Option<f64>,
    n: Option<u32>,
    table: Option<&Path>,
) -> Result<WeightSpec, CliError> {
    let family: WeightFamily = family.required("family")?.parse()?;
    let spec = if family == WeightFamily::Tabulated {
        WeightSpec::tabulated(read_table(table.required("table")?)?)?
    } else {
        WeightSpec::named(family, p.unwrap_or(1.0), n.unwrap_or(1))
    };
    spec.validate()?;
    Ok(spec)
}

fn profile(name: Option<&str>, csv: Option<&Path>, n: u32) -> Result<RadialProfile, CliError> {
    Ok(match csv {
        Some(path) => RadialProfile::sampled(&at(path, read_profile_csv(path))?, n)?,
        None => RadialProfile::named(name.unwrap_or("triple-log"), n)?,
    })
}

fn named_density(name: &str, n: u32) -> Result<DensityProfile, CliError> {
    let nf = n as f64;
    Ok(match name.to_ascii_lowercase().as_str() {
        "exp-nt" | "expnt" => DensityProfile::from_log_moment(n, move |t| 2.0 * nf * t),
        other => DensityProfile::of_profile(&RadialProfile::named(other, n)?),
    })
}

fn grid(
    n: Option<usize>,
    size: Option<usize>,
    size1: usize,
    size2: usize,
) -> Result<TorusGrid, CliError> {
    let n = n.unwrap_or(1);
    Ok(TorusGrid::new(
        n,
        size.unwrap_or(if n == 1 { size1 } else { size2 }),
    )?)
}

/// `sum_j a_j cos(2 pi k_j . x + theta_j)` with `sum |a_j| = amplitude` and `0 < |k_j|_oo <= 2`.
pub fn trig_field(
    grid: TorusGrid,
    rng: &mut ChaCha8Rng,
    modes: usize,
    amplitude: f64,
) -> TorusField {
    let dims = grid.dims();
    let mut terms = Vec::with_capacity(modes);
    for _ in 0..modes {
        let k = loop {
            let k: Vec<f64> = (0..dims).map(|_| rng.gen_range(-2i32..=2) as f64).collect();
            if k.iter().any(|&v| v != 0.0) {
                break k;
            }
        };
        terms.push((k, rng.gen_range(0.5..1.0), rng.gen_range(0.0..2.0 * PI)));
    }
    let total: f64 = terms.iter().map(|t| t.1).sum();
    let scale = if total > 0.0 { amplitude / total } else { 0.0 };
    TorusField::from_fn(grid, |x| {
        terms
            .iter()
            .map(|(k, a, th)| {
                scale * a * (2.0 * PI * k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + th).cos()
            })
            .sum()
    })
}

/// `1 + trig_field`, normalized to mean 1.
pub fn random_density(
    grid: TorusGrid,
    seed: u64,
    modes: Option<usize>,
    amplitude: Option<f64>,
) -> Result<TorusField, CliError> {
    let amplitude = amplitude.unwrap_or(0.5);
    if !(0.0..1.0).contains(&amplitude) {
        return Err(invalid(format!(
            "density amplitude must lie in [0, 1), got {amplitude}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = trig_field(grid, &mut rng, modes.unwrap_or(3), amplitude).map(|v| 1.0 + v);
    let m = f.mean();
    Ok(f.map(|v| v / m))
}

fn density_field(
    path: Option<&Path>,
    seed: u64,
    g: impl FnOnce() -> Result<TorusGrid, CliError>,
    modes: Option<usize>,
    amplitude: Option<f64>,
) -> Result<TorusField, CliError> {
    match path {
        Some(p) => Ok(read_field(p)?),
        None => random_density(g()?, seed, modes, amplitude),
    }
}

/// Solution of `MA(phi) = f` with `sup phi = 0`.
fn potential(f: &TorusField) -> Result<TorusField, CliError> {
    if f.grid().n() == 1 {
        Ok(solve_poisson_spectral(f)?)
    } else {
        Ok(solve_ma_newton(f, &NewtonOptions::for_dim(f.grid().n()), None)?.0)
    }
}

fn tail_power(e: f64) -> Result<TailFunction, CliError> {
    if !e.is_finite() || e < 0.0 {
        return Err(invalid(format!(
            "tail exponent must be finite and >= 0, got {e}"
        )));
    }
    Ok(TailFunction::power(e))
}

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

pub fn weight_check(a: &WeightArgs) -> Out {
    let spec = weight(a.family.as_deref(), a.p, a.n, a.table.as_deref())?;
    let report = check_condition_k(&spec)?;
    let mut lines = vec![
        format!("{:?}", report.verdict),
        format!("weight={}", spec.name()),
        format!("convex={}", report.convex),
    ];
    match &report.tail {
        Some(tail) => {
            let kind = serde_json::to_value(&tail.kind)
                .ok()
                .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(String::from));
            lines.push(format!("tail_kind={}", kind.unwrap_or_default()));
            lines.push(format!("tail_s_min={}", fmt_num(tail.s_min)));
            lines.push(format!("tail_increasing={}", tail.increasing));
            for s in [10.0, 100.0, 1000.0] {
                lines.push(format!("tail_h({s})={}", fmt_num(tail.eval(s)?)));
            }
            lines.push(format!("tail_integral={:?}", tail.integral_verdict()));
            let incs = tail.tail_increments(16.0, 120)?;
            let last = incs.increments.last().map(|i| i.1).unwrap_or(f64::NAN);
            lines.push(format!("tail_last_increment={}", fmt_num(last)));
            lines.push(format!(
                "tail_threshold={}",
                incs.threshold.map(fmt_num).unwrap_or_else(|| "none".into())
            ));
        }
        None => lines.push("tail_kind=none".into()),
    }
    Ok(lines.join("\n") + "\n")
}

pub fn lux_norm(a: &LuxNormArgs) -> Out {
    let path = a.density.as_deref().required("density")?;
    let f = at(path, DensitySample::read_csv(path))?;
    let spec = weight(
        Some(a.family.as_deref().unwrap_or("powerp")),
        a.p,
        a.n,
        a.table.as_deref(),
    )?;
    Ok(fmt_num(luxembourg_norm(&f, &spec)?) + "\n")
}

pub fn legendre(a: &LegendreArgs) -> Out {
    let spec = weight(a.family.as_deref(), a.p, a.n, a.table.as_deref())?;
    let s_max = match a.s_max {
        Some(s) => s,
        None => spec.derivative(10f64.min(spec.t_max()))?,
    };
    let points = a.points.unwrap_or(11);
    if points < 2 || !(s_max > 0.0) {
        return Err(invalid("need at least 2 slopes and s_max > 0"));
    }
    let ss: Vec<f64> = (0..points)
        .map(|j| s_max * j as f64 / (points - 1) as f64)
        .collect();
    let table = legendre_conjugate(&spec, &ss)?;
    let rows = (0..points).map(|j| vec![table.s[j], table.values[j], table.argmax[j]]);
    Ok(csv_text(&["s", "w_star", "argmax"], rows))
}

// ---------------------------------------------------------------------------
// Radial
// ---------------------------------------------------------------------------

fn sigma_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if points < 2 || !(hi > lo) {
        return Err(invalid("need at least 2 points and sigma_max > sigma_min"));
    }
    Ok((0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect())
}

pub fn radial_forward(a: &RadialForwardArgs) -> Out {
    let n = a.n.unwrap_or(2);
    let p = profile(a.profile.as_deref(), a.profile_csv.as_deref(), n)?;
    let mut rows = Vec::new();
    for sigma in sigma_grid(
        a.sigma_min.unwrap_or(0.0),
        a.sigma_max.unwrap_or(10.0),
        a.points.unwrap_or(11),
    )? {
        let t = -sigma.exp();
        rows.push(vec![sigma, t, ln_forward_density(&p, t)?]);
    }
    Ok(csv_text(&["sigma", "t", "ln_density"], rows))
}

pub fn radial_inverse(a: &RadialInverseArgs) -> Out {
    let n = a.n.unwrap_or(2);
    let chi = inverse_profile(&named_density(
        a.density.as_deref().required("density")?,
        n,
    )?)?;
    let (lo, hi, points) = (
        a.sigma_min.unwrap_or(-1.0),
        a.sigma_max.unwrap_or(5.0),
        a.points.unwrap_or(13),
    );
    sigma_grid(lo, hi, points)?;
    let rows = chi.sample(lo, hi, points)?;
    let rows = rows
        .iter()
        .rev()
        .map(|r: &ProfileRow| vec![r.t, r.chi, r.chi1, r.chi2]);
    Ok(csv_text(&["t", "chi", "chi1", "chi2"], rows))
}

pub fn radial_integrability(a: &RadialIntegrabilityArgs) -> Out {
    let n = a.n.unwrap_or(2);
    let p = profile(a.profile.as_deref(), a.profile_csv.as_deref(), n)?;
    let limit = p.sigma_limit();
    let sigma = a.sigma_cut.unwrap_or(if limit.is_finite() {
        limit / 8.0
    } else {
        600.0
    });
    let report =
        integrability_functional_log(&p, &tail_power(a.h_exponent.unwrap_or(0.5))?, sigma)?;
    to_json(&json!({ "n": n, "sigma_cut": sigma, "report": report }))
}

pub fn rigidity(a: &RigidityArgs) -> Out {
    let n = a.n.unwrap_or(2);
    let prof = profile(a.profile.as_deref(), a.profile_csv.as_deref(), n)?;
    let p = a.p.unwrap_or(n as f64);
    let sigma = a.sigma_cut.unwrap_or(10.0);
    let report = rigidity_chain(&prof, p, -sigma.exp())?;
    let bounded = is_bounded_profile(&prof)?;
    to_json(
        &json!({ "n": n, "p": p, "sigma_cut": sigma, "rigidity": report, "boundedness": bounded }),
    )
}

// ---------------------------------------------------------------------------
// Reduction
// ---------------------------------------------------------------------------

pub fn construct_chi_cmd(a: &ConstructChiArgs) -> Out {
    let h = tail_power(a.h_exponent.unwrap_or(2.0))?;
    let chi = construct_chi(
        &h,
        a.alpha.unwrap_or(1.0),
        a.c.unwrap_or(1.0),
        a.n.unwrap_or(1),
        a.b,
    )?;
    let mut v =
        serde_json::to_value(&chi).map_err(|e| CliError::Domain(LabError::Io(e.to_string())))?;
    if !a.with_table {
        if let Some(m) = v.as_object_mut() {
            m.remove("table");
        }
    }
    to_json(&v)
}

pub fn trick_constant_cmd(a: &TrickConstantArgs) -> Out {
    let inp = TrickInputs {
        a: a.a.required("a")?,
        b: a.b.required("b")?,
        delta: a.delta.required("delta")?,
        gamma: a.gamma.required("gamma")?,
        c1: a.c1.required("c1")?,
        fp_norm: a.fp_norm.required("fp-norm")?,
        n: a.n.unwrap_or(1),
    };
    let constant = trick_constant(&inp)?;
    to_json(&json!({ "lambda": inp.lambda(), "constant": constant }))
}

pub fn beta_bounds(a: &BetaBoundsArgs, seed: u64) -> Out {
    let f = density_field(
        a.density.as_deref(),
        seed,
        || grid(a.n, a.size, 32, 8),
        a.modes,
        a.amplitude,
    )?;
    let phi = potential(&f)?.map(|v| a.scale.unwrap_or(3.0) * v);
    let h = tail_power(a.h_exponent.unwrap_or(2.0))?;
    let n = f.grid().n() as u32;
    let (delta, c, v_omega) = (
        a.delta.unwrap_or(1.0),
        a.c.unwrap_or(1.0),
        a.v_omega.unwrap_or(1.0),
    );
    let b_hy = hy_integral(&phi, &f, &h)?.max(1e-3);
    let (lambda, m) = match (a.lambda, a.m) {
        (Some(l), Some(m)) => (l, m),
        (None, None) => choose_lambda_m(delta, c, n, b_hy, v_omega, &h)?,
        _ => {
            return Err(CliError::Usage(
                "give both --lambda and --m, or neither".into(),
            ))
        }
    };
    let params = BetaParams {
        lambda,
        m,
        delta,
        c,
        n,
        b_hy,
        v_omega,
    };
    let report = beta_bounds_check(&phi, &f, &params, &h)?;
    to_json(&json!({ "params": params, "report": report }))
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

pub fn solve_ma(a: &SolveMaArgs, seed: u64) -> Out {
    let f = density_field(
        a.density.as_deref(),
        seed,
        || grid(a.n, a.size, 32, 8),
        a.modes,
        a.amplitude,
    )?;
    let mut opts = NewtonOptions::for_dim(f.grid().n());
    if let Some(t) = a.tol {
        opts.tol = t;
    }
    if let Some(m) = a.max_iter {
        opts.max_iter = m;
    }
    let (phi, report) = solve_ma_newton(&f, &opts, None)?;
    if let Some(path) = &a.phi_out {
        phi.write_binary(path)?;
    }
    to_json(&json!({ "n": f.grid().n(), "size": f.grid().size(), "report": report }))
}

fn given_or_solved(
    phi: Option<&Path>,
    seed: u64,
    g: impl FnOnce() -> Result<TorusGrid, CliError>,
    modes: Option<usize>,
    amplitude: Option<f64>,
) -> Result<TorusField, CliError> {
    match phi {
        Some(p) => Ok(read_field(p)?),
        None => potential(&random_density(g()?, seed, modes, amplitude)?),
    }
}

pub fn moser_trace_cmd(a: &MoserTraceArgs, seed: u64) -> Out {
    let phi = given_or_solved(
        a.phi.as_deref(),
        seed,
        || grid(Some(a.n.unwrap_or(2)), a.size, 32, 8),
        a.modes,
        a.amplitude,
    )?;
    let phi = if a.phi.is_some() {
        phi
    } else {
        phi.with_sup(-1.0)
    };
    let sn = a.schedule_n.unwrap_or((phi.grid().n() as u32).max(2));
    let schedule = MoserSchedule::new(sn, a.p.unwrap_or(3.0))?;
    let trace = moser_trace(&phi, &schedule, a.steps.unwrap_or(20))?;
    let rows = trace
        .steps
        .iter()
        .map(|&(k, r, v)| vec![k as f64, r, v, (trace.sup_norm - v) / trace.sup_norm]);
    Ok(fix_index_column(csv_text(
        &["k", "r", "norm", "relative_gap"],
        rows,
    )))
}

/// Writes the integer first column without a decimal point.
fn fix_index_column(csv: String) -> String {
    csv.lines()
        .map(|l| match l.split_once(',') {
            Some((k, rest)) => match k.parse::<f64>() {
                Ok(v) => format!("{},{rest}", v as u64),
                Err(_) => l.to_string(),
            },
            None => l.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

pub fn energy_check(a: &EnergyCheckArgs, seed: u64) -> Out {
    let f = density_field(
        a.density.as_deref(),
        seed,
        || grid(a.n, a.size, 32, 8),
        a.modes,
        a.amplitude,
    )?;
    let phi = match &a.phi {
        Some(p) => read_field(p)?,
        None => potential(&f)?.with_sup(-1.0),
    };
    to_json(&energy_chain_check(&phi, &f, a.r.unwrap_or(1.0))?)
}

pub fn skoda(a: &SkodaArgs) -> Out {
    let phi = match &a.phi {
        Some(p) => read_field(p)?,
        None => {
            let g = grid(a.n, a.size, 64, 16)?;
            let center = match &a.center {
                Some(c) if c.len() == g.dims() => c.clone(),
                Some(c) => {
                    return Err(invalid(format!(
                        "center needs {} coordinates, got {}",
                        g.dims(),
                        c.len()
                    )))
                }
                None => vec![0.5 / g.size() as f64; g.dims()],
            };
            log_distance_field(g, &center)
        }
    };
    let alphas = a
        .alphas
        .clone()
        .unwrap_or_else(|| vec![0.5, 1.0, 1.5, 2.0, 2.5]);
    to_json(&skoda_scan(&phi, &alphas, a.cap.unwrap_or(1e6))?)
}

pub fn osc(a: &OscExperimentArgs) -> Out {
    let weights = match &a.weights {
        Some(ws) => ws
            .iter()
            .map(|w| w.resolve().map_err(invalid))
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![WeightSpec::power(2.0), WeightSpec::log(2.0, 1)],
    };
    for w in &weights {
        w.validate()?;
    }
    let eps = a.eps.clone().unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3]);
    let n = a.n.unwrap_or(1);
    let family = DensityFamily {
        a: a.a.unwrap_or(0.4),
    };
    let exp = OscExperiment {
        family: &family,
        eps_grid: &eps,
        weights: &weights,
        p: a.p.unwrap_or(f64::INFINITY),
        n,
        base_size: a.base_size.unwrap_or(if n == 1 { 32 } else { 8 }),
    };
    let rows = osc_experiment(&exp);
    for r in &rows {
        if let Some(e) = &r.error {
            eprintln!("warning: eps = {}: {e}", fmt_num(r.eps));
        }
    }
    Ok(osc_rows_csv(&rows, &weights)?)
}

// ---------------------------------------------------------------------------
// Envelope and operators
// ---------------------------------------------------------------------------

pub fn envelope(a: &EnvelopeArgs, seed: u64) -> Out {
    let h = match &a.obstacle {
        Some(p) => read_field(p)?,
        None => {
            let g = grid(a.n, a.size, 16, 8)?;
            trig_field(
                g,
                &mut ChaCha8Rng::seed_from_u64(seed),
                a.modes.unwrap_or(3),
                a.amplitude.unwrap_or(0.1),
            )
        }
    };
    let mut opts = EnvelopeOptions::default();
    if let Some(t) = a.tol {
        opts.tol = t;
    }
    if let Some(m) = a.max_sweeps {
        opts.max_sweeps = m;
    }
    let result = compute_envelope_with(&h, &opts)?;
    if let Some(psi) = &a.psi_out {
        let sidecar = a
            .sidecar
            .clone()
            .unwrap_or_else(|| psi.with_extension("json"));
        result.write(psi, &sidecar)?;
    }
    to_json(
        &json!({ "summary": result.summary(), "complementarity_holds": result.complementarity_holds() }),
    )
}

pub fn reduction(a: &ReductionCheckArgs, seed: u64) -> Out {
    let f = density_field(
        a.density.as_deref(),
        seed,
        || grid(Some(1), a.size, 16, 16),
        a.modes,
        a.amplitude,
    )?;
    let spec = match &a.operator {
        Some(o) => o.spec().map_err(invalid)?,
        None => OperatorSpec::arithmetic(1),
    };
    let g_tol = a.g_tol.unwrap_or(1e-8);
    let sol = solve_g_equation(&spec, &f, g_tol)?;
    let report = reduction_check(
        &sol.phi,
        &spec,
        a.delta.unwrap_or(spec.delta),
        sol.c,
        &f,
        g_tol,
    )?;
    to_json(&report)
}

pub fn operator_check(a: &OperatorCheckArgs, seed: u64) -> Out {
    let spec = a
        .operator
        .as_ref()
        .required("operator")?
        .spec()
        .map_err(invalid)?;
    to_json(&check_conditions(&spec, a.samples.unwrap_or(2000), seed)?)
}

pub fn domination(a: &DominationArgs, seed: u64) -> Out {
    let (phi, psi) = match (&a.phi, &a.psi) {
        (Some(p), Some(q)) => (read_field(p)?, read_field(q)?),
        _ => {
            let g = grid(a.n, a.size, 32, 8)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (modes, amp) = (a.modes.unwrap_or(3), a.amplitude.unwrap_or(0.005));
            let phi = trig_field(g, &mut rng, modes, amp);
            (phi, trig_field(g, &mut rng, modes, amp))
        }
    };
    let spec = match &a.operator {
        Some(o) => o.spec().map_err(invalid)?,
        None => OperatorSpec::arithmetic(phi.grid().n()),
    };
    to_json(&domination_check(&phi, &psi, &spec, a.c.unwrap_or(0.5))?)
}
