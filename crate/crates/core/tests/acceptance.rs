//! Acceptance suite: one PASS/FAIL line per criterion, with runtimes.
//!
//! Runs without the libtest harness so criteria execute sequentially and
//! their timings are not distorted by parallel tests.

use std::f64::consts::PI;
use std::time::Instant;

use ma_lab_core::envelope::{compute_envelope, reduction_check, sup_bound_check};
use ma_lab_core::grid::{ma_density, TorusField, TorusGrid};
use ma_lab_core::operators::*;
use ma_lab_core::radial::*;
use ma_lab_core::reduction::{beta_bounds_check, choose_lambda_m, hy_integral, BetaParams};
use ma_lab_core::solver::*;
use ma_lab_core::weights::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one criterion. `gaps` lists sub-checks that fail for a
/// documented, structural reason; they print as FAIL but do not abort.
struct Outcome {
    failures: Vec<String>,
    gaps: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
            gaps: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }
}

fn fourier_field(grid: TorusGrid, rng: &mut ChaCha8Rng, modes: usize, amp: f64) -> TorusField {
    let dims = grid.dims();
    let modes: Vec<(Vec<i32>, f64, f64)> = (0..modes)
        .map(|_| {
            let k = (0..dims).map(|_| rng.gen_range(-2..=2)).collect();
            (k, rng.gen_range(-amp..amp), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    TorusField::from_fn(grid, |x| {
        modes
            .iter()
            .map(|(k, a, ph)| {
                a * (2.0 * PI * k.iter().zip(x).map(|(kk, xx)| *kk as f64 * xx).sum::<f64>() + ph)
                    .cos()
            })
            .sum()
    })
}

fn unit_mean_density(grid: TorusGrid, rng: &mut ChaCha8Rng) -> TorusField {
    let raw = fourier_field(grid, rng, 4, 0.1).map(|v| 1.0 + v);
    let m = raw.mean();
    raw.map(|v| v / m)
}

fn random_sample(rng: &mut ChaCha8Rng) -> DensitySample {
    let len = rng.gen_range(1..20);
    let values: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..5.0)).collect();
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut masses: Vec<f64> = raw.iter().map(|m| m / total).collect();
    let head: f64 = masses[..len - 1].iter().sum();
    masses[len - 1] = 1.0 - head;
    DensitySample::new(values, masses).unwrap()
}

fn named_weights() -> Vec<WeightSpec> {
    vec![
        WeightSpec::power(1.5),
        WeightSpec::power(2.0),
        WeightSpec::power(3.0),
        WeightSpec::log(1.0, 1),
        WeightSpec::log(3.0, 2),
        WeightSpec::loglog(2.0, 1),
        WeightSpec::loglog(3.0, 2),
    ]
}

fn k_classification() -> Outcome {
    let mut out = Outcome::new();
    let mut probes = 0;
    let mut verdict = |spec: WeightSpec, satisfies: bool| {
        probes += 1;
        let want = if satisfies {
            KVerdict::SatisfiesK
        } else {
            KVerdict::FailsK
        };
        let got = check_condition_k(&spec).map(|r| r.verdict);
        (
            got.as_ref().ok() == Some(&want),
            format!("{} gave {got:?}", spec.name()),
        )
    };
    let mut results = Vec::new();
    for p in [0.5, 1.0, 1.5, 2.0] {
        results.push(verdict(WeightSpec::power(p), p > 1.0));
    }
    for n in 1..=3u32 {
        let nf = n as f64;
        for p in [nf - 1.0, nf, nf + 0.5, nf + 1.0] {
            results.push(verdict(WeightSpec::log(p, n), p > nf));
            results.push(verdict(WeightSpec::loglog(p, n), p > nf));
        }
    }
    let wrong: Vec<String> = results
        .into_iter()
        .filter(|(ok, _)| !ok)
        .map(|(_, m)| m)
        .collect();
    out.note(format!("{probes} probes, {} misclassified", wrong.len()));
    for w in wrong {
        out.check(false, w);
    }
    out
}

fn luxembourg() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let f = random_sample(&mut rng);
        let p = rng.gen_range(1.0..4.0);
        let exact = f.integral(|v| v.powf(p)).powf(1.0 / p);
        let norm = luxembourg_norm(&f, &WeightSpec::power(p)).unwrap();
        worst = worst.max((norm - exact).abs() / exact);
    }
    out.check(worst <= 1e-8, format!("closed-form deviation {worst:e}"));
    out.note(format!("closed forms within {worst:.1e}"));
    let weights = named_weights();
    let (mut homog, mut mono) = (0, 0);
    for _ in 0..1000 {
        let f = random_sample(&mut rng);
        let w = &weights[rng.gen_range(0..weights.len())];
        let s = rng.gen_range(0.01..100.0);
        let a = luxembourg_norm(&f, w).unwrap();
        let b = luxembourg_norm(&f.scaled(s), w).unwrap();
        if (b - s * a).abs() > 1e-8 * (s * a).max(1e-300) {
            homog += 1;
        }
        let bumped: Vec<f64> = f
            .values()
            .iter()
            .map(|v| v + rng.gen_range(0.0..1.0))
            .collect();
        let g = DensitySample::new(bumped, f.masses().to_vec()).unwrap();
        if a > luxembourg_norm(&g, w).unwrap() + 1e-10 {
            mono += 1;
        }
    }
    out.check(homog == 0, format!("{homog} homogeneity failures"));
    out.check(mono == 0, format!("{mono} monotonicity failures"));
    out.note("1000 homogeneity and 1000 monotonicity cases");
    out
}

fn conjugation() -> Outcome {
    let mut out = Outcome::new();
    let (mut young, mut bic) = (f64::INFINITY, 0.0f64);
    for w in named_weights() {
        let t_max = 10.0;
        let s_max = w.derivative(t_max).unwrap();
        let ss: Vec<f64> = (0..200).map(|j| s_max * j as f64 / 199.0).collect();
        let conj = legendre_conjugate(&w, &ss).unwrap();
        for i in 0..200 {
            let t = t_max * i as f64 / 199.0;
            let wt = w.eval(t).unwrap();
            for (s, ws) in ss.iter().zip(&conj.values) {
                young = young.min(wt + ws - s * t);
            }
        }
        let dense: Vec<f64> = (0..=100_000)
            .map(|j| s_max * j as f64 / 100_000.0)
            .collect();
        let conj = legendre_conjugate(&w, &dense).unwrap();
        let ts: Vec<f64> = (0..=100).map(|i| t_max * i as f64 / 100.0).collect();
        for (t, b) in ts.iter().zip(conj.biconjugate(&ts)) {
            let exact = w.eval(*t).unwrap();
            bic = bic.max((b - exact).abs() / exact.max(1.0));
        }
    }
    out.check(young >= -1e-8, format!("Young slack {young:e}"));
    out.check(bic <= 1e-6, format!("biconjugacy deviation {bic:e}"));
    out.note(format!(
        "min Young slack {young:.1e}, biconjugacy {bic:.1e}"
    ));
    out
}

fn radial_round_trip() -> Outcome {
    let mut out = Outcome::new();
    let mut worst = 0.0f64;
    for n in [1u32, 2] {
        let nf = n as f64;
        let densities = [
            DensityProfile::of_profile(&RadialProfile::exponential(n)),
            DensityProfile::of_profile(&RadialProfile::triple_log(n)),
            DensityProfile::from_log_moment(n, move |t| 2.0 * nf * t),
        ];
        for f in densities {
            let chi = inverse_profile(&f).unwrap();
            for k in 0..=12 {
                let t = -(-1.0 + 0.5 * k as f64).exp();
                let back = forward_density(&chi, t).unwrap();
                worst = worst.max((back / f.eval(t) - 1.0).abs());
            }
        }
    }
    out.check(worst < 1e-4, format!("round-trip deviation {worst:e}"));
    let r = integrability_functional(
        &RadialProfile::triple_log(2),
        &TailFunction::power(0.5),
        -(600f64.exp()),
    )
    .unwrap();
    let change = (r.doubled[0] - r.value).abs() / r.value;
    out.check(
        r.verdict == Convergence::Converged && change < 1e-3,
        format!("triple-log verdict {:?}", r.verdict),
    );
    out.note(format!(
        "round trip within {worst:.1e}, triple-log h = s^(1/2) {:?} (doubling change {change:.1e})",
        r.verdict
    ));
    out
}

fn moser() -> Outcome {
    let mut out = Outcome::new();
    let sched = MoserSchedule::new(2, 3.0).unwrap();
    let r = sched.exponents(45);
    out.check(
        (r[0] - 2.0).abs() < 1e-15 && (r[1] - 14.0 / 3.0).abs() < 1e-14,
        format!("r_0 = {}, r_1 = {}", r[0], r[1]),
    );
    let dev40 = r[40] / r[39] - 4.0 / 3.0;
    // r_k / r_{k-1} - 4/3 = 2 / r_{k-1} exactly, so the deviation is set by r_39
    out.check((dev40 - 2.0 / r[39]).abs() < 1e-12, "ratio identity");
    let first_ok = (1..=45)
        .find(|&k| (r[k] / r[k - 1] - 4.0 / 3.0).abs() < 1e-6)
        .unwrap();
    if dev40.abs() >= 1e-6 {
        out.gaps.push(format!(
            "ratio - 4/3 = {dev40:.2e} at k = 40; below 1e-6 from k = {first_ok}"
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let grid = TorusGrid::new(2, 8).unwrap();
    let mut worst_gap = 0.0f64;
    // the traced fields are potentials of random densities, normalized to sup = -1
    for _ in 0..20 {
        let f = unit_mean_density(grid, &mut rng);
        let phi = solve_ma_newton(&f, &NewtonOptions::for_dim(2), None)
            .unwrap()
            .0
            .with_sup(-1.0);
        let t = moser_trace(&phi, &sched, 45).unwrap();
        out.check(t.monotone, "norm trace not monotone");
        for &(_, rk, v) in &t.steps {
            if rk > 1e3 {
                worst_gap = worst_gap.max((t.sup_norm - v) / t.sup_norm);
            }
        }
    }
    out.check(
        worst_gap <= 5e-3,
        format!("gap to sup norm {worst_gap:e} once r_k > 1e3"),
    );
    out.note(format!(
        "r_0 = 2, r_1 = 14/3, 20 potential traces monotone, gap {worst_gap:.1e} once r_k > 1e3"
    ));
    out
}

fn solver() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = TorusGrid::new(1, 32).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let f = unit_mean_density(grid, &mut rng);
        let exact = solve_poisson_spectral(&f).unwrap();
        let (phi, _) = solve_ma_newton(&f, &NewtonOptions::for_dim(1), None).unwrap();
        worst = worst.max(exact.zip_with(&phi, |a, b| a - b).unwrap().sup_abs());
    }
    out.check(worst < 1e-10, format!("n = 1 deviation {worst:e}"));

    let grid = TorusGrid::new(2, 16).unwrap();
    let star = TorusField::from_fn(grid, |x| {
        0.012 * (2.0 * PI * (x[0] + x[3])).cos()
            + 0.01 * (2.0 * PI * x[2]).sin() * (2.0 * PI * x[1]).cos()
            - 0.008 * (2.0 * PI * (x[1] - x[2])).sin()
    });
    let f = ma_density(&star).density;
    let f = f.map(|v| v / f.mean());
    let (phi, _) = solve_ma_newton(
        &f,
        &NewtonOptions {
            tol: 1e-10,
            max_iter: 30,
        },
        None,
    )
    .unwrap();
    let recovery = phi.zip_with(&star, |a, b| a - b).unwrap().osc();
    out.check(recovery < 1e-6, format!("n = 2 recovery {recovery:e}"));

    let mut slacks = Vec::new();
    for size in [32, 64, 128] {
        let grid = TorusGrid::new(1, size).unwrap();
        let f = TorusField::from_fn(grid, |x| 1.0 + 0.3 * (2.0 * PI * x[0]).cos());
        let phi = solve_poisson_spectral(&f).unwrap().with_sup(-1.0);
        slacks.push(energy_chain_check(&phi, &f, 1.0).unwrap().slack.abs());
    }
    let order = (slacks[1] / slacks[2]).log2();
    out.check(order >= 1.7, format!("energy slack order {order:.2}"));
    out.note(format!(
        "n = 1 within {worst:.1e}, n = 2 recovery {recovery:.1e}, energy order {order:.2}"
    ));
    out
}

/// Dense primal-dual active-set solve of the n = 1 obstacle problem.
fn active_set_oracle(h: &TorusField) -> Vec<f64> {
    let g = *h.grid();
    let m = g.len();
    let h2 = g.spacing() * g.spacing();
    let mut lap = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        lap[(i, i)] = -1.0 / h2;
        for axis in 0..2 {
            for d in [-1, 1] {
                lap[(i, g.shift(i, axis, d))] += 1.0 / (4.0 * h2);
            }
        }
    }
    let hv = DVector::from_column_slice(h.values());
    let mut active = vec![true; m];
    let mut psi = hv.clone();
    for _ in 0..200 {
        let mut a = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for i in 0..m {
            if active[i] {
                a[(i, i)] = 1.0;
                rhs[i] = hv[i];
            } else {
                a.set_row(i, &lap.row(i));
                rhs[i] = -1.0;
            }
        }
        psi = a.lu().solve(&rhs).expect("nonsingular active-set system");
        let w = lap.clone() * &psi + DVector::from_element(m, 1.0);
        let next: Vec<bool> = (0..m)
            .map(|i| {
                if active[i] {
                    w[i] + (psi[i] - hv[i]) > 0.0
                } else {
                    psi[i] - hv[i] > 0.0
                }
            })
            .collect();
        if next == active {
            break;
        }
        active = next;
    }
    psi.iter().copied().collect()
}

fn envelope() -> Outcome {
    let mut out = Outcome::new();
    let grid = TorusGrid::new(1, 16).unwrap();
    let h = TorusField::from_fn(grid, |x| {
        0.15 * (4.0 * PI * x[0]).cos()
            + 0.05 * (2.0 * PI * x[1]).sin()
            + 0.2 * (-((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)) / 0.01).exp()
    });
    let env = compute_envelope(&h).unwrap();
    let oracle = active_set_oracle(&h);
    let dev = env
        .psi
        .values()
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.check(dev < 1e-8, format!("oracle deviation {dev:e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let grid = TorusGrid::new(1, 32).unwrap();
    let mut worst_mass = 0.0f64;
    for _ in 0..20 {
        let h = fourier_field(grid, &mut rng, 5, 0.1);
        let env = compute_envelope(&h).unwrap();
        worst_mass = worst_mass.max(env.off_contact_mass / env.total_mass);
        out.check(
            env.psi
                .values()
                .iter()
                .zip(h.values())
                .all(|(p, hh)| p <= hh),
            "envelope above obstacle",
        );
        let again = compute_envelope(&env.psi).unwrap().psi;
        out.check(
            again.zip_with(&env.psi, |a, b| a - b).unwrap().sup_abs() < 1e-10,
            "not idempotent",
        );
    }
    out.check(
        worst_mass <= 1e-6,
        format!("off-contact mass fraction {worst_mass:e}"),
    );

    let grid = TorusGrid::new(1, 16).unwrap();
    for _ in 0..10 {
        let h1 = fourier_field(grid, &mut rng, 5, 0.12);
        let bump = fourier_field(grid, &mut rng, 5, 0.05);
        let h2 = h1.zip_with(&bump, |a, b| a + b.abs()).unwrap();
        let p1 = compute_envelope(&h1).unwrap().psi;
        let p2 = compute_envelope(&h2).unwrap().psi;
        out.check(
            p1.values()
                .iter()
                .zip(p2.values())
                .all(|(a, b)| *a <= b + 1e-10),
            "not monotone",
        );
        let shift = rng.gen_range(-3.0..3.0);
        let q = compute_envelope(&h1.map(|v| v + shift)).unwrap().psi;
        out.check(
            q.zip_with(&p1, |a, b| a - b - shift).unwrap().sup_abs() < 1e-10,
            "not shift equivariant",
        );
    }
    out.note(format!("oracle within {dev:.1e}, off-contact mass fraction {worst_mass:.1e}, 20 idempotence, 10 monotone and shift cases"));
    out
}

fn reduction() -> Outcome {
    let mut out = Outcome::new();
    let grid = TorusGrid::new(1, 32).unwrap();
    let f = TorusField::from_fn(grid, |x| {
        1.0 + 0.6 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin()
    });
    let phi = solve_g_equation(&OperatorSpec::arithmetic(1), &f, 1e-10)
        .unwrap()
        .phi;
    let mut worst = f64::NEG_INFINITY;
    for g in [OperatorSpec::arithmetic(1), OperatorSpec::geometric(1)] {
        let r = reduction_check(&phi, &g, 1.0, 1.0, &f, 1e-8).unwrap();
        worst = worst.max(r.max_violation);
    }
    out.check(worst <= 1e-8, format!("contact violation {worst:e}"));
    let psi = compute_envelope(&phi).unwrap().psi;
    let chain = sup_bound_check(&psi, &phi, &f, &WeightSpec::power(2.0), 1.0, 1.0, 1).unwrap();
    let min_slack = chain
        .links
        .iter()
        .map(|l| l.slack / l.rhs.abs().max(1.0))
        .fold(f64::INFINITY, f64::min);
    out.check(
        chain.all_hold && min_slack >= -1e-12,
        format!("sup-bound chain slack {min_slack:e}"),
    );
    out.note(format!(
        "max violation {worst:.1e}, four-link chain min relative slack {min_slack:.1e}"
    ));
    out
}

fn beta() -> Outcome {
    let mut out = Outcome::new();
    let h = TailFunction::power(2.0);
    let mut min_slack = f64::INFINITY;
    for k in 0..10 {
        let grid = TorusGrid::new(1, 32).unwrap();
        let f = TorusField::from_fn(grid, |x| {
            1.0 + 0.08
                * k as f64
                * (2.0 * PI * x[0] + 0.4 * k as f64).cos()
                * (2.0 * PI * x[1]).cos()
        });
        let phi = solve_poisson_spectral(&f).unwrap().map(|v| 3.0 * v);
        let b_hy = hy_integral(&phi, &f, &h).unwrap().max(1e-3);
        let (delta, c) = (0.5 + 0.05 * k as f64, 1.0);
        let (lambda, m) = choose_lambda_m(delta, c, 1, b_hy, 1.0, &h).unwrap();
        let p = BetaParams {
            lambda,
            m,
            delta,
            c,
            n: 1,
            b_hy,
            v_omega: 1.0,
        };
        let r = beta_bounds_check(&phi, &f, &p, &h).unwrap();
        out.check(r.all_hold, format!("instance {k} bounds fail"));
        min_slack = r
            .upper
            .iter()
            .chain(&r.lower)
            .map(|l| l.slack)
            .fold(min_slack, f64::min);
    }
    out.check(min_slack > 0.0, format!("min slack {min_slack:e}"));
    let grid = TorusGrid::new(1, 8).unwrap();
    let bad = BetaParams {
        lambda: 2.0,
        m: 8.0,
        delta: 1.0,
        c: 1.0,
        n: 1,
        b_hy: 1.0,
        v_omega: 1.0,
    };
    let err = beta_bounds_check(
        &TorusField::zeros(grid),
        &TorusField::constant(grid, 1.0),
        &bad,
        &h,
    );
    let named = matches!(&err, Err(e) if e.kind() == "infeasible" && e.to_string().contains("(i)"));
    out.check(named, "infeasible parameters not rejected by name");
    let err3 = choose_lambda_m(1.0, 1.0, 1, 1.0, 0.5, &h);
    out.check(
        matches!(&err3, Err(e) if e.to_string().contains("(iii)")),
        "(iii) not named",
    );
    out.note(format!(
        "10 instances, min slack {min_slack:.2e}, rejections name (i) and (iii)"
    ));
    out
}

fn operators() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut count = 0;
    for n in 1..=4usize {
        let mut ops = vec![OperatorSpec::arithmetic(n), OperatorSpec::geometric(n)];
        ops.extend((1..=n).map(|k| OperatorSpec::sigma_k(k, n).unwrap()));
        for op in ops {
            count += 1;
            let rep = check_conditions(&op, 10_000, 42).unwrap();
            out.check(
                rep.passed && rep.maclaurin_defect <= 1e-12,
                format!("{} conditions", op.name()),
            );
            let (mut homog, mut grad_bad) = (0, 0);
            for _ in 0..10_000 {
                let l: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0f64..3.0).exp()).collect();
                let g = eval_g(&op, &l).unwrap();
                let t = rng.gen_range(0.01..100.0);
                let scaled: Vec<f64> = l.iter().map(|v| t * v).collect();
                if (eval_g(&op, &scaled).unwrap() - t * g).abs() > 1e-12 * t * g {
                    homog += 1;
                }
                let grad = grad_g(&op, &l).unwrap();
                for j in 0..n {
                    let h = 1e-5 * l[j];
                    let mut up = l.clone();
                    let mut dn = l.clone();
                    up[j] += h;
                    dn[j] -= h;
                    let fd = (eval_g(&op, &up).unwrap() - eval_g(&op, &dn).unwrap()) / (2.0 * h);
                    if (fd - grad[j]).abs() > 1e-6 * grad[j].abs().max(1e-3) {
                        grad_bad += 1;
                    }
                }
            }
            out.check(
                homog == 0,
                format!("{}: {homog} homogeneity failures", op.name()),
            );
            out.check(
                grad_bad == 0,
                format!("{}: {grad_bad} gradient failures", op.name()),
            );
        }
    }
    let g = OperatorSpec::arithmetic(1);
    let mut worst = f64::INFINITY;
    for seed in 0..5u64 {
        for size in [32, 64, 128] {
            let grid = TorusGrid::new(1, size).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phi = fourier_field(grid, &mut rng, 3, 0.005);
            let psi = fourier_field(grid, &mut rng, 3, 0.005);
            let r = domination_check(&phi, &psi, &g, 0.5).unwrap();
            let h2 = grid.spacing() * grid.spacing();
            worst = worst.min(r.eigen_gap.min(r.hessian_gap) / h2);
        }
    }
    out.check(worst >= -1.0, format!("domination gap {worst:.2} Δ²"));
    out.note(format!(
        "{count} operators x 10^4 vectors, domination gap >= {worst:.2} Δ² over N = 32, 64, 128"
    ));
    out
}

fn oscillation() -> Outcome {
    let mut out = Outcome::new();
    let fam = DensityFamily { a: 0.4 };
    let weights = [WeightSpec::log(2.0, 1)];
    let eps: Vec<f64> = (1..=6).map(|k| 10f64.powi(-k)).collect();
    let exp = OscExperiment {
        family: &fam,
        eps_grid: &eps,
        weights: &weights,
        p: f64::INFINITY,
        n: 1,
        base_size: 32,
    };
    let rows = osc_experiment(&exp);
    let csv = osc_rows_csv(&rows, &weights).unwrap();
    out.check(rows.iter().all(|r| r.error.is_none()), "sweep row failed");
    out.check(
        csv == osc_rows_csv(&osc_experiment(&exp), &weights).unwrap(),
        "CSV not deterministic",
    );
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let m = v.len();
        0.5 * (v[(m - 1) / 2] + v[m / 2])
    };
    let oscs: Vec<f64> = rows.iter().map(|r| r.osc).collect();
    let max_osc = oscs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let med_osc = median(oscs);
    out.check(
        max_osc <= 2.0 * med_osc,
        format!("max osc {max_osc} vs median {med_osc}"),
    );
    let growth = rows.last().unwrap().lp_norm / rows[0].lp_norm;
    out.check(growth > 10.0, format!("sup norm grew only {growth:.1}x"));
    let lux: Vec<f64> = rows.iter().map(|r| r.lux[0]).collect();
    let max_lux = lux.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let med_lux = median(lux);
    out.check(
        max_lux <= 2.0 * med_lux,
        format!("(K)-weight norm max {max_lux} vs median {med_lux}"),
    );
    out.note(format!(
        "max osc / median {:.3}, sup norm x{growth:.0}, (K)-norm max / median {:.3}",
        max_osc / med_osc,
        max_lux / med_lux
    ));
    out
}

fn main() {
    let criteria: [(&str, f64, fn() -> Outcome); 11] = [
        ("condition-(K) classification", 1.0, k_classification),
        ("Luxembourg norm", 10.0, luxembourg),
        ("convex conjugation", 5.0, conjugation),
        ("radial round trip", 30.0, radial_round_trip),
        ("Moser machinery", 10.0, moser),
        ("discrete MA solver", 300.0, solver),
        ("envelope", 120.0, envelope),
        ("reduction", 60.0, reduction),
        ("beta_M construction", 30.0, beta),
        ("operators", 60.0, operators),
        ("oscillation experiment", 300.0, oscillation),
    ];
    let (mut passed, mut failed, mut gaps) = (0, 0, 0);
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut out = run();
        let secs = start.elapsed().as_secs_f64();
        out.check(secs < *limit, format!("runtime {secs:.2} s over {limit} s"));
        let status = if out.failures.is_empty() && out.gaps.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        let mut detail = out.notes.join("; ");
        for f in &out.failures {
            detail.push_str(&format!("; failed: {f}"));
        }
        for g in &out.gaps {
            detail.push_str(&format!("; unattainable: {g}"));
        }
        println!(
            "criterion {:>2} {name}: {status} [{secs:.2} s < {limit} s] {detail}",
            i + 1
        );
        if !out.failures.is_empty() {
            failed += 1;
        } else if !out.gaps.is_empty() {
            gaps += 1;
        } else {
            passed += 1;
        }
    }
    println!("acceptance: {passed} passed, {failed} failed, {gaps} failed on documented unattainable sub-checks");
    if failed > 0 {
        std::process::exit(1);
    }
}
