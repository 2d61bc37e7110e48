use ma_lab_core::radial::*;
use ma_lab_core::weights::TailFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Densities of the exponential and triple-log profiles, and `F = e^{nt}`.
fn named_densities(n: u32) -> Vec<(&'static str, DensityProfile)> {
    let nf = n as f64;
    let triple = RadialProfile::triple_log(n);
    vec![
        (
            "exponential",
            DensityProfile::of_profile(&RadialProfile::exponential(n)),
        ),
        ("triple-log", DensityProfile::of_profile(&triple)),
        (
            "exp-nt",
            DensityProfile::from_log_moment(n, move |t| 2.0 * nf * t),
        ),
    ]
}

/// `n! det(v_{j kbar}) (2/pi)^n` for `v = |z|^2`, with `v_{j kbar}` from central differences
/// and `(i/pi) dz ^ dzbar = (2/pi) dx ^ dy`.
fn discrete_ma_of_square_norm(n: usize, z: &[f64]) -> f64 {
    let v = |x: &[f64]| x.iter().map(|c| c * c).sum::<f64>();
    let h = 1e-3;
    let d2 = |a: usize, b: usize| {
        let shifted = |sa: f64, sb: f64| {
            let mut x = z.to_vec();
            x[a] += sa * h;
            x[b] += sb * h;
            v(&x)
        };
        (shifted(1.0, 1.0) - shifted(1.0, -1.0) - shifted(-1.0, 1.0) + shifted(-1.0, -1.0))
            / (4.0 * h * h)
    };
    // real coordinates (x_1, y_1, x_2, y_2, ...)
    let (x, y) = (|j: usize| 2 * j, |j: usize| 2 * j + 1);
    let entry = |j: usize, k: usize| {
        let re = 0.25 * (d2(x(j), x(k)) + d2(y(j), y(k)));
        let im = 0.25 * (d2(x(j), y(k)) - d2(y(j), x(k)));
        (re, im)
    };
    let det = match n {
        1 => entry(0, 0).0,
        2 => {
            let (a, b, c) = (entry(0, 0).0, entry(0, 1), entry(1, 1).0);
            a * c - (b.0 * b.0 + b.1 * b.1)
        }
        _ => unreachable!(),
    };
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    factorial * det * (2.0 / std::f64::consts::PI).powi(n as i32)
}

#[test]
fn c_n_matches_discrete_monge_ampere_of_square_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in [1usize, 2] {
        for _ in 0..5 {
            let z: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let measured = discrete_ma_of_square_norm(n, &z);
            assert!(
                rel(measured, c_n(n as u32)) < 1e-8,
                "n = {n}: {measured} vs {}",
                c_n(n as u32)
            );
        }
    }
}

#[test]
fn forward_inverse_round_trip() {
    for n in [1, 2] {
        for (name, f) in named_densities(n) {
            let chi = inverse_profile(&f).unwrap();
            // t in [-e^5, -e^-1], where e^{nt} int F e^{ns} ds is still a normal double
            for k in 0..=12 {
                let t = -(-1.0 + 0.5 * k as f64).exp();
                let back = forward_density(&chi, t).unwrap();
                assert!(
                    rel(back, f.eval(t)) < 1e-4,
                    "{name}, n = {n}, t = {t}: {back} vs {}",
                    f.eval(t)
                );
            }
        }
    }
}

#[test]
fn inverse_recovers_closed_form_slopes() {
    for n in [1u32, 2, 3] {
        let nf = n as f64;
        let cn = c_n(n);
        // F = e^{nt}: int_{-oo}^t e^{2ns} ds = e^{2nt} / (2n), so chi' = (e^{2nt} / (2 c_n))^{1/n}
        let f = DensityProfile::from_log_moment(n, move |t| 2.0 * nf * t);
        let chi = inverse_profile(&f).unwrap();
        for t in [-6.0, -2.0, -0.5, 0.0] {
            let exact = ((2.0 * nf * t).exp() / (2.0 * cn)).powf(1.0 / nf);
            assert!(rel(chi.chi1(t).unwrap(), exact) < 1e-8, "n = {n}, t = {t}");
        }
    }
}

#[test]
fn triple_log_slope_survives_the_round_trip() {
    let n = 2;
    let profile = RadialProfile::triple_log(n);
    let chi = inverse_profile(&DensityProfile::of_profile(&profile)).unwrap();
    for k in 0..=8 {
        let t = -(2.0 + 0.5 * k as f64).exp();
        let a = chi.chi1(t).unwrap();
        let b = profile.chi1(t).unwrap();
        assert!(rel(a, b) < 1e-4, "t = {t}: {a} vs {b}");
    }
}

/// `ln F` of the triple-log profile from the chain rule in `u = -t + 10000`.
fn triple_log_ln_density(n: u32, t: f64) -> f64 {
    let nf = n as f64;
    let u = -t + 10_000.0;
    let (a, b) = (u.ln(), u.ln().ln());
    let chi1 = 1.0 / (u * a * b);
    let chi2 = (a * b + b + 1.0) / (u * a * b).powi(2);
    c_n(n).ln() + (nf - 1.0) * chi1.ln() + chi2.ln() - nf * t
}

#[test]
fn triple_log_density_matches_chain_rule() {
    for n in [1u32, 2, 3] {
        for sigma in [2.0f64, 6.0, 10.0, 14.0] {
            let t = -sigma.exp();
            let ln_f = ln_forward_density(&RadialProfile::triple_log(n), t).unwrap();
            assert!(
                (ln_f - triple_log_ln_density(n, t)).abs() < 1e-10,
                "n = {n}, t = -e^{sigma}"
            );
        }
    }
}

#[test]
fn triple_log_density_approaches_asymptotics() {
    let ratio = |n: u32, sigma: f64| {
        let nf = n as f64;
        let t = -sigma.exp();
        // c_n / (|t|^{n+1} (log|t|)^n (log log|t|)^n e^{-nt}) in logs
        let ln_asym =
            c_n(n).ln() - (nf + 1.0) * sigma - nf * sigma.ln() - nf * sigma.ln().ln() - nf * t;
        (ln_forward_density(&RadialProfile::triple_log(n), t).unwrap() - ln_asym).exp()
    };
    for n in [1u32, 2, 3] {
        // the offset 10000 ~ e^9.2 still dominates at |t| = e^10
        assert!(ratio(n, 10.0) < 0.9);
        assert!(
            (ratio(n, 30.0) - 1.0).abs() < 0.05,
            "n = {n}: {}",
            ratio(n, 30.0)
        );
        assert!((ratio(n, 600.0) - 1.0).abs() < 0.01);
    }
}

#[test]
fn triple_log_asymptotics_far_out() {
    // at t = -e^40 the offset is invisible and chi' |t| log|t| log log|t| -> 1
    let p = RadialProfile::triple_log(2);
    let sigma = 40.0f64;
    let (l1, _) = p.ln_derivs_sigma(sigma).unwrap();
    let scaled = (l1 + sigma + sigma.ln() + sigma.ln().ln()).exp();
    assert!((scaled - 1.0).abs() < 1e-9, "{scaled}");
}

#[test]
fn forward_density_is_nonnegative_and_vanishes_with_chi2() {
    for n in [1, 2] {
        for p in [RadialProfile::exponential(n), RadialProfile::triple_log(n)] {
            for k in 0..20 {
                let t = -(0.3 * k as f64).exp();
                assert!(forward_density(&p, t).unwrap() > 0.0);
            }
        }
        assert_eq!(
            forward_density(&RadialProfile::linear(n), -3.0).unwrap(),
            0.0
        );
    }
}

#[test]
fn triple_log_square_root_tail_converges() {
    let r = integrability_functional(
        &RadialProfile::triple_log(2),
        &TailFunction::power(0.5),
        -(600f64.exp()),
    )
    .unwrap();
    assert_eq!(r.verdict, Convergence::Converged, "{r:?}");
    assert!(rel(r.doubled[0], r.value) < 1e-3);
    // on the log scale the increments shrink like 1 / log|T|
    let incs = [
        r.log_doubled[0] - r.value,
        r.log_doubled[1] - r.log_doubled[0],
        r.log_doubled[2] - r.log_doubled[1],
    ];
    assert!(incs.windows(2).all(|w| w[1] < w[0]), "{incs:?}");
}

#[test]
fn exponential_profile_with_unit_tail_converges() {
    let r = integrability_functional(
        &RadialProfile::exponential(2),
        &TailFunction::power(0.0),
        -50.0,
    )
    .unwrap();
    assert_eq!(r.verdict, Convergence::Converged);
}

#[test]
fn triple_log_linear_tail_against_substitution() {
    // h(s) = s, n = 2: the s-substituted integrand is 1 / (log s)^2
    let h = TailFunction::power(1.0);
    let p = RadialProfile::triple_log(2);
    let r = integrability_functional_log(&p, &h, 1e3).unwrap();
    assert!(r.doubled[0] > r.value);
    assert_eq!(r.log_verdict, Convergence::Diverging, "{r:?}");
    let (a, b) = (2f64.powi(10), 2f64.powi(14));
    let direct = integrability_functional_sigma(&p, &h, b).unwrap()
        - integrability_functional_sigma(&p, &h, a).unwrap();
    let substituted = substituted_integral(&h, 2, a, b).unwrap();
    assert!(rel(direct, substituted) < 1e-3, "{direct} vs {substituted}");
}

#[test]
fn substitution_identity_for_triple_log_family() {
    let (a, b) = (2f64.powi(10), 2f64.powi(14));
    for n in [1u32, 2, 3] {
        for e in [0.25, 0.5, 0.75] {
            let h = TailFunction::power(e);
            let p = RadialProfile::triple_log(n);
            let direct = integrability_functional_sigma(&p, &h, b).unwrap()
                - integrability_functional_sigma(&p, &h, a).unwrap();
            let substituted = substituted_integral(&h, n, a, b).unwrap();
            assert!(
                rel(direct, substituted) < 1e-3,
                "n = {n}, h = s^{e}: {direct} vs {substituted}"
            );
        }
    }
}

#[test]
fn functional_is_monotone_in_h() {
    let p = RadialProfile::triple_log(2);
    let sigma = 200.0;
    let mut last = 0.0;
    for e in [0.0, 0.25, 0.5, 0.75] {
        let v = integrability_functional_sigma(&p, &TailFunction::power(e), sigma).unwrap();
        assert!(v > last);
        last = v;
    }
}

#[test]
fn tail_domain_errors_are_reported() {
    let h = TailFunction::table(vec![(1.0, 1.0), (5.0, 2.0)]).unwrap();
    let err = integrability_functional(&RadialProfile::triple_log(2), &h, -1e6).unwrap_err();
    assert!(err.to_string().contains("t = -e^"), "{err}");
}

#[test]
fn boundedness_verdicts() {
    assert_eq!(
        is_bounded_profile(&RadialProfile::exponential(1))
            .unwrap()
            .verdict,
        Boundedness::Bounded
    );
    assert_eq!(
        is_bounded_profile(&RadialProfile::linear(1))
            .unwrap()
            .verdict,
        Boundedness::Unbounded
    );
    let r = is_bounded_profile(&RadialProfile::triple_log(3)).unwrap();
    assert_eq!(r.verdict, Boundedness::Unbounded);
    assert!(r.harmonic_ratio > 0.8);
}

#[test]
fn rigidity_on_exponential_profile() {
    for n in [1, 2, 3] {
        let r = rigidity_chain(&RadialProfile::exponential(n), n as f64, -50.0).unwrap();
        assert!(r.ibp_holds && r.holder_holds, "{r:?}");
        assert!(r.c < r.holder_bound);
        assert_eq!(r.b_verdict, Convergence::Converged);
    }
}

#[test]
fn rigidity_on_triple_log_shows_divergent_b() {
    let r = rigidity_chain(&RadialProfile::triple_log(2), 1.5, -(200f64.exp())).unwrap();
    assert!(r.ibp_holds && r.holder_holds, "{r:?}");
    assert!(r.c.is_finite());
    assert!(r.b_squared_cut > r.b);
    assert_ne!(r.b_verdict, Convergence::Converged);
    // the same profile is unbounded, so B < oo must fail for it
    assert_eq!(
        is_bounded_profile(&RadialProfile::triple_log(2))
            .unwrap()
            .verdict,
        Boundedness::Unbounded
    );
}

#[test]
fn rigidity_on_random_convex_splines() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..5 {
        // chi = sum c_i e^{a_i t}
        let terms: Vec<(f64, f64)> = (0..3)
            .map(|_| (rng.gen_range(0.1..2.0), rng.gen_range(0.2..1.5)))
            .collect();
        let row = |t: f64| {
            let mut r = ProfileRow {
                t,
                chi: 0.0,
                chi1: 0.0,
                chi2: 0.0,
            };
            for (c, a) in &terms {
                let e = c * (a * t).exp();
                r.chi += e;
                r.chi1 += a * e;
                r.chi2 += a * a * e;
            }
            r
        };
        let mut rows: Vec<ProfileRow> = (0..400)
            .map(|k| row(-(4.0 - 5.0 * k as f64 / 399.0).exp()))
            .collect();
        rows.push(row(0.0));
        let n = 2;
        let profile = RadialProfile::sampled(&rows, n).unwrap();
        let r = rigidity_chain(&profile, 1.5, -(3.5f64.exp())).unwrap();
        assert!(r.a <= r.ibp_bound * (1.0 + 1e-6) + 1e-6, "{r:?}");
        assert!(r.c <= r.holder_bound * (1.0 + 1e-6) + 1e-6, "{r:?}");
    }
}

#[test]
fn profile_csv_feeds_a_sampled_profile() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chi.csv");
    let exact = RadialProfile::triple_log(2);
    let rows = exact.sample(0.0, 5.0, 400).unwrap();
    write_profile_csv(&rows, &path).unwrap();
    let sampled = RadialProfile::sampled(&read_profile_csv(&path).unwrap(), 2).unwrap();
    for t in [-100.0, -10.0, -2.0] {
        assert!(rel(sampled.chi1(t).unwrap(), exact.chi1(t).unwrap()) < 1e-4);
    }
}
