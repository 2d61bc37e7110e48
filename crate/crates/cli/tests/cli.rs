use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SUBCOMMANDS: [&str; 19] = [
    "weight-check",
    "lux-norm",
    "legendre",
    "radial-forward",
    "radial-inverse",
    "radial-integrability",
    "rigidity",
    "construct-chi",
    "trick-constant",
    "solve-ma",
    "moser-trace",
    "energy-check",
    "skoda",
    "envelope",
    "reduction-check",
    "beta-bounds",
    "operator-check",
    "domination",
    "osc-experiment",
];

fn tests_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests")
}

fn fixture(name: &str) -> String {
    tests_dir()
        .join("fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ma-lab"));
    cmd.args(args).env_remove("MA_LAB_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Compares stdout with `tests/golden/<name>.out`; `UPDATE_GOLDEN=1` rewrites it.
fn golden(name: &str, args: &[&str]) {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "{name}: {}", stderr(&out));
    let path = tests_dir().join("golden").join(format!("{name}.out"));
    let actual = stdout(&out);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(actual, expected, "{name} differs from {}", path.display());
}

#[test]
fn golden_weight_check() {
    golden(
        "weight-check",
        &["weight-check", "--family", "logp", "--p", "3", "--n", "2"],
    );
}

#[test]
fn golden_lux_norm() {
    golden(
        "lux-norm",
        &[
            "lux-norm",
            "--density",
            &fixture("three_point.csv"),
            "--p",
            "2",
        ],
    );
}

#[test]
fn golden_legendre() {
    golden(
        "legendre",
        &[
            "legendre", "--family", "powerp", "--p", "2", "--s-max", "4", "--points", "5",
        ],
    );
}

#[test]
fn golden_radial_forward() {
    golden(
        "radial-forward",
        &[
            "radial-forward",
            "--profile",
            "exponential",
            "--n",
            "2",
            "--sigma-max",
            "3",
            "--points",
            "4",
        ],
    );
}

#[test]
fn golden_radial_inverse() {
    golden(
        "radial-inverse",
        &[
            "radial-inverse",
            "--density",
            "exp-nt",
            "--n",
            "1",
            "--points",
            "5",
        ],
    );
}

#[test]
fn golden_radial_integrability() {
    golden(
        "radial-integrability",
        &[
            "radial-integrability",
            "--h-exponent",
            "1",
            "--sigma-cut",
            "1000",
        ],
    );
}

#[test]
fn golden_rigidity() {
    golden(
        "rigidity",
        &["rigidity", "--profile", "exponential", "--n", "2"],
    );
}

#[test]
fn golden_construct_chi() {
    golden(
        "construct-chi",
        &["construct-chi", "--h-exponent", "2", "--b", "10"],
    );
}

#[test]
fn golden_trick_constant() {
    golden(
        "trick-constant",
        &["trick-constant", "--config", &fixture("trick.json")],
    );
}

#[test]
fn golden_solve_ma() {
    golden("solve-ma", &["solve-ma", "--seed", "3", "--size", "16"]);
}

#[test]
fn golden_moser_trace() {
    golden(
        "moser-trace",
        &["moser-trace", "--seed", "3", "--steps", "8"],
    );
}

#[test]
fn golden_energy_check() {
    golden("energy-check", &["energy-check", "--seed", "3", "--r", "2"]);
}

#[test]
fn golden_skoda() {
    golden("skoda", &["skoda", "--size", "32", "--alphas", "0.5,1,2"]);
}

#[test]
fn golden_envelope() {
    golden("envelope", &["envelope", "--seed", "3"]);
}

#[test]
fn golden_reduction_check() {
    golden(
        "reduction-check",
        &[
            "reduction-check",
            "--seed",
            "3",
            "--operator",
            "geometric:n=1",
        ],
    );
}

#[test]
fn golden_beta_bounds() {
    golden("beta-bounds", &["beta-bounds", "--seed", "3"]);
}

#[test]
fn golden_operator_check() {
    golden(
        "operator-check",
        &["operator-check", "--config", &fixture("operator.json")],
    );
}

#[test]
fn golden_domination() {
    golden("domination", &["domination", "--seed", "3"]);
}

#[test]
fn golden_osc_experiment() {
    golden(
        "osc-experiment",
        &["osc-experiment", "--config", &fixture("sweep.json")],
    );
}

#[test]
fn every_subcommand_has_help() {
    for sub in SUBCOMMANDS {
        let out = run(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        let text = stdout(&out);
        assert!(
            text.contains(&format!("Usage: ma-lab {sub}")),
            "{sub}: {text}"
        );
        assert!(text.contains("--config"), "{sub}");
    }
    let out = run(&["--help"]);
    for sub in SUBCOMMANDS {
        assert!(stdout(&out).contains(sub), "top-level help misses {sub}");
    }
}

#[test]
fn weight_check_reports_k_verdicts() {
    let out = run(&["weight-check", "--family", "logp", "--p", "3", "--n", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("SatisfiesK"));
    assert!(text.contains("tail_kind=extracted"));
    let out = run(&["weight-check", "--family", "logp", "--p", "2", "--n", "2"]);
    assert_eq!(stdout(&out).lines().next(), Some("FailsK"));
}

#[test]
fn lux_norm_of_constant_density_is_one() {
    let out = run(&["lux-norm", "--density", &fixture("constant.csv")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "1.0\n");
}

#[test]
fn lux_norm_matches_l2_norm() {
    // (0.25 * 0.25 + 0.5 * 1 + 0.25 * 4)^{1/2} = 1.25
    let out = run(&[
        "lux-norm",
        "--density",
        &fixture("three_point.csv"),
        "--family",
        "powerp",
        "--p",
        "2",
    ]);
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!((v - 1.25).abs() < 1e-12, "{v}");
    let out = run(&[
        "lux-norm",
        "--density",
        &fixture("three_point.csv"),
        "--family",
        "tabulated",
        "--table",
        &fixture("square_table.csv"),
    ]);
    let t: f64 = stdout(&out).trim().parse().unwrap();
    assert!((t - 1.25).abs() < 1e-3, "{t}");
}

#[test]
fn sweep_config_gives_declared_header_and_one_row_per_eps() {
    let out = run(&["osc-experiment", "--config", &fixture("sweep.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "eps,osc,lp_norm,lux_powerp_p2,lux_logp_p2_n1,lux_loglogp_p2_n1"
    );
    assert_eq!(lines.len(), 4);
    for (line, eps) in lines[1..].iter().zip(["0.1", "0.01", "0.001"]) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0], eps);
        assert!(
            cells
                .iter()
                .all(|c| c.parse::<f64>().is_ok() && !c.contains(' ')),
            "{line}"
        );
    }
}

#[test]
fn flags_override_config_values() {
    let out = run(&[
        "osc-experiment",
        "--config",
        &fixture("sweep.json"),
        "--eps",
        "0.05",
    ]);
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("0.05,"));
}

#[test]
fn output_is_independent_of_job_count() {
    let base = ["osc-experiment", "--config", &fixture("sweep.json")];
    let one = run(&[&base[..], &["--jobs", "1"]].concat());
    let four = run(&[&base[..], &["--jobs", "4"]].concat());
    let again = run(&base);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(one.stdout, again.stdout);
    let a = run(&["solve-ma", "--n", "2", "--seed", "9", "--jobs", "1"]);
    let b = run(&["solve-ma", "--n", "2", "--seed", "9", "--jobs", "3"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn seed_precedence_flag_then_env() {
    let env = run_env(&["solve-ma"], &[("MA_LAB_SEED", "5")]);
    let flag = run(&["solve-ma", "--seed", "5"]);
    let default = run(&["solve-ma"]);
    assert_eq!(env.stdout, flag.stdout);
    assert_ne!(env.stdout, default.stdout);
    let both = run_env(&["solve-ma", "--seed", "0"], &[("MA_LAB_SEED", "5")]);
    assert_eq!(both.stdout, default.stdout);
    let bad = run_env(&["solve-ma"], &[("MA_LAB_SEED", "five")]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one_with_a_json_line() {
    let out = run(&[
        "trick-constant",
        "--a",
        "0.5",
        "--b",
        "1",
        "--delta",
        "0.5",
        "--gamma",
        "1",
        "--c1",
        "1",
        "--fp-norm",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"], "infeasible");
    assert!(v["message"].as_str().unwrap().contains("lambda"));

    let out = run(&["moser-trace", "--schedule-n", "2", "--p", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(stderr(&out).trim()).unwrap();
    assert_eq!(v["error"], "invalid-input");

    let out = run(&["lux-norm", "--density", "/nonexistent/f.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(stderr(&out).trim()).unwrap();
    assert_eq!(v["error"], "io");
    assert!(v["message"]
        .as_str()
        .unwrap()
        .contains("/nonexistent/f.csv"));
}

#[test]
fn usage_errors_exit_two() {
    let cases: Vec<Vec<String>> = vec![
        vec!["frobnicate".into()],
        vec!["weight-check".into()],
        vec!["trick-constant".into(), "--a".into(), "1".into()],
        vec![
            "weight-check".into(),
            "--family".into(),
            "logp".into(),
            "--p".into(),
            "abc".into(),
        ],
        vec![
            "trick-constant".into(),
            "--config".into(),
            fixture("unknown_key.json"),
        ],
        vec![
            "weight-check".into(),
            "--config".into(),
            fixture("trick.json"),
        ],
        vec![
            "osc-experiment".into(),
            "--weights".into(),
            "cubic:p=2".into(),
        ],
        vec!["solve-ma".into(), "--jobs".into(), "0".into()],
    ];
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
        assert!(!stderr(&out).contains("panicked"));
    }
    let out = run(&["trick-constant", "--config", &fixture("unknown_key.json")]);
    assert!(stderr(&out).contains("epsilon"), "{}", stderr(&out));
}

#[test]
fn output_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = run(&[
        "osc-experiment",
        "--config",
        &fixture("sweep.json"),
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let direct = run(&["osc-experiment", "--config", &fixture("sweep.json")]);
    assert_eq!(std::fs::read(&path).unwrap(), direct.stdout);
}

#[test]
fn field_files_chain_between_commands() {
    let dir = tempfile::tempdir().unwrap();
    let phi = dir.path().join("phi.fld");
    let out = run(&[
        "solve-ma",
        "--seed",
        "2",
        "--phi-out",
        phi.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let skoda = run(&["skoda", "--phi", phi.to_str().unwrap(), "--alphas", "1"]);
    assert_eq!(skoda.status.code(), Some(0), "{}", stderr(&skoda));
    let psi = dir.path().join("psi.fld");
    let env = run(&[
        "envelope",
        "--obstacle",
        phi.to_str().unwrap(),
        "--psi-out",
        psi.to_str().unwrap(),
    ]);
    assert_eq!(env.status.code(), Some(0), "{}", stderr(&env));
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("psi.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["size"], 32);
    // the envelope of a quasi-psh obstacle is the obstacle itself
    assert_eq!(sidecar["contact_points"], sidecar["total_points"]);
    let energy = run(&[
        "energy-check",
        "--phi",
        phi.to_str().unwrap(),
        "--density",
        phi.to_str().unwrap(),
    ]);
    assert_eq!(energy.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(stderr(&energy).trim()).unwrap();
    assert_eq!(v["error"], "normalization");
}

#[test]
fn fixture_configs_validate_against_the_schema() {
    let check = Command::new("python3")
        .args(["-c", "import jsonschema"])
        .output();
    if !matches!(check, Ok(ref o) if o.status.success()) {
        eprintln!("python3 with jsonschema unavailable; schema validation skipped");
        return;
    }
    let schema = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/experiment.schema.json");
    let script = r#"
import json, sys, jsonschema
schema = json.load(open(sys.argv[1]))
jsonschema.Draft202012Validator.check_schema(schema)
v = jsonschema.Draft202012Validator(schema)
for path in sys.argv[2:]:
    ok = v.is_valid(json.load(open(path)))
    print(path.rsplit('/', 1)[-1], ok)
"#;
    let configs = [
        "sweep.json",
        "operator.json",
        "trick.json",
        "unknown_key.json",
    ]
    .map(fixture);
    let out = Command::new("python3")
        .arg("-c")
        .arg(script)
        .arg(&schema)
        .args(&configs)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("sweep.json True"), "{text}");
    assert!(text.contains("operator.json True"), "{text}");
    assert!(text.contains("trick.json True"), "{text}");
    assert!(text.contains("unknown_key.json False"), "{text}");
}
