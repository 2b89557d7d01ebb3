use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn example(name: &str) -> PathBuf {
    root().join("configs").join(name)
}

fn kolmo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kolmo"))
        .args(args)
        .output()
        .unwrap()
}

fn run_in(out: &Path, args: &[&str]) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    kolmo(&all)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn write_config(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    p
}

fn output_hashes(out: &Path) -> Vec<(String, String)> {
    let m = read_json(&out.join("manifest.json"));
    m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| {
            (
                o["file"].as_str().unwrap().to_string(),
                o["sha256"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

fn validator(schema: &str) -> jsonschema::Validator {
    let s = read_json(&root().join("schemas/v1").join(schema));
    jsonschema::validator_for(&s).unwrap()
}

fn small_spde(forcing: Value) -> Value {
    json!({
        "schema_version": 1,
        "kernel": { "alpha": 2.0, "d": 1, "L": 31.41592653589793, "n": 256 },
        "levy": {
            "c": 1.0, "d_jump": 1,
            "nu": { "total_mass": 2.0, "dist": { "kind": "uniform", "low": 0.0, "high": 1.0 } },
            "horizon": 1.0
        },
        "forcing": forcing,
        "times": [0.0, 0.25, 0.5, 0.75, 1.0],
        "replications": 100,
        "seed": 9,
        "export_paths": 3,
        "checks": { "kunita_replications": 2000 }
    })
}

#[test]
fn modulus_logpower_certified() {
    let dir = TempDir::new().unwrap();
    let cfg = example("modulus_logpower.json");
    let o = run_in(
        dir.path(),
        &["modulus", "check", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("admissibility.json"));
    assert_eq!(r["outcome"], "certified");
    assert_eq!(r["theta_in_window"], true);
    assert_eq!(r["sum_converges"], "converges");
}

#[test]
fn modulus_power_default_theta_is_window_midpoint() {
    let dir = TempDir::new().unwrap();
    let cfg = example("modulus_power.json");
    let o = run_in(
        dir.path(),
        &["modulus", "check", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0);
    let r = read_json(&dir.path().join("admissibility.json"));
    assert_eq!(
        r["theta_window"],
        json!({"window": "open", "lo": 0.0, "hi": 0.5})
    );
    assert_eq!(r["theta"], 0.25);
    assert_eq!(read_json(&dir.path().join("config.json"))["theta"], 0.25);
}

#[test]
fn modulus_empty_window_fails() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        &json!({"schema_version": 1, "modulus": {"kind": "logpower", "beta": 0.5}, "gamma": 1.0}),
    );
    let out = dir.path().join("out");
    let o = run_in(
        &out,
        &["modulus", "check", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code(&o), 2);
    assert_eq!(
        read_json(&out.join("admissibility.json"))["theta_window"]["window"],
        "empty"
    );
}

#[test]
fn config_and_usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"schema_version\": 1, \"modulus\": ").unwrap();
    let o = run_in(
        &out,
        &["modulus", "check", "--config", bad.to_str().unwrap()],
    );
    assert_eq!(code(&o), 1);
    assert!(!out.join("manifest.json").exists());

    let unknown = write_config(
        &dir,
        "unknown.json",
        &json!({"schema_version": 1, "modulus": {"kind": "power", "epsilon": 1.0}, "gamma": 2.0, "colour": 1}),
    );
    assert_eq!(
        code(&run_in(
            &out,
            &["modulus", "check", "--config", unknown.to_str().unwrap()]
        )),
        1
    );

    let version = write_config(
        &dir,
        "v2.json",
        &json!({"schema_version": 2, "modulus": {"kind": "power", "epsilon": 1.0}, "gamma": 2.0}),
    );
    assert_eq!(
        code(&run_in(
            &out,
            &["modulus", "check", "--config", version.to_str().unwrap()]
        )),
        1
    );

    assert_eq!(code(&run_in(&out, &["modulus", "check"])), 1);
    assert_eq!(code(&kolmo(&["modulus", "check", "--bogus"])), 1);
    assert_eq!(code(&kolmo(&["levy"])), 1);
    let cfg = example("modulus_power.json");
    assert_eq!(
        code(&run_in(
            &out,
            &[
                "modulus",
                "check",
                "--config",
                cfg.to_str().unwrap(),
                "--threads",
                "0"
            ]
        )),
        1
    );
    assert_eq!(code(&kolmo(&["--help"])), 0);
}

#[test]
fn chain_linear_within_bound() {
    let dir = TempDir::new().unwrap();
    let cfg = example("chain_linear.json");
    let o = run_in(
        dir.path(),
        &["chain", "estimate", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("bound.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "replication,time_index,seminorm,bound,within"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 100 * 16);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
    let k = fs::read_to_string(dir.path().join("k.csv")).unwrap();
    assert!(k.lines().count() > 1);
}

#[test]
fn chain_brownian_recovers_exponent() {
    let dir = TempDir::new().unwrap();
    let cfg = example("chain_brownian.json");
    let o = run_in(
        dir.path(),
        &["chain", "estimate", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&dir.path().join("moment.json"));
    let eps = m["holder_fit"]["epsilon_hat"].as_f64().unwrap();
    assert!((eps - 1.0).abs() < 0.1, "epsilon_hat {eps}");
    assert_eq!(m["hypothesis"]["consistent"], true);
}

#[test]
fn chain_zero_replications_is_config_error() {
    let dir = TempDir::new().unwrap();
    let mut v = read_json(&example("chain_linear.json"));
    v["field"]["replications"] = json!(0);
    let cfg = write_config(&dir, "c.json", &v);
    let o = run_in(
        &dir.path().join("out"),
        &["chain", "estimate", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn levy_verify_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = example("levy_uniform.json");
    let o = run_in(
        dir.path(),
        &["levy", "verify", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let p = read_json(&dir.path().join("poisson.json"));
    assert_eq!(p["atom_count"]["expected"], 2.0);
    assert_eq!(p["isometry"]["expected"], 2.0);
    let k = read_json(&dir.path().join("kunita.json"));
    let reports = k.as_array().unwrap();
    assert_eq!(reports.len(), 3);
    for r in reports {
        assert_eq!(r["consistent"], true);
        assert_eq!(r["batch_sizes"], json!([1000, 10000, 100000]));
    }
}

#[test]
fn spde_default_experiment_passes() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["spde", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "field.csv",
        "modulus.json",
        "sup.json",
        "kunita.json",
        "config.json",
        "manifest.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let m = read_json(&dir.path().join("modulus.json"));
    let slope = m["estimate"]["fit_distance"]["slope"].as_f64().unwrap();
    assert!((slope - 2.0).abs() <= 0.15);
    assert_eq!(m["holder"]["stable"], true);
    let cfg = read_json(&dir.path().join("config.json"));
    assert_eq!(cfg["checks"]["p"], 2.0);
    assert_eq!(cfg["checks"]["theta"], 0.25);
    assert_eq!(cfg["checks"]["beta"], 0.25);
}

#[test]
fn spde_zero_forcing_reports_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = example("spde_zero.json");
    let o = run_in(
        dir.path(),
        &["spde", "run", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["sup.json", "kunita.json"] {
        let r = read_json(&dir.path().join(f));
        assert_eq!(r["lhs_estimate"], 0.0);
        assert_eq!(r["rhs_total"], 0.0);
        assert!(r["batch_ratios"]
            .as_array()
            .unwrap()
            .iter()
            .all(|v| v == 0.0));
    }
    let m = read_json(&dir.path().join("modulus.json"));
    assert_eq!(m["estimate"]["all_zero"], true);
    assert!(m["estimate"]["scales"]
        .as_array()
        .unwrap()
        .iter()
        .all(|s| s["estimate"] == 0.0));
    assert!(m["holder"]["levels"]
        .as_array()
        .unwrap()
        .iter()
        .all(|l| l["estimate"] == 0.0));
    let csv = fs::read_to_string(dir.path().join("field.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let cols: Vec<f64> = line
            .split(',')
            .skip(4)
            .map(|c| c.parse().unwrap())
            .collect();
        assert!(cols.iter().all(|v| *v == 0.0), "{line}");
    }
}

#[test]
fn spde_mass_deficit_exits_two() {
    let dir = TempDir::new().unwrap();
    let mut v = small_spde(json!({"kind": "eigen"}));
    v["kernel"] = json!({ "alpha": 1.0, "d": 1, "L": 8.0, "n": 256 });
    let cfg = write_config(&dir, "tiny.json", &v);
    let o = run_in(
        &dir.path().join("out"),
        &["spde", "run", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("mass deficit"));
}

#[test]
fn spde_verify_selects_reports() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &small_spde(json!({"kind": "eigen"})));
    let out = dir.path().join("out");
    let o = run_in(
        &out,
        &[
            "spde",
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--verify",
            "sup",
        ],
    );
    assert!(
        matches!(code(&o), 0 | 3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(out.join("sup.json").exists());
    assert!(!out.join("modulus.json").exists() && !out.join("kunita.json").exists());
    let o = run_in(
        &out,
        &[
            "spde",
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--verify",
            "nonsense",
        ],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn manifest_checksums_match_files() {
    let dir = TempDir::new().unwrap();
    let cfg = example("chain_linear.json");
    assert_eq!(
        code(&run_in(
            dir.path(),
            &["chain", "estimate", "--config", cfg.to_str().unwrap()]
        )),
        0
    );
    let m = read_json(&dir.path().join("manifest.json"));
    assert!(validator("manifest.schema.json").is_valid(&m));
    assert_eq!(m["command"], "chain estimate");
    assert_eq!(m["seed"], 7);
    for (file, sha) in output_hashes(dir.path()) {
        let bytes = fs::read(dir.path().join(&file)).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&bytes)), sha, "{file}");
    }
    assert_eq!(
        m["config_sha256"],
        hex::encode(Sha256::digest(
            fs::read(dir.path().join("config.json")).unwrap()
        ))
    );
}

#[test]
fn outputs_identical_across_thread_counts_and_reruns() {
    let dir = TempDir::new().unwrap();
    let spde = write_config(&dir, "spde.json", &small_spde(json!({"kind": "eigen"})));
    let runs: Vec<(&str, &str, PathBuf)> = vec![
        ("chain", "estimate", example("chain_linear.json")),
        ("levy", "verify", example("levy_uniform.json")),
        ("spde", "run", spde),
    ];
    for (a, b, cfg) in &runs {
        let mut hashes = Vec::new();
        for threads in ["1", "8"] {
            let out = dir.path().join(format!("{a}-{threads}"));
            let o = run_in(
                &out,
                &[
                    a,
                    b,
                    "--config",
                    cfg.to_str().unwrap(),
                    "--threads",
                    threads,
                ],
            );
            assert!(
                matches!(code(&o), 0 | 3),
                "{a}: {}",
                String::from_utf8_lossy(&o.stderr)
            );
            hashes.push(output_hashes(&out));
        }
        assert_eq!(hashes[0], hashes[1], "{a} {b}");
        let first = dir.path().join(format!("{a}-1"));
        let again = dir.path().join(format!("{a}-again"));
        let effective = first.join("config.json");
        run_in(&again, &[a, b, "--config", effective.to_str().unwrap()]);
        assert_eq!(output_hashes(&again), hashes[0], "{a} {b} rerun");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let cfg = example("levy_uniform.json");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_in(&a, &["levy", "verify", "--config", cfg.to_str().unwrap()]);
    run_in(
        &b,
        &[
            "levy",
            "verify",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "99",
        ],
    );
    assert_eq!(read_json(&b.join("manifest.json"))["seed"], 99);
    assert_eq!(read_json(&b.join("config.json"))["seed"], 99);
    assert_ne!(
        fs::read(a.join("kunita.json")).unwrap(),
        fs::read(b.join("kunita.json")).unwrap()
    );
}

#[test]
fn example_configs_match_schemas() {
    let pairs = [
        ("modulus_logpower.json", "modulus_check.schema.json"),
        ("modulus_power.json", "modulus_check.schema.json"),
        ("chain_linear.json", "chain_estimate.schema.json"),
        ("chain_brownian.json", "chain_estimate.schema.json"),
        ("levy_uniform.json", "levy_verify.schema.json"),
        ("spde_eigen.json", "spde_run.schema.json"),
        ("spde_zero.json", "spde_run.schema.json"),
    ];
    for (cfg, schema) in pairs {
        let v = validator(schema);
        let mut doc = read_json(&example(cfg));
        assert!(v.is_valid(&doc), "{cfg}");
        doc["unexpected"] = json!(true);
        assert!(!v.is_valid(&doc), "{cfg} accepts unknown keys");
    }
    assert!(
        validator("spde_run.schema.json").is_valid(&small_spde(json!({
            "kind": "combination",
            "terms": [
                {"weight": 0.5, "forcing": {"kind": "eigen"}},
                {"weight": 1.0, "forcing": {
                    "kind": "separable",
                    "time": {"coef": 1.0, "exponent": 0.5},
                    "mark": {"kind": "identity"},
                    "space": {"kind": "gaussian", "width": 1.0}
                }}
            ]
        })))
    );
}

#[test]
fn emitted_configs_match_schemas() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (
            "modulus",
            "check",
            "modulus_power.json",
            "modulus_check.schema.json",
        ),
        (
            "chain",
            "estimate",
            "chain_linear.json",
            "chain_estimate.schema.json",
        ),
        (
            "levy",
            "verify",
            "levy_uniform.json",
            "levy_verify.schema.json",
        ),
    ];
    for (a, b, cfg, schema) in cases {
        let out = dir.path().join(a);
        run_in(&out, &[a, b, "--config", example(cfg).to_str().unwrap()]);
        assert!(
            validator(schema).is_valid(&read_json(&out.join("config.json"))),
            "{a}"
        );
    }
    let spde = write_config(&dir, "spde.json", &small_spde(json!({"kind": "zero"})));
    let out = dir.path().join("spde");
    run_in(&out, &["spde", "run", "--config", spde.to_str().unwrap()]);
    assert!(validator("spde_run.schema.json").is_valid(&read_json(&out.join("config.json"))));
}
