use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fgg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fgg")).args(args).env_remove("FGG_LOG").output().expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("run_manifest.json")).unwrap()).unwrap()
}

#[test]
fn fit_writes_one_row_per_target() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fgg(&["fit", "--targets", "2,4,6,8", "--layer", "fgg", "--seed", "7", "--out", &out_arg(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&tmp.path().join("fit.csv")), 4);
    assert_eq!(data_rows(&tmp.path().join("fit_unclipped.csv")), 4);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[ok] fgg_ratio_8_to_4"), "{stdout}");

    let m = manifest(tmp.path());
    assert_eq!(m["experiment"], "fit");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config"]["layers"], serde_json::json!(["fgg"]));
    assert_eq!(m["config"]["budget"], 1_000_000);
    assert!(m["version"]["lorentz-fgg"].is_string());
    assert!(m["timestamp"].is_string());
    let defaulted: Vec<&str> = m["defaulted"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(defaulted.contains(&"learning_rate") && !defaulted.contains(&"targets"));
}

#[test]
fn repeated_runs_give_identical_csv() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let common = ["fit", "--targets", "0.5,1.5", "--budget", "3000", "--skip-unclipped", "--seed", "11"];
    let run = |dir: &Path, threads: &str| {
        let mut args = common.to_vec();
        let out = out_arg(dir);
        args.extend(["--threads", threads, "--out", &out]);
        assert!(fgg(&args).status.success());
    };
    run(a.path(), "1");
    run(b.path(), "3");
    assert_eq!(fs::read(a.path().join("fit.csv")).unwrap(), fs::read(b.path().join("fit.csv")).unwrap());
    assert!(!b.path().join("fit_unclipped.csv").exists());

    let (mut ma, mut mb) = (manifest(a.path()), manifest(b.path()));
    for m in [&mut ma, &mut mb] {
        let obj = m.as_object_mut().unwrap();
        for key in ["timestamp", "out", "threads"] {
            obj.remove(key);
        }
    }
    assert_eq!(ma, mb);
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "seed = 5\nkappa = 0.5\n[fit]\ntargets = [1, 2]\nbudget = 2000\nclip_norm = false\n").unwrap();
    let out = tmp.path().join("out");
    let o = fgg(&["fit", "--config", cfg.to_str().unwrap(), "--budget", "2500", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["seed"], 5);
    assert_eq!(m["config"]["kappa"], 0.5);
    assert_eq!(m["config"]["budget"], 2500);
    assert!(m["config"]["clip_norm"].is_null());
    assert_eq!(data_rows(&out.join("fit.csv")), 4);
    assert!(!out.join("fit_unclipped.csv").exists(), "no comparison run when clipping is off");
}

#[test]
fn bad_configuration_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[tree]\ndepth = 3\nwidth = 2\n").unwrap();
    let o = fgg(&["tree", "--config", cfg.to_str().unwrap(), "--out", &out_arg(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("width"), "{err}");

    let out = out_arg(tmp.path());
    for args in [
        vec!["fit", "--targets", "-1", "--out", &out],
        vec!["fit", "--set", "learning_rate=-2", "--out", &out],
        vec!["bench", "--reps", "10", "--out", &out],
        vec!["verify", "--kappa", "0.5", "--out", &out],
        vec!["profile", "--no-such-flag"],
    ] {
        assert_eq!(fgg(&args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn experiment_failure_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fgg(&["tree", "--set", "calibration_cap=1", "--out", &out_arg(tmp.path())]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bench_covers_every_variant_and_dim() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fgg(&[
        "bench",
        "--dims",
        "16,256,4096",
        "--batch",
        "2",
        "--set",
        "min_sample_ns=20000",
        "--out",
        &out_arg(tmp.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("bench.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("variant,dim,batch,median_ns,ratio"));
    assert_eq!(csv.lines().count() - 1, 12);
}

#[test]
fn verify_reports_each_check() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fgg(&[
        "verify",
        "--no-bench",
        "--cases",
        "300",
        "--set",
        "oracle_instances=3",
        "--set",
        "oracle_samples=20000",
        "--set",
        "forward_cases=30",
        "--set",
        "gradient_cases=6",
        "--out",
        &out_arg(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let lines = stdout.lines().filter(|l| l.starts_with("[ok]")).count();
    assert_eq!(lines, data_rows(&tmp.path().join("verify.csv")));
    assert!(lines >= 15, "{stdout}");
    assert!(!stdout.contains("[FAIL]"));
}

#[test]
fn tree_and_profile_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(tmp.path());
    assert!(fgg(&["tree", "--depth", "2", "--steps-per-level", "20", "--out", &out]).status.success());
    let csv = fs::read_to_string(tmp.path().join("distortion.csv")).unwrap();
    assert!(csv.starts_with("arity,depth,layer_kind,mean_distortion,worst_distortion,scale,steps\n"));
    assert_eq!(csv.lines().count() - 1, 2);

    assert!(fgg(&["profile", "--epochs", "1", "--layer", "chen", "--out", &out]).status.success());
    let csv = fs::read_to_string(tmp.path().join("profile.csv")).unwrap();
    assert!(csv.starts_with("layer_kind,layer_index,stage,mean_hyperbolic_norm\n"));
    assert_eq!(csv.lines().count() - 1, 1 + 3 * 4);
}

#[test]
fn model_files_round_trip_through_the_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    for binary in [false, true] {
        let mut init = vec!["model", "init", "--widths", "3,5,2", "--seed", "4", "--out"];
        let (m, c, i) = (p("m.json"), p("c.json"), p("i.json"));
        init.push(&m);
        if binary {
            init.push("--binary");
        }
        assert!(fgg(&init).status.success());
        assert!(fgg(&["model", "cache", &m, "--out", &c]).status.success());
        assert!(fgg(&["model", "invert", &c, "--out", &i]).status.success());

        let outputs = |path: &str| {
            let o = fgg(&["model", "inspect", path, "--batch", "3"]);
            assert!(o.status.success());
            let text = String::from_utf8(o.stdout).unwrap();
            let inference_only = text.contains("inference only: true");
            let rows: Vec<Vec<f64>> = text
                .lines()
                .filter(|l| l.contains(',') && !l.contains(':'))
                .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
                .collect();
            (inference_only, rows)
        };
        let (base_io, base) = outputs(&m);
        let (cached_io, cached) = outputs(&c);
        let (inv_io, inverted) = outputs(&i);
        assert!(!base_io && cached_io && !inv_io);
        assert_eq!(base.len(), 3);
        assert_eq!(base, cached, "cached forward is bit-identical");
        for (a, b) in base.iter().flatten().zip(inverted.iter().flatten()) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    let m = p("m.json");
    let text = fs::read_to_string(&m).unwrap();
    fs::write(&m, text.replace("\"format_version\": 1", "\"format_version\": 2")).unwrap();
    assert_eq!(fgg(&["model", "inspect", &m]).status.code(), Some(1));
    fs::write(&m, text.replacen("\"d_in\": 3", "\"d_in\": 4", 1)).unwrap();
    let o = fgg(&["model", "inspect", &m]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn log_level_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fgg"))
        .args(["fit", "--targets", "0", "--budget", "200", "--skip-unclipped", "--out", &out_arg(tmp.path())])
        .env("FGG_LOG", "info")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("not set; using the default"));
}
