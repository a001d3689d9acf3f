use std::fs;
use std::path::{Path, PathBuf};

use fgg_experiments::bench::{caching_benchmark, BenchConfig};
use fgg_experiments::fit::{hyperplane_fit_experiment, FitConfig, FitRecord};
use fgg_experiments::output::{write_bench, write_distortion, write_fit, write_profile};
use fgg_experiments::profile::{depth_profile_experiment, ProfileConfig};
use fgg_experiments::tree::{tree_embedding_experiment, TreeConfig};
use fgg_experiments::verify::{fit_checks, profile_checks, run_suite, tree_checks, CheckResult, VerifyConfig};
use fgg_experiments::with_threads;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::args::{BenchArgs, FitArgs, Overrides, ProfileArgs, TreeArgs, VerifyArgs};
use crate::config::{resolve, Resolved};
use crate::error::{CliError, Result};

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

trait Validate {
    fn check(&self) -> fgg_experiments::Result<()>;
}

macro_rules! validate_via {
    ($($t:ty),*) => {$(
        impl Validate for $t {
            fn check(&self) -> fgg_experiments::Result<()> {
                self.validate()
            }
        }
    )*};
}
validate_via!(FitConfig, TreeConfig, ProfileConfig, BenchConfig);

impl Validate for VerifyConfig {
    fn check(&self) -> fgg_experiments::Result<()> {
        Ok(())
    }
}

/// Resolves and validates the settings, then makes sure the output directory exists.
fn prepare<T, A>(section: &str, args: &A) -> Result<Resolved<T>>
where
    T: Default + Serialize + DeserializeOwned + Validate,
    A: Overrides,
{
    let r: Resolved<T> = resolve(section, args.common(), args.overrides())?;
    r.config.check()?;
    fs::create_dir_all(&r.out)
        .map_err(|e| CliError::Invalid(format!("output directory {}: {e}", r.out.display())))?;
    for key in &r.defaulted {
        log::info!("[{section}] {key} not set; using the default");
    }
    Ok(r)
}

fn threaded<T: Send>(threads: usize, f: impl FnOnce() -> fgg_experiments::Result<T> + Send) -> Result<T> {
    Ok(with_threads(threads, f)??)
}

fn write_manifest<T: Serialize>(experiment: &str, r: &Resolved<T>, outputs: &[&str], extra: serde_json::Value) -> Result<()> {
    let path = r.out.join("run_manifest.json");
    let manifest = json!({
        "experiment": experiment,
        "version": {
            "fgg-cli": env!("CARGO_PKG_VERSION"),
            "fgg-experiments": fgg_experiments::VERSION,
            "lorentz-fgg": lorentz_fgg::VERSION,
        },
        "timestamp": chrono::Utc::now().to_rfc3339(),
        "seed": r.seed,
        "threads": r.threads,
        "out": r.out,
        "config_file": r.config_file,
        "config": &r.config,
        "defaulted": r.defaulted,
        "outputs": outputs,
        "extra": extra,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| io_err(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

fn print_checks(checks: &[CheckResult]) {
    for c in checks {
        println!("[{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
}

fn print_fit(label: &str, records: &[FitRecord]) {
    println!("{label}");
    for r in records {
        let status = if r.converged {
            "converged"
        } else if r.diverged {
            "diverged"
        } else {
            "budget exhausted"
        };
        println!("  {:<5} r={:<4} iterations={:<8} {status}", r.layer_kind, r.target_distance, r.iterations);
    }
}

/// Runs the configured fit and, when clipping is on, the same fit without clipping.
pub fn fit(args: &FitArgs) -> Result<()> {
    let r: Resolved<FitConfig> = prepare("fit", args)?;
    let records = threaded(r.threads, || hyperplane_fit_experiment(&r.config, r.seed))?;
    let path = r.out.join("fit.csv");
    write_fit(&path, &records)?;
    print_fit(&format!("clip_norm = {:?}", r.config.clip_norm), &records);
    print_checks(&fit_checks(&records, r.config.budget));

    let mut outputs = vec!["fit.csv"];
    let mut unclipped_identical = None;
    if r.config.clip_norm.is_some() && !args.skip_unclipped {
        let cfg = FitConfig { clip_norm: None, ..r.config.clone() };
        let free = threaded(r.threads, || hyperplane_fit_experiment(&cfg, r.seed))?;
        write_fit(&r.out.join("fit_unclipped.csv"), &free)?;
        print_fit("without clipping", &free);
        print_checks(&fit_checks(&free, cfg.budget));
        let same = free.iter().zip(&records).all(|(a, b)| a.iterations == b.iterations && a.converged == b.converged);
        unclipped_identical = Some(same);
        outputs.push("fit_unclipped.csv");
    }
    write_manifest("fit", &r, &outputs, json!({ "unclipped_matches_clipped": unclipped_identical }))
}

pub fn tree(args: &TreeArgs) -> Result<()> {
    let r: Resolved<TreeConfig> = prepare("tree", args)?;
    let exp = threaded(r.threads, || tree_embedding_experiment(&r.config, r.seed))?;
    let reports: Vec<_> = exp.calibration.iter().chain(&exp.runs).map(|e| e.report.clone()).collect();
    write_distortion(&r.out.join("distortion.csv"), &reports)?;
    if let Some(c) = &exp.calibration {
        println!(
            "calibration: depth {} reached {:.4} after {} steps",
            c.report.depth, c.report.mean_relative_distortion, c.report.steps_used
        );
    }
    println!("budget: {} steps per level, {} in total", exp.steps_per_level, exp.budget);
    for run in &exp.runs {
        let rep = &run.report;
        println!(
            "  {:<5} mean {:.4} worst {:.4} scale {:.4} max leaf norm {:.4}",
            rep.layer_kind, rep.mean_relative_distortion, rep.worst_pair_distortion, rep.scale, rep.max_leaf_norm
        );
    }
    print_checks(&tree_checks(&exp, r.config.target_distortion));
    let extra = json!({ "steps_per_level": exp.steps_per_level, "budget": exp.budget });
    write_manifest("tree", &r, &["distortion.csv"], extra)
}

pub fn profile(args: &ProfileArgs) -> Result<()> {
    let r: Resolved<ProfileConfig> = prepare("profile", args)?;
    let profiles = threaded(r.threads, || depth_profile_experiment(&r.config, r.seed))?;
    write_profile(&r.out.join("profile.csv"), &profiles)?;
    for p in &profiles {
        let norms: Vec<String> = p.linear_norms().iter().map(|n| format!("{n:.3}")).collect();
        println!(
            "  {:<5} accuracy {:.3} loss {:.4} linear norms [{}]",
            p.layer_kind,
            p.train_accuracy,
            p.final_loss,
            norms.join(", ")
        );
    }
    print_checks(&profile_checks(&profiles));
    let summary: Vec<_> = profiles
        .iter()
        .map(|p| json!({ "layer_kind": p.layer_kind, "train_steps": p.train_steps, "train_accuracy": p.train_accuracy, "final_loss": p.final_loss }))
        .collect();
    write_manifest("profile", &r, &["profile.csv"], json!({ "training": summary }))
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    let r: Resolved<BenchConfig> = prepare("bench", args)?;
    // Timing runs on the calling thread; --threads is recorded but unused.
    let records = caching_benchmark(&r.config, r.seed)?;
    write_bench(&r.out.join("bench.csv"), &records)?;
    for rec in &records {
        println!(
            "  d={:<5} {:<17} {:>14.0} ns  x{:.3}",
            rec.dim, rec.variant, rec.median_ns_per_forward, rec.ratio_to_euclidean
        );
    }
    write_manifest("bench", &r, &["bench.csv"], json!({}))
}

pub fn verify(args: &VerifyArgs) -> Result<()> {
    let r: Resolved<VerifyConfig> = prepare("verify", args)?;
    let checks = run_suite(&r.config, r.seed);
    let path: PathBuf = r.out.join("verify.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    w.write_record(["criterion", "name", "passed", "detail"]).map_err(|e| io_err(&path, e))?;
    for c in &checks {
        w.write_record([c.criterion.to_string(), c.name.to_string(), c.passed.to_string(), c.detail.clone()])
            .map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    print_checks(&checks);
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    write_manifest("verify", &r, &["verify.csv"], json!({ "failed": failed }))?;
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}
