//! CSV writers. Floats use 17 significant digits so they round-trip exactly.

use std::fs::File;
use std::path::Path;

use crate::bench::BenchRecord;
use crate::fit::FitRecord;
use crate::profile::DepthProfile;
use crate::tree::DistortionReport;
use crate::Result;

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_fit(path: &Path, records: &[FitRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["target_distance", "layer_kind", "iterations", "converged"])?;
    for r in records {
        w.write_record([
            fmt_f64(r.target_distance),
            r.layer_kind.to_string(),
            r.iterations.to_string(),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_distortion(path: &Path, reports: &[DistortionReport]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["arity", "depth", "layer_kind", "mean_distortion", "worst_distortion", "scale", "steps"])?;
    for r in reports {
        w.write_record([
            r.arity.to_string(),
            r.depth.to_string(),
            r.layer_kind.to_string(),
            fmt_f64(r.mean_relative_distortion),
            fmt_f64(r.worst_pair_distortion),
            fmt_f64(r.scale),
            r.steps_used.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per stage of every profiled stack, led by the stack's layer kind.
pub fn write_profile(path: &Path, profiles: &[DepthProfile]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["layer_kind", "layer_index", "stage", "mean_hyperbolic_norm"])?;
    for p in profiles {
        for r in &p.rows {
            w.write_record([
                p.layer_kind.to_string(),
                r.layer_index.to_string(),
                r.stage.to_string(),
                fmt_f64(r.mean_hyperbolic_norm),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_bench(path: &Path, records: &[BenchRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["variant", "dim", "batch", "median_ns", "ratio"])?;
    for r in records {
        w.write_record([
            r.variant.to_string(),
            r.dim.to_string(),
            r.batch.to_string(),
            fmt_f64(r.median_ns_per_forward),
            fmt_f64(r.ratio_to_euclidean),
        ])?;
    }
    w.flush()?;
    Ok(())
}
