//! Resolution of one experiment's settings. Later sources win:
//! built-in defaults, the experiment's table in the config file, flags, then `--set`.
//! A top-level `kappa` in the file applies to sections that do not set their own.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use fgg_experiments::bench::BenchConfig;
use fgg_experiments::fit::FitConfig;
use fgg_experiments::profile::ProfileConfig;
use fgg_experiments::tree::TreeConfig;
use fgg_experiments::verify::VerifyConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::args::CommonArgs;
use crate::error::{CliError, Result};

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_OUT: &str = "results";

/// Layout of a config file. Sections are checked here only so that unknown keys are
/// reported with their line; values are resolved from the raw table.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct FileConfig {
    seed: Option<u64>,
    kappa: Option<f64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    fit: Option<FitConfig>,
    tree: Option<TreeConfig>,
    profile: Option<ProfileConfig>,
    bench: Option<BenchConfig>,
    verify: Option<VerifyConfig>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Resolved<T> {
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
    pub config_file: Option<PathBuf>,
    pub config: T,
    /// Settings that no source provided, so the built-in default applies.
    pub defaulted: Vec<String>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

fn read_file(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    toml::from_str::<FileConfig>(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    toml::from_str::<Table>(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Parses `key=value`; the value is read as TOML and falls back to a plain string.
pub fn parse_set(s: &str) -> Result<(String, Value)> {
    let (k, v) = s.split_once('=').ok_or_else(|| invalid(format!("--set expects KEY=VALUE, got `{s}`")))?;
    let key = k.trim();
    if key.is_empty() {
        return Err(invalid(format!("--set has an empty key in `{s}`")));
    }
    let value = toml::from_str::<Table>(&format!("v = {v}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(v.trim().to_string()));
    Ok((key.to_string(), value))
}

/// Resolves the `section` settings of type `T`.
pub fn resolve<T>(section: &str, common: &CommonArgs, flags: Table) -> Result<Resolved<T>>
where
    T: Default + Serialize + DeserializeOwned,
{
    let file = common.config.as_deref().map(read_file).transpose()?.unwrap_or_default();
    let default_keys = match serde_json::to_value(T::default()) {
        Ok(serde_json::Value::Object(m)) => m.keys().cloned().collect::<BTreeSet<_>>(),
        _ => BTreeSet::new(),
    };
    let takes_kappa = default_keys.contains("kappa");

    let mut table = match file.get(section) {
        Some(Value::Table(t)) => t.clone(),
        Some(_) => return Err(invalid(format!("`{section}` in the config file must be a table"))),
        None => Table::new(),
    };
    if let (Some(k), true) = (file.get("kappa"), takes_kappa) {
        table.entry("kappa").or_insert_with(|| k.clone());
    }
    if let Some(k) = common.kappa {
        if !takes_kappa {
            return Err(invalid(format!("`{section}` has no curvature setting; it draws its own")));
        }
        table.insert("kappa".into(), Value::Float(k));
    }
    table.extend(flags);
    for s in &common.sets {
        let (k, v) = parse_set(s)?;
        table.insert(k, v);
    }

    let defaulted = default_keys.iter().filter(|k| !table.contains_key(*k)).cloned().collect();
    let config = T::deserialize(Value::Table(table)).map_err(|e| invalid(format!("[{section}] {}", e.message())))?;

    let int = |key: &str| file.get(key).and_then(Value::as_integer);
    let seed = match common.seed {
        Some(s) => s,
        None => match int("seed") {
            Some(s) => u64::try_from(s).map_err(|_| invalid("seed must be non-negative"))?,
            None => DEFAULT_SEED,
        },
    };
    let threads = match common.threads {
        Some(t) => t,
        None => match int("threads") {
            Some(t) => usize::try_from(t).map_err(|_| invalid("threads must be non-negative"))?,
            None => 1,
        },
    };
    if threads == 0 {
        return Err(invalid("threads must be at least 1"));
    }
    let out = common
        .out
        .clone()
        .or_else(|| file.get("out").and_then(Value::as_str).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    Ok(Resolved { seed, threads, out, config_file: common.config.clone(), config, defaulted })
}
