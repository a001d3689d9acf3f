use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};

#[derive(Debug, Parser)]
#[command(name = "fgg", version, about = "Lorentz linear layer experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit single layers to hyperplanes at growing distances from the origin.
    Fit(FitArgs),
    /// Embed a complete tree with each layer under a shared step budget.
    Tree(TreeArgs),
    /// Train small stacks and record per-layer mean hyperbolic norms.
    Profile(ProfileArgs),
    /// Time cached, uncached and baseline forward passes.
    Bench(BenchArgs),
    /// Run the invariant suite and report each check.
    Verify(VerifyArgs),
    /// Create, cache, invert and inspect saved models.
    #[command(subcommand)]
    Model(ModelCommand),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Curvature magnitude.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for independent experiment cells.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Override any experiment setting, e.g. `--set learning_rate=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

/// Experiment flags that become config overrides.
pub trait Overrides {
    fn common(&self) -> &CommonArgs;
    fn overrides(&self) -> Table;
}

fn put<T: Into<Value>>(t: &mut Table, key: &str, v: Option<T>) {
    if let Some(v) = v {
        t.insert(key.into(), v.into());
    }
}

fn put_list<T: Clone + Into<Value>>(t: &mut Table, key: &str, v: &Option<Vec<T>>) {
    if let Some(v) = v {
        t.insert(key.into(), Value::Array(v.iter().cloned().map(Into::into).collect()));
    }
}

fn put_off(t: &mut Table, key: &str, off: bool) {
    if off {
        t.insert(key.into(), Value::Boolean(false));
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Target distances, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub targets: Option<Vec<f64>>,
    /// Layer kinds to fit, comma separated (fgg, chen).
    #[arg(long = "layer", value_delimiter = ',')]
    pub layers: Option<Vec<String>>,
    /// Iteration budget per cell.
    #[arg(long)]
    pub budget: Option<i64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, conflicts_with = "no_clip")]
    pub clip: Option<f64>,
    #[arg(long)]
    pub no_clip: bool,
    #[arg(long, conflicts_with = "no_momentum")]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub no_momentum: bool,
    /// Skip the comparison run without update clipping.
    #[arg(long)]
    pub skip_unclipped: bool,
}

impl Overrides for FitArgs {
    fn common(&self) -> &CommonArgs {
        &self.common
    }

    fn overrides(&self) -> Table {
        let mut t = Table::new();
        put_list(&mut t, "targets", &self.targets);
        put_list(&mut t, "layers", &self.layers);
        put(&mut t, "budget", self.budget);
        put(&mut t, "learning_rate", self.lr);
        put(&mut t, "clip_norm", self.clip);
        put_off(&mut t, "clip_norm", self.no_clip);
        put(&mut t, "momentum", self.momentum);
        put_off(&mut t, "momentum", self.no_momentum);
        t
    }
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub arity: Option<i64>,
    #[arg(long)]
    pub depth: Option<i64>,
    #[arg(long = "layer", value_delimiter = ',')]
    pub layers: Option<Vec<String>>,
    /// Fixed steps per tree level instead of calibrating on a shallower tree.
    #[arg(long)]
    pub steps_per_level: Option<i64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, conflicts_with = "no_clip")]
    pub clip: Option<f64>,
    #[arg(long)]
    pub no_clip: bool,
}

impl Overrides for TreeArgs {
    fn common(&self) -> &CommonArgs {
        &self.common
    }

    fn overrides(&self) -> Table {
        let mut t = Table::new();
        put(&mut t, "arity", self.arity);
        put(&mut t, "depth", self.depth);
        put_list(&mut t, "layers", &self.layers);
        put(&mut t, "steps_per_level", self.steps_per_level);
        put(&mut t, "learning_rate", self.lr);
        put(&mut t, "clip_norm", self.clip);
        put_off(&mut t, "clip_norm", self.no_clip);
        t
    }
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long = "layer", value_delimiter = ',')]
    pub layers: Option<Vec<String>>,
    /// Number of layers per stack.
    #[arg(long)]
    pub depth: Option<i64>,
    #[arg(long)]
    pub epochs: Option<i64>,
    #[arg(long)]
    pub lr: Option<f64>,
}

impl Overrides for ProfileArgs {
    fn common(&self) -> &CommonArgs {
        &self.common
    }

    fn overrides(&self) -> Table {
        let mut t = Table::new();
        put_list(&mut t, "layers", &self.layers);
        put(&mut t, "depth", self.depth);
        put(&mut t, "epochs", self.epochs);
        put(&mut t, "learning_rate", self.lr);
        t
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<i64>>,
    #[arg(long)]
    pub batch: Option<i64>,
    #[arg(long)]
    pub reps: Option<i64>,
}

impl Overrides for BenchArgs {
    fn common(&self) -> &CommonArgs {
        &self.common
    }

    fn overrides(&self) -> Table {
        let mut t = Table::new();
        put_list(&mut t, "dims", &self.dims);
        put(&mut t, "batch", self.batch);
        put(&mut t, "reps", self.reps);
        t
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Random cases for the geometry and sign checks.
    #[arg(long)]
    pub cases: Option<i64>,
    /// Skip the timing checks.
    #[arg(long)]
    pub no_bench: bool,
}

impl Overrides for VerifyArgs {
    fn common(&self) -> &CommonArgs {
        &self.common
    }

    fn overrides(&self) -> Table {
        let mut t = Table::new();
        put(&mut t, "cases", self.cases);
        put_off(&mut t, "bench", self.no_bench);
        t
    }
}

#[derive(Debug, Subcommand)]
pub enum ModelCommand {
    /// Write a randomly initialized FGG stack.
    Init {
        /// Layer widths including the input, e.g. `4,8,2`.
        #[arg(long, value_delimiter = ',', required = true)]
        widths: Vec<usize>,
        /// Activation as `base[/mode]`, e.g. `relu/lorentzian` or `tanh/plain`.
        #[arg(long, default_value = "relu/lorentzian")]
        activation: String,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Store arrays as little-endian hex instead of decimal text.
        #[arg(long)]
        binary: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace every layer with its inference cache.
    Cache {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover trainable parameters from cached layers.
    Invert {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a model's layers and run it on a seeded random batch.
    Inspect {
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}
