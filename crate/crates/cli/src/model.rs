use std::path::Path;

use fgg_experiments::seeds::cell_rng;
use lorentz_fgg::io::{load_model, save_model, Encoding, Model, StoredLayer};
use lorentz_fgg::layers::{Activation, FggLinear};
use lorentz_fgg::lorentz::Curvature;
use lorentz_fgg::sampling::random_batch;

use crate::args::ModelCommand;
use crate::error::{CliError, Result};

fn load(path: &Path) -> Result<Model> {
    load_model(path).map_err(|e| match CliError::from(e) {
        CliError::Invalid(m) => CliError::Invalid(format!("{}: {m}", path.display())),
        CliError::Runtime(m) => CliError::Invalid(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Keeps the encoding of the file the model came from.
fn encoding_of(path: &Path) -> Encoding {
    match std::fs::read_to_string(path) {
        Ok(s) if s.contains("\"le_f64_hex\"") => Encoding::Binary,
        _ => Encoding::Text,
    }
}

pub fn run(cmd: &ModelCommand) -> Result<()> {
    match cmd {
        ModelCommand::Init { widths, activation, kappa, seed, binary, out } => {
            if widths.len() < 2 || widths.contains(&0) {
                return Err(CliError::Invalid("--widths needs at least two positive entries".into()));
            }
            let k = Curvature::new(*kappa)?;
            let act: Activation = activation.parse()?;
            let mut rng = cell_rng(*seed, "model/init");
            let layers = widths
                .windows(2)
                .map(|w| StoredLayer::Fgg { layer: FggLinear::init(&mut rng, w[0], w[1], act, k), bn_running_mean: None })
                .collect();
            let model = Model::new(k, layers)?;
            let enc = if *binary { Encoding::Binary } else { Encoding::Text };
            save_model(out, &model, enc)?;
            println!("wrote {} layers to {}", widths.len() - 1, out.display());
        }
        ModelCommand::Cache { input, out } => {
            let model = load(input)?.to_cached()?;
            save_model(out, &model, encoding_of(input))?;
            println!("wrote cached model to {}", out.display());
        }
        ModelCommand::Invert { input, out } => {
            let model = load(input)?.invert_caches()?;
            save_model(out, &model, encoding_of(input))?;
            println!("wrote trainable model to {}", out.display());
        }
        ModelCommand::Inspect { input, batch, seed } => {
            let model = load(input)?;
            println!("kappa {}", model.k.value());
            println!("inference only: {}", model.is_inference_only());
            for (i, l) in model.layers.iter().enumerate() {
                let kind = match l {
                    StoredLayer::Fgg { bn_running_mean: Some(_), .. } => "fgg+bn",
                    StoredLayer::Fgg { .. } => "fgg",
                    StoredLayer::Cached(_) => "cached",
                };
                println!("layer {i}: {kind} {} -> {}", l.d_in(), l.d_out());
            }
            let d_in = model.layers.first().map_or(0, |l| l.d_in());
            let mut rng = cell_rng(*seed, "model/inspect");
            let x = random_batch(&mut rng, *batch, d_in, model.k, 1.0);
            let y = model.forward(x.view())?;
            for row in y.rows() {
                let coords: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
                println!("{}", coords.join(","));
            }
        }
    }
    Ok(())
}
