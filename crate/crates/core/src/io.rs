//! Versioned JSON model files.
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "checksum": "<sha256 hex of the serialized payload>",
//!   "payload": {
//!     "kappa": 1.0,
//!     "encoding": "text" | "le_f64_hex",
//!     "layers": [
//!       { "d_in": 2, "d_out": 3, "activation": "relu/lorentzian",
//!         "params": { "kind": "weights", "g": [..], "a": [..], "b": [..] }
//!                 | { "kind": "cache", "v": [..] },
//!         "bn_running_mean": [..] | null }
//!     ]
//!   }
//! }
//! ```
//!
//! Matrices are flattened row-major. With `le_f64_hex` every array is a hex string of
//! little-endian IEEE-754 doubles instead of a JSON number list. Both encodings round
//! trip bit-exactly.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grad::{Trainable, TrainableFgg};
use crate::layers::{Activation, FggLinear, LayerCache, MeanOnlyBatchNorm, WeightNorm};
use crate::lorentz::Curvature;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Encoding {
    #[default]
    #[serde(rename = "text")]
    Text,
    #[serde(rename = "le_f64_hex")]
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StoredLayer {
    Fgg { layer: FggLinear, bn_running_mean: Option<Array1<f64>> },
    /// Inference only until inverted.
    Cached(LayerCache),
}

impl StoredLayer {
    pub fn d_in(&self) -> usize {
        match self {
            StoredLayer::Fgg { layer, .. } => layer.d_in(),
            StoredLayer::Cached(c) => c.d_in(),
        }
    }

    pub fn d_out(&self) -> usize {
        match self {
            StoredLayer::Fgg { layer, .. } => layer.d_out(),
            StoredLayer::Cached(c) => c.d_out(),
        }
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            StoredLayer::Fgg { layer, bn_running_mean: None } => layer.forward(x),
            StoredLayer::Fgg { layer, bn_running_mean: Some(mean) } => {
                let mut t = TrainableFgg::new(layer.clone(), true);
                t.bn = Some(MeanOnlyBatchNorm { running_mean: mean.clone(), ..MeanOnlyBatchNorm::new(mean.len()) });
                t.infer(x)
            }
            StoredLayer::Cached(c) => c.forward(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub k: Curvature,
    pub layers: Vec<StoredLayer>,
}

impl Model {
    pub fn new(k: Curvature, layers: Vec<StoredLayer>) -> Result<Self> {
        let m = Model { k, layers };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for pair in self.layers.windows(2) {
            if pair[0].d_out() != pair[1].d_in() {
                return Err(Error::DimensionMismatch { expected: pair[0].d_out(), found: pair[1].d_in() });
            }
        }
        for l in &self.layers {
            let lk = match l {
                StoredLayer::Fgg { layer, .. } => layer.k,
                StoredLayer::Cached(c) => c.curvature(),
            };
            if lk != self.k {
                return Err(Error::CurvatureMismatch(self.k.value(), lk.value()));
            }
        }
        Ok(())
    }

    pub fn is_inference_only(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, StoredLayer::Cached(_)))
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut cur = x.to_owned();
        for l in &self.layers {
            cur = l.forward(cur.view())?;
        }
        Ok(cur)
    }

    /// Replaces every plain layer with its cache. Normalized layers cannot be cached.
    pub fn to_cached(&self) -> Result<Model> {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                StoredLayer::Fgg { layer, bn_running_mean: None } => Ok(StoredLayer::Cached(layer.build_cache()?)),
                StoredLayer::Fgg { .. } => Err(Error::InvalidConfig("cannot cache a layer with batch normalization".into())),
                StoredLayer::Cached(c) => Ok(StoredLayer::Cached(c.clone())),
            })
            .collect::<Result<_>>()?;
        Ok(Model { k: self.k, layers })
    }

    /// Recovers trainable layers from caches.
    pub fn invert_caches(&self) -> Result<Model> {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                StoredLayer::Cached(c) => {
                    let (w, b) = c.invert()?;
                    Ok(StoredLayer::Fgg {
                        layer: FggLinear::from_weights(w.view(), b, c.activation(), c.curvature())?,
                        bn_running_mean: None,
                    })
                }
                other => Ok(other.clone()),
            })
            .collect::<Result<_>>()?;
        Ok(Model { k: self.k, layers })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum FloatArray {
    Text(Vec<f64>),
    Hex(String),
}

impl FloatArray {
    fn encode(values: impl Iterator<Item = f64>, enc: Encoding) -> Self {
        match enc {
            Encoding::Text => FloatArray::Text(values.collect()),
            Encoding::Binary => {
                let bytes: Vec<u8> = values.flat_map(f64::to_le_bytes).collect();
                FloatArray::Hex(hex::encode(bytes))
            }
        }
    }

    fn decode(&self, expected: usize, field: &str) -> Result<Vec<f64>> {
        let values = match self {
            FloatArray::Text(v) => v.clone(),
            FloatArray::Hex(s) => {
                let bytes = hex::decode(s).map_err(|e| Error::Corrupt(format!("{field}: {e}")))?;
                if bytes.len() % 8 != 0 {
                    return Err(Error::Corrupt(format!("{field}: blob length {} not a multiple of 8", bytes.len())));
                }
                bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect()
            }
        };
        if values.len() != expected {
            return Err(Error::Corrupt(format!("{field}: expected {expected} values, found {}", values.len())));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ParamsRecord {
    Weights { g: FloatArray, a: FloatArray, b: FloatArray },
    Cache { v: FloatArray },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    d_in: usize,
    d_out: usize,
    activation: String,
    params: ParamsRecord,
    bn_running_mean: Option<FloatArray>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Payload {
    kappa: f64,
    encoding: Encoding,
    layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format_version: u32,
    checksum: String,
    payload: Payload,
}

fn checksum(payload: &Payload) -> Result<String> {
    let bytes = serde_json::to_vec(payload).map_err(|e| Error::Corrupt(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn encode_layer(l: &StoredLayer, enc: Encoding) -> LayerRecord {
    let f = |v: &mut dyn Iterator<Item = &f64>| FloatArray::encode(v.copied(), enc);
    match l {
        StoredLayer::Fgg { layer, bn_running_mean } => LayerRecord {
            d_in: layer.d_in(),
            d_out: layer.d_out(),
            activation: layer.activation.to_string(),
            params: ParamsRecord::Weights {
                g: f(&mut layer.weights.g.iter()),
                a: f(&mut layer.weights.a.iter()),
                b: f(&mut layer.bias.iter()),
            },
            bn_running_mean: bn_running_mean.as_ref().map(|m| f(&mut m.iter())),
        },
        StoredLayer::Cached(c) => LayerRecord {
            d_in: c.d_in(),
            d_out: c.d_out(),
            activation: c.activation().to_string(),
            params: ParamsRecord::Cache { v: f(&mut c.normals().iter()) },
            bn_running_mean: None,
        },
    }
}

fn decode_layer(r: &LayerRecord, k: Curvature, idx: usize) -> Result<StoredLayer> {
    let activation: Activation = r.activation.parse()?;
    let (d_in, d_out) = (r.d_in, r.d_out);
    let field = |name: &str| format!("layers[{idx}].{name}");
    match &r.params {
        ParamsRecord::Weights { g, a, b } => {
            let g = Array1::from(g.decode(d_out, &field("g"))?);
            let a = Array2::from_shape_vec((d_out, d_in), a.decode(d_out * d_in, &field("a"))?)
                .map_err(|e| Error::Corrupt(e.to_string()))?;
            let b = Array1::from(b.decode(d_out, &field("b"))?);
            let layer = FggLinear::new(WeightNorm::new(g, a)?, b, activation, k)?;
            let bn_running_mean = match &r.bn_running_mean {
                Some(m) => Some(Array1::from(m.decode(d_out, &field("bn_running_mean"))?)),
                None => None,
            };
            Ok(StoredLayer::Fgg { layer, bn_running_mean })
        }
        ParamsRecord::Cache { v } => {
            if r.bn_running_mean.is_some() {
                return Err(Error::Corrupt(format!("{}: cache layers carry no normalization", field("bn_running_mean"))));
            }
            let v = Array2::from_shape_vec((d_out, d_in + 1), v.decode(d_out * (d_in + 1), &field("v"))?)
                .map_err(|e| Error::Corrupt(e.to_string()))?;
            Ok(StoredLayer::Cached(LayerCache::new(v, k, activation)?))
        }
    }
}

pub fn model_to_string(model: &Model, enc: Encoding) -> Result<String> {
    let payload = Payload {
        kappa: model.k.value(),
        encoding: enc,
        layers: model.layers.iter().map(|l| encode_layer(l, enc)).collect(),
    };
    let doc = Document { format_version: FORMAT_VERSION, checksum: checksum(&payload)?, payload };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Corrupt(e.to_string()))
}

pub fn model_from_str(text: &str) -> Result<Model> {
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Corrupt(e.to_string()))?;
    let version = raw
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Corrupt("missing format_version".into()))?;
    if version != FORMAT_VERSION as u64 {
        return Err(Error::UnsupportedVersion { found: version as u32, supported: FORMAT_VERSION });
    }
    let doc: Document = serde_json::from_value(raw).map_err(|e| Error::Corrupt(e.to_string()))?;
    if checksum(&doc.payload)? != doc.checksum {
        return Err(Error::Corrupt("checksum mismatch".into()));
    }
    let k = Curvature::new(doc.payload.kappa)?;
    let layers = doc
        .payload
        .layers
        .iter()
        .enumerate()
        .map(|(i, r)| decode_layer(r, k, i))
        .collect::<Result<_>>()?;
    Model::new(k, layers)
}

pub fn save_model(path: impl AsRef<Path>, model: &Model, enc: Encoding) -> Result<()> {
    fs::write(path, model_to_string(model, enc)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    model_from_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::ActivationBase;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(seed: u64) -> Model {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = Curvature::new(0.7).unwrap();
        let mut l1 = FggLinear::init(&mut rng, 3, 4, Activation::default(), k);
        l1.bias = crate::sampling::gaussian_vector(&mut rng, 4, 1.0);
        let l2 = FggLinear::init(&mut rng, 4, 2, Activation::plain(ActivationBase::Tanh), k);
        Model::new(
            k,
            vec![
                StoredLayer::Fgg { layer: l1, bn_running_mean: Some(Array1::from(vec![0.1, -0.2, 0.3, 0.0])) },
                StoredLayer::Fgg { layer: l2, bn_running_mean: None },
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_both_encodings() {
        let m = model(1);
        for enc in [Encoding::Text, Encoding::Binary] {
            let back = model_from_str(&model_to_string(&m, enc).unwrap()).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let text = model_to_string(&model(2), Encoding::Text).unwrap().replacen("\"format_version\": 1", "\"format_version\": 7", 1);
        assert_eq!(model_from_str(&text), Err(Error::UnsupportedVersion { found: 7, supported: 1 }));
    }

    #[test]
    fn tampered_payload_rejected() {
        let text = model_to_string(&model(3), Encoding::Text).unwrap().replacen("\"kappa\": 0.7", "\"kappa\": 0.8", 1);
        assert!(matches!(model_from_str(&text), Err(Error::Corrupt(_))));
    }

    #[test]
    fn normalized_layer_cannot_be_cached() {
        assert!(model(4).to_cached().is_err());
    }
}
