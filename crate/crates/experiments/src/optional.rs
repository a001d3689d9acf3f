//! Serde helper for optional positive settings in config files. A number enables the
//! setting; `false` disables it. A missing key keeps the default, so TOML, which has
//! no null, still needs a way to say "off".

use serde::{Deserialize, Deserializer};

#[derive(Deserialize)]
#[serde(untagged)]
enum Raw {
    Value(f64),
    Flag(bool),
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    match Option::<Raw>::deserialize(d)? {
        None | Some(Raw::Flag(false)) => Ok(None),
        Some(Raw::Value(v)) => Ok(Some(v)),
        Some(Raw::Flag(true)) => Err(serde::de::Error::custom("expected a number or `false`")),
    }
}
