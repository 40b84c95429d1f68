//! Parameter checkpoints.
//!
//! A checkpoint is a UTF-8 JSON document:
//!
//! ```text
//! { "format": "matchlab-mlp", "version": 1,
//!   "net": { "sizes": [...], "weights": [[row-major layer 0], ...],
//!            "biases": [[...], ...], "dropout": 0.5,
//!            "heads": { "heads": [ { "name": "q", "len": 10 }, ... ] } } }
//! ```
//!
//! Floats are written in shortest round-trip form, so a reload is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::error::{Error, Result};

const FORMAT: &str = "matchlab-mlp";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    net: Mlp,
}

pub fn to_json(net: &Mlp) -> Result<String> {
    Ok(serde_json::to_string(&Checkpoint {
        format: FORMAT.into(),
        version: VERSION,
        net: net.clone(),
    })?)
}

pub fn from_json(text: &str) -> Result<Mlp> {
    let ckpt: Checkpoint = serde_json::from_str(text)?;
    if ckpt.format != FORMAT || ckpt.version != VERSION {
        return Err(Error::Config(format!(
            "unsupported checkpoint {} v{}",
            ckpt.format, ckpt.version
        )));
    }
    let net = ckpt.net;
    let reinit = Mlp::init(net.sizes(), net.heads().clone(), net.dropout(), 0)?;
    let shapes_ok = reinit
        .param_slices()
        .iter()
        .zip(net.param_slices())
        .all(|(a, b)| a.len() == b.len())
        && reinit.param_slices().len() == net.param_slices().len();
    if !shapes_ok || !net.is_finite() {
        return Err(Error::Config("checkpoint parameters are malformed".into()));
    }
    Ok(net)
}

pub fn save(net: &Mlp, path: &Path) -> Result<()> {
    fs::write(path, to_json(net)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Mlp> {
    from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::HeadSpec;

    #[test]
    fn round_trip_is_bit_exact() {
        let net = Mlp::init(&[5, 7, 9], HeadSpec::new([("q", 3), ("density", 6)]), 0.5, 12).unwrap();
        let back = from_json(&to_json(&net).unwrap()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn rejects_foreign_format() {
        let net = Mlp::init(&[2, 2], HeadSpec::single("q", 2), 0.0, 1).unwrap();
        let text = to_json(&net).unwrap().replace("matchlab-mlp", "other");
        assert!(from_json(&text).is_err());
    }
}
