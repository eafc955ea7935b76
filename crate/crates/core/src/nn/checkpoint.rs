//! Parameter checkpoints.
//!
//! A checkpoint is a single JSON document:
//!
//! ```text
//! {
//!   "format": "diaster-params",
//!   "version": 1,
//!   "manifest": { "method": "diaster", "m": 1, "step": 1200 },
//!   "params": [ { "name": "psi.gru.w_z", "shape": [64, 20], "data": [...] }, ... ]
//! }
//! ```
//!
//! `data` is row-major. Floats are written with round-trip precision, so a
//! save/load cycle reproduces every parameter bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::param::{Module, Param};

pub const FORMAT: &str = "diaster-params";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub method: String,
    pub m: usize,
    pub step: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub manifest: Manifest,
    pub params: Vec<ParamRecord>,
}

impl Checkpoint {
    pub fn new(manifest: Manifest) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            manifest,
            params: Vec::new(),
        }
    }

    /// Append every parameter of `module`, prefixing names with `scope`.
    pub fn add_module<M: Module + ?Sized>(&mut self, scope: &str, module: &M) {
        for p in module.params() {
            self.params.push(ParamRecord {
                name: format!("{scope}/{}", p.name),
                shape: [p.rows, p.cols],
                data: p.data.clone(),
            });
        }
    }

    /// Overwrite the parameters of `module` from records under `scope`,
    /// matching by name and checking shapes.
    pub fn load_module<M: Module + ?Sized>(&self, scope: &str, module: &mut M) -> Result<()> {
        let index: BTreeMap<&str, &ParamRecord> =
            self.params.iter().map(|r| (r.name.as_str(), r)).collect();
        for p in module.params_mut() {
            let key = format!("{scope}/{}", p.name);
            let rec = index
                .get(key.as_str())
                .ok_or_else(|| Error::Parse(format!("checkpoint lacks parameter `{key}`")))?;
            if rec.shape != [p.rows, p.cols] || rec.data.len() != p.data.len() {
                return Err(Error::Parse(format!(
                    "parameter `{key}` has shape {:?}, expected [{}, {}]",
                    rec.shape, p.rows, p.cols
                )));
            }
            p.data.copy_from_slice(&rec.data);
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != FORMAT {
            return Err(Error::Parse(format!("unknown checkpoint format `{}`", ck.format)));
        }
        if ck.version != VERSION {
            return Err(Error::Parse(format!("unsupported checkpoint version {}", ck.version)));
        }
        for r in &ck.params {
            if r.shape[0] * r.shape[1] != r.data.len() {
                return Err(Error::Parse(format!("parameter `{}` data does not match shape", r.name)));
            }
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

impl From<&ParamRecord> for Param {
    fn from(r: &ParamRecord) -> Self {
        Param {
            name: r.name.clone(),
            rows: r.shape[0],
            cols: r.shape[1],
            data: r.data.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, DenseNet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = DenseNet::new("phi", 5, &[7], 1, Activation::Relu, &mut rng);
        let mut ck = Checkpoint::new(Manifest {
            method: "diaster".into(),
            m: 1,
            step: 42,
            ..Default::default()
        });
        ck.add_module("phi", &net);
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        let mut other = DenseNet::new("phi", 5, &[7], 1, Activation::Relu, &mut rng);
        back.load_module("phi", &mut other).unwrap();
        assert_eq!(other.flat_params(), net.flat_params());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DenseNet::new("phi", 5, &[7], 1, Activation::Relu, &mut rng);
        let mut ck = Checkpoint::new(Manifest::default());
        ck.add_module("phi", &net);
        let mut wider = DenseNet::new("phi", 5, &[8], 1, Activation::Relu, &mut rng);
        assert!(ck.load_module("phi", &mut wider).is_err());
    }

    #[test]
    fn wrong_format_rejected() {
        let text = r#"{"format":"other","version":1,"manifest":{"method":"x","m":0,"step":0},"params":[]}"#;
        assert!(Checkpoint::from_json(text).is_err());
    }
}
