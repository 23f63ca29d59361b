//! Parameter and model checkpoints.
//!
//! A parameter checkpoint maps tensor names to shapes and row-major values,
//! either as JSON or as a little-endian binary file:
//!
//! ```text
//! magic "GMGSPARM" | u32 version | u32 count |
//!   count × (u32 name_len | name utf-8 | u32 ndim | ndim × u64 dim | len × f64)
//! ```
//!
//! A model checkpoint is JSON: the encoder configuration, attribute
//! vocabulary, head size and seed, followed by the parameter tensors.

use std::fs;
use std::path::Path;

use graphmgs_core::autodiff::{ParamStore, Tensor};
use graphmgs_core::gnn::{Arch, AttrVocab, GnnConfig, GnnModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"GMGSPARM";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamFile {
    version: u32,
    tensors: Vec<TensorRecord>,
}

fn records(params: &ParamStore) -> Vec<TensorRecord> {
    params
        .iter()
        .map(|(name, t)| TensorRecord {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            values: t.data().to_vec(),
        })
        .collect()
}

fn store(records: Vec<TensorRecord>) -> Result<ParamStore> {
    let mut params = ParamStore::new();
    for r in records {
        let t = Tensor::new(&r.shape, r.values).map_err(|e| CliError::Data(format!("tensor `{}`: {e}", r.name)))?;
        if params.by_name(&r.name).is_some() {
            return Err(CliError::Data(format!("duplicate tensor `{}`", r.name)));
        }
        params.add(r.name, t);
    }
    Ok(params)
}

fn check_version(v: u32) -> Result<()> {
    if v != VERSION {
        return Err(CliError::Data(format!("unsupported checkpoint version {v} (expected {VERSION})")));
    }
    Ok(())
}

pub fn params_to_json(params: &ParamStore) -> String {
    let file = ParamFile {
        version: VERSION,
        tensors: records(params),
    };
    serde_json::to_string(&file).expect("finite tensors serialize")
}

pub fn params_from_json(text: &str) -> Result<ParamStore> {
    let file: ParamFile = serde_json::from_str(text).map_err(|e| CliError::Data(e.to_string()))?;
    check_version(file.version)?;
    store(file.tensors)
}

pub fn params_to_bytes(params: &ParamStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CliError::Data(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn params_from_bytes(bytes: &[u8]) -> Result<ParamStore> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(CliError::Data("not a parameter checkpoint (bad magic)".into()));
    }
    check_version(r.u32()?)?;
    let count = r.u32()?;
    let mut recs = Vec::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|e| CliError::Data(format!("tensor name: {e}")))?
            .to_string();
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let values = (0..n).map(|_| r.u64().map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
        recs.push(TensorRecord { name, shape, values });
    }
    if r.pos != bytes.len() {
        return Err(CliError::Data(format!("{} trailing bytes in checkpoint", bytes.len() - r.pos)));
    }
    store(recs)
}

/// Writes binary when the extension is `.bin`, JSON otherwise.
pub fn save_params(path: &Path, params: &ParamStore) -> Result<()> {
    let bytes = if path.extension().is_some_and(|e| e == "bin") {
        params_to_bytes(params)
    } else {
        params_to_json(params).into_bytes()
    };
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn load_params(path: &Path) -> Result<ParamStore> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        params_from_bytes(&bytes)
    } else {
        params_from_json(std::str::from_utf8(&bytes).map_err(|e| CliError::Data(e.to_string()))?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    arch: String,
    layers: usize,
    hidden_dim: usize,
    cheb_order: usize,
    fagcn_eps: f64,
    dropout: f64,
    vocab: Vec<usize>,
    head_tasks: Option<usize>,
    seed: u64,
    tensors: Vec<TensorRecord>,
}

/// Header fields of a model checkpoint besides the tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelHeader {
    pub config: GnnConfig,
    pub vocab: Vec<usize>,
    pub head_tasks: Option<usize>,
    pub seed: u64,
}

pub fn model_to_json(model: &GnnModel, seed: u64) -> String {
    let c = model.config();
    let file = ModelFile {
        version: VERSION,
        arch: c.arch.name().to_string(),
        layers: c.layers,
        hidden_dim: c.hidden_dim,
        cheb_order: c.cheb_order,
        fagcn_eps: c.fagcn_eps,
        dropout: c.dropout,
        vocab: model.vocab().sizes().to_vec(),
        head_tasks: model.head_tasks(),
        seed,
        tensors: records(model.params()),
    };
    serde_json::to_string(&file).expect("finite tensors serialize")
}

pub fn model_from_json(text: &str) -> Result<(GnnModel, ModelHeader)> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| CliError::Data(e.to_string()))?;
    check_version(file.version)?;
    let arch: Arch = file.arch.parse()?;
    let header = ModelHeader {
        config: GnnConfig {
            arch,
            layers: file.layers,
            hidden_dim: file.hidden_dim,
            cheb_order: file.cheb_order,
            fagcn_eps: file.fagcn_eps,
            dropout: file.dropout,
        },
        vocab: file.vocab,
        head_tasks: file.head_tasks,
        seed: file.seed,
    };
    let params = store(file.tensors)?;
    let model = GnnModel::from_params(header.config, AttrVocab::new(header.vocab.clone())?, header.head_tasks, &params)?;
    Ok((model, header))
}

pub fn save_model(path: &Path, model: &GnnModel, seed: u64) -> Result<()> {
    fs::write(path, model_to_json(model, seed)).map_err(|e| CliError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(GnnModel, ModelHeader)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use graphmgs_core::seed;

    fn sample() -> ParamStore {
        let mut p = ParamStore::new();
        p.add("w", Tensor::new(&[2, 3], vec![0.1, -2.5, 1e-300, 3.0, f64::MIN_POSITIVE, -0.0]).unwrap());
        p.add("eps", Tensor::scalar(0.25));
        p
    }

    fn same(a: &ParamStore, b: &ParamStore) -> bool {
        a.len() == b.len()
            && a.iter().zip(b.iter()).all(|((na, ta), (nb, tb))| {
                na == nb
                    && ta.shape() == tb.shape()
                    && ta.data().iter().zip(tb.data()).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }

    #[test]
    fn json_and_binary_round_trip_bit_exactly() {
        let p = sample();
        assert!(same(&p, &params_from_json(&params_to_json(&p)).unwrap()));
        assert!(same(&p, &params_from_bytes(&params_to_bytes(&p)).unwrap()));
    }

    #[test]
    fn binary_layout_is_little_endian() {
        let mut p = ParamStore::new();
        p.add("a", Tensor::scalar(1.0));
        let b = params_to_bytes(&p);
        assert_eq!(&b[..8], MAGIC);
        assert_eq!(&b[8..12], &[1, 0, 0, 0]);
        assert_eq!(&b[b.len() - 8..], &1.0f64.to_le_bytes());
    }

    #[test]
    fn version_and_truncation_are_checked() {
        let mut b = params_to_bytes(&sample());
        assert!(params_from_bytes(&b[..b.len() - 1]).is_err());
        b[8] = 9;
        assert!(params_from_bytes(&b).unwrap_err().to_string().contains("version 9"));
        let json = params_to_json(&sample()).replace("\"version\":1", "\"version\":2");
        assert!(params_from_json(&json).is_err());
    }

    #[test]
    fn model_round_trip() {
        let mut m = GnnModel::new(GnnConfig::desk(Arch::ChebNet), AttrVocab::new(vec![4, 2]).unwrap(), &mut seed::rng(1))
            .unwrap();
        m.add_head(3, &mut seed::rng(2)).unwrap();
        let (back, header) = model_from_json(&model_to_json(&m, 17)).unwrap();
        assert_eq!(header.seed, 17);
        assert_eq!(header.head_tasks, Some(3));
        assert_eq!(back.config(), m.config());
        assert!(same(back.params(), m.params()));
    }
}
