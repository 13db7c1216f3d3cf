//! `HSCK` checkpoints: a text metadata block plus named `f64` tensors.
//!
//! Layout: magic, `u16` version, `u32` metadata length and UTF-8
//! `key = value` lines, `u32` tensor count, then per tensor a `u16` name
//! length and name, `u8` rank, `u32` dims and the little-endian values.

use std::path::Path;

use super::format::{read_file, write_file, Reader};
use crate::cnn::CnnConfig;
use crate::cnn::CnnModel;
use crate::cotrain::CoTrainState;
use crate::error::{Error, FormatError, Result};
use crate::numerics::{ParamStore, Tensor};
use crate::rnn::{RnnConfig, RnnModel};
use crate::training::Network;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HSCK";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub metadata: Vec<(String, String)>,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    fn push_meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    fn push_params(&mut self, prefix: &str, params: &ParamStore) {
        for p in params.iter() {
            self.tensors.push((format!("{prefix}.{}", p.name), p.value.clone()));
        }
    }
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let mut meta = String::new();
    for (k, v) in &ck.metadata {
        if k.contains(['=', '\n']) || v.contains('\n') {
            return Err(Error::InvalidInput(format!("metadata entry {k:?} cannot be encoded")));
        }
        meta.push_str(&format!("{k} = {v}\n"));
    }
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(meta.as_bytes());
    out.extend_from_slice(&(ck.tensors.len() as u32).to_le_bytes());
    for (name, t) in &ck.tensors {
        let name_len = u16::try_from(name.len())
            .map_err(|_| Error::InvalidInput(format!("tensor name {name:?} too long")))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    r.version(CHECKPOINT_VERSION)?;
    let meta_len = r.u32("metadata length")? as usize;
    let meta_offset = r.offset();
    let text = std::str::from_utf8(r.take(meta_len, "metadata")?).map_err(|_| FormatError::BadHeader {
        offset: meta_offset,
        reason: "metadata is not UTF-8".into(),
    })?;
    let mut ck = Checkpoint::default();
    for (i, line) in text.lines().enumerate() {
        let (k, v) = line.split_once(" = ").ok_or(FormatError::BadConfigLine {
            line: i + 1,
            reason: format!("malformed metadata line {line:?}"),
        })?;
        ck.push_meta(k, v);
    }
    let count = r.u32("tensor count")?;
    for _ in 0..count {
        let name_len = r.u16("tensor name length")? as usize;
        let name_offset = r.offset();
        let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| FormatError::BadHeader {
                offset: name_offset,
                reason: "tensor name is not UTF-8".into(),
            })?
            .to_string();
        let bad = |offset: usize, reason: String| FormatError::BadTensor {
            name: name.clone(),
            offset,
            reason,
        };
        let rank_offset = r.offset();
        let rank = r.take(1, "tensor rank").map_err(|_| bad(rank_offset, "missing rank".into()))?[0];
        let mut shape = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            let at = r.offset();
            shape.push(r.u32("tensor dim").map_err(|_| bad(at, "missing dimension".into()))? as usize);
        }
        let at = r.offset();
        let len = shape
            .iter()
            .try_fold(8usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| bad(at, "dimensions overflow".into()))?;
        if r.remaining() < len {
            return Err(bad(at, format!("expected {len} bytes of data, found {}", r.remaining())).into());
        }
        let data = r
            .take(len, "tensor data")?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Tensor::new(shape, data).map_err(|e| bad(at, e.to_string()))?;
        ck.tensors.push((name, tensor));
    }
    r.finish()?;
    Ok(ck)
}

pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_checkpoint(ck)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    decode_checkpoint(&read_file(path.as_ref())?)
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Both learners plus the co-training scalars.
pub fn model_checkpoint(rnn: &RnnModel, cnn: &CnnModel, state: Option<&CoTrainState>) -> Checkpoint {
    let mut ck = Checkpoint::default();
    let r = rnn.config();
    ck.push_meta("rnn.bands", r.bands);
    ck.push_meta("rnn.group", r.group);
    ck.push_meta("rnn.hidden", r.hidden);
    ck.push_meta("rnn.fc1", r.fc1);
    ck.push_meta("rnn.classes", r.classes);
    let c = cnn.config();
    ck.push_meta("cnn.patch", c.patch);
    ck.push_meta("cnn.channels", c.channels);
    ck.push_meta("cnn.c1_maps", c.c1_maps);
    ck.push_meta("cnn.c2_maps", c.c2_maps);
    ck.push_meta("cnn.c1_kernel", join(&c.c1_kernel));
    ck.push_meta("cnn.c2_kernel", join(&c.c2_kernel));
    ck.push_meta("cnn.fc1", c.fc1);
    ck.push_meta("cnn.classes", c.classes);
    ck.push_meta("cnn.dropout", c.dropout);
    if let Some(s) = state {
        ck.push_meta("state.best_iteration", s.best_iteration);
        ck.push_meta("state.history", join(&s.history));
        ck.push_meta("state.s1", s.s1.len());
        ck.push_meta("state.s2", s.s2.len());
        ck.push_meta("state.du", s.du.len());
    }
    ck.push_params("rnn", rnn.params());
    ck.push_params("cnn", cnn.params());
    ck
}

fn meta_value<T: std::str::FromStr>(ck: &Checkpoint, key: &str) -> Result<T> {
    let raw = ck
        .meta(key)
        .ok_or_else(|| FormatError::BadHeader { offset: 6, reason: format!("missing metadata {key}") })?;
    raw.parse().map_err(|_| {
        FormatError::BadHeader {
            offset: 6,
            reason: format!("bad metadata {key} = {raw}"),
        }
        .into()
    })
}

fn meta_triple(ck: &Checkpoint, key: &str) -> Result<[usize; 3]> {
    let raw: String = meta_value(ck, key)?;
    let parts: Vec<usize> = raw.split(',').filter_map(|p| p.parse().ok()).collect();
    parts.try_into().map_err(|_| {
        FormatError::BadHeader {
            offset: 6,
            reason: format!("bad metadata {key} = {raw}"),
        }
        .into()
    })
}

fn load_params(ck: &Checkpoint, prefix: &str, params: &mut ParamStore) -> Result<()> {
    let names: Vec<String> = params.iter().map(|p| p.name.clone()).collect();
    for name in names {
        let full = format!("{prefix}.{name}");
        let t = ck.tensor(&full).ok_or_else(|| FormatError::BadTensor {
            name: full.clone(),
            offset: 0,
            reason: "missing".into(),
        })?;
        params.set_value(&name, t.clone()).map_err(|e| FormatError::BadTensor {
            name: full.clone(),
            offset: 0,
            reason: e.to_string(),
        })?;
    }
    Ok(())
}

/// Rebuilds both learners from a checkpoint.
pub fn restore_models(ck: &Checkpoint) -> Result<(RnnModel, CnnModel)> {
    let rnn_config = RnnConfig {
        bands: meta_value(ck, "rnn.bands")?,
        group: meta_value(ck, "rnn.group")?,
        hidden: meta_value(ck, "rnn.hidden")?,
        fc1: meta_value(ck, "rnn.fc1")?,
        classes: meta_value(ck, "rnn.classes")?,
    };
    let cnn_config = CnnConfig {
        patch: meta_value(ck, "cnn.patch")?,
        channels: meta_value(ck, "cnn.channels")?,
        c1_maps: meta_value(ck, "cnn.c1_maps")?,
        c2_maps: meta_value(ck, "cnn.c2_maps")?,
        c1_kernel: meta_triple(ck, "cnn.c1_kernel")?,
        c2_kernel: meta_triple(ck, "cnn.c2_kernel")?,
        fc1: meta_value(ck, "cnn.fc1")?,
        classes: meta_value(ck, "cnn.classes")?,
        dropout: meta_value(ck, "cnn.dropout")?,
    };
    let mut rnn = RnnModel::zeros(rnn_config)?;
    load_params(ck, "rnn", rnn.params_mut())?;
    let mut cnn = CnnModel::zeros(cnn_config)?;
    load_params(ck, "cnn", cnn.params_mut())?;
    Ok((rnn, cnn))
}
