//! Checkpoint container: a text manifest followed by SVCT tensor blobs.
//!
//! ```text
//! SVCKPT 1
//! iteration 3000
//! config network.classes = 5
//! ...
//! tensor stage1.weight 16x3x3x3
//! ...
//! end
//! <SVCT blob for each `tensor` line, in order>
//! ```
//!
//! Besides parameters the file holds `bn.<block>.mean`, `bn.<block>.var`
//! and `input.mean`.

use std::collections::BTreeMap;
use std::path::Path;

use super::config::NetworkConfig;
use super::model::Model;
use super::params::Params;
use crate::error::{Error, Result};
use crate::ops::RunningStats;
use crate::tensor::Tensor;

const MAGIC: &str = "SVCKPT 1";

fn named_tensors(model: &Model) -> Vec<(String, &Tensor)> {
    let mut out: Vec<(String, &Tensor)> = model.params.named().collect();
    for (block, s) in &model.stats {
        out.push((format!("bn.{block}.mean"), &s.mean));
        out.push((format!("bn.{block}.var"), &s.var));
    }
    out.push(("input.mean".into(), &model.input_mean));
    out
}

pub fn to_bytes(model: &Model, iteration: usize) -> Vec<u8> {
    let tensors = named_tensors(model);
    let mut head = format!("{MAGIC}\niteration {iteration}\n");
    for line in model.config.to_text().lines() {
        head.push_str(&format!("config {line}\n"));
    }
    for (name, t) in &tensors {
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        head.push_str(&format!("tensor {name} {}\n", dims.join("x")));
    }
    head.push_str("end\n");
    let mut out = head.into_bytes();
    for (_, t) in tensors {
        out.extend(t.to_bytes());
    }
    out
}

pub fn save(model: &Model, iteration: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(model, iteration)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<(Model, usize)> {
    let path = path.as_ref();
    from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Parses a checkpoint; returns the model and the stored iteration.
pub fn from_bytes(bytes: &[u8]) -> Result<(Model, usize)> {
    let err = |offset: usize, msg: String| Error::Format {
        format: "checkpoint",
        offset,
        msg,
    };
    let mut pos = 0;
    let next_line = |pos: &mut usize| -> Result<(usize, String)> {
        let start = *pos;
        let len = bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| err(start, "unterminated manifest line".into()))?;
        *pos = start + len + 1;
        let line = std::str::from_utf8(&bytes[start..start + len])
            .map_err(|_| err(start, "manifest is not UTF-8".into()))?;
        Ok((start, line.to_string()))
    };

    let (_, magic) = next_line(&mut pos)?;
    if magic != MAGIC {
        return Err(err(0, format!("expected `{MAGIC}`")));
    }
    let (at, line) = next_line(&mut pos)?;
    let iteration = line
        .strip_prefix("iteration ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| err(at, format!("expected `iteration <n>`, got `{line}`")))?;
    let mut config = NetworkConfig::default();
    let mut entries: Vec<(String, Vec<usize>)> = Vec::new();
    loop {
        let (at, line) = next_line(&mut pos)?;
        if line == "end" {
            break;
        }
        if let Some(rest) = line.strip_prefix("config ") {
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| err(at, format!("bad config line `{rest}`")))?;
            config.set(k.trim(), v.trim())?;
        } else if let Some(rest) = line.strip_prefix("tensor ") {
            let (name, dims) = rest
                .split_once(' ')
                .ok_or_else(|| err(at, format!("bad tensor line `{rest}`")))?;
            let dims: Vec<usize> = dims
                .split('x')
                .map(|d| d.parse().map_err(|_| err(at, format!("bad extent in `{rest}`"))))
                .collect::<Result<_>>()?;
            entries.push((name.to_string(), dims));
        } else {
            return Err(err(at, format!("unexpected manifest line `{line}`")));
        }
    }
    config.validate()?;

    let mut params = Params::new();
    let mut stats: BTreeMap<String, (Option<Tensor>, Option<Tensor>)> = BTreeMap::new();
    let mut input_mean = None;
    for (name, dims) in entries {
        let (t, used) = Tensor::from_bytes(&bytes[pos..]).map_err(|e| match e {
            Error::Format { offset, msg, .. } => err(pos + offset, format!("tensor `{name}`: {msg}")),
            other => other,
        })?;
        if t.shape() != dims.as_slice() {
            return Err(err(
                pos,
                format!("tensor `{name}` has shape {:?}, manifest says {dims:?}", t.shape()),
            ));
        }
        pos += used;
        if name == "input.mean" {
            input_mean = Some(t);
        } else if let Some(rest) = name.strip_prefix("bn.") {
            let (block, which) = rest
                .rsplit_once('.')
                .ok_or_else(|| err(pos, format!("bad statistics name `{name}`")))?;
            let slot = stats.entry(block.to_string()).or_default();
            match which {
                "mean" => slot.0 = Some(t),
                "var" => slot.1 = Some(t),
                _ => return Err(err(pos, format!("bad statistics name `{name}`"))),
            }
        } else {
            params.insert(name, t);
        }
    }
    if pos != bytes.len() {
        return Err(err(pos, "trailing bytes after the last tensor".into()));
    }
    let stats = stats
        .into_iter()
        .map(|(block, (mean, var))| match (mean, var) {
            (Some(mean), Some(var)) => Ok((block, RunningStats { mean, var })),
            _ => Err(Error::Config(format!("statistics for `{block}` incomplete"))),
        })
        .collect::<Result<_>>()?;
    let model = Model {
        config,
        params,
        stats,
        input_mean: input_mean.ok_or_else(|| Error::Config("checkpoint lacks input.mean".into()))?,
    };
    model.validate()?;
    Ok((model, iteration))
}
