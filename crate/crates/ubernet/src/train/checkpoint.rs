//! Self-describing JSON checkpoints.
//!
//! Every floating-point value is written as a 17-significant-digit decimal
//! string (`{:.16e}`), which round-trips any finite `f64` exactly, so a
//! saved model reloads bit for bit on any platform.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{Network, NetworkConfig};
use crate::panel::{NormEntry, Normalizer};
use crate::tensor::Tensor;

pub const FORMAT_VERSION: u32 = 1;

/// Training provenance stored alongside the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    /// Total SGD updates performed.
    pub iterations: usize,
    pub final_loss: f64,
}

/// A loaded checkpoint.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub network: Network<f64>,
    pub normalizer: Normalizer,
    /// Fingerprint of the feature schema the model was trained against.
    pub schema_sha: String,
    pub meta: CheckpointMeta,
}

#[derive(Serialize, Deserialize)]
struct ParamFile {
    shape: Vec<usize>,
    values: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct NormEntryFile {
    name: String,
    mean: String,
    std: String,
    standardize: bool,
    constant: bool,
}

#[derive(Serialize, Deserialize)]
struct MetaFile {
    seed: u64,
    iterations: usize,
    final_loss: String,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    config: NetworkConfig,
    schema_sha: String,
    normalizer: Vec<NormEntryFile>,
    params: BTreeMap<String, ParamFile>,
    meta: MetaFile,
}

/// 17 significant decimal digits: enough to reproduce any finite `f64`
/// exactly on parse.
fn encode_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn decode_f64(s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::format(format!("checkpoint holds an invalid number for {what}: '{s}'")))
}

/// Writes the network, normalizer, schema fingerprint, and training
/// metadata to `path` as JSON.
pub fn save_checkpoint(
    path: &Path,
    net: &Network<f64>,
    normalizer: &Normalizer,
    schema_sha: &str,
    meta: &CheckpointMeta,
) -> Result<()> {
    let mut params = BTreeMap::new();
    for p in net.params() {
        p.tensor.ensure_finite(&format!("parameter array '{}'", p.name))?;
        params.insert(
            p.name.clone(),
            ParamFile {
                shape: p.tensor.shape().to_vec(),
                values: p.tensor.data().iter().map(|v| encode_f64(*v)).collect(),
            },
        );
    }
    let file = CheckpointFile {
        format_version: FORMAT_VERSION,
        config: net.config.clone(),
        schema_sha: schema_sha.to_string(),
        normalizer: normalizer
            .entries
            .iter()
            .map(|e| NormEntryFile {
                name: e.name.clone(),
                mean: encode_f64(e.mean),
                std: encode_f64(e.std),
                standardize: e.standardize,
                constant: e.constant,
            })
            .collect(),
        params,
        meta: MetaFile {
            seed: meta.seed,
            iterations: meta.iterations,
            final_loss: encode_f64(meta.final_loss),
        },
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| Error::format(format!("checkpoint encoding failed: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Reads a checkpoint back. Malformed or truncated files are format
/// errors; a checkpoint whose structure disagrees with its own config is
/// too. Schema compatibility is the caller's concern — see
/// [`load_checkpoint_for_schema`].
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| Error::format(format!("checkpoint file {} is not valid: {e}", path.display())))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::incompatible(format!(
            "checkpoint format version {} is not supported (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }

    let mut network: Network<f64> = Network::zeros(&file.config)?;
    let mut used = 0usize;
    for p in network.params_mut() {
        let stored = file.params.get(&p.name).ok_or_else(|| {
            Error::format(format!("checkpoint is missing parameter array '{}'", p.name))
        })?;
        if stored.shape != p.tensor.shape() {
            return Err(Error::format(format!(
                "parameter array '{}' has shape {:?} but the config requires {:?}",
                p.name,
                stored.shape,
                p.tensor.shape()
            )));
        }
        if stored.values.len() != p.tensor.len() {
            return Err(Error::format(format!(
                "parameter array '{}' holds {} values but its shape needs {}",
                p.name,
                stored.values.len(),
                p.tensor.len()
            )));
        }
        for (slot, encoded) in p.tensor.data_mut().iter_mut().zip(&stored.values) {
            *slot = decode_f64(encoded, &p.name)?;
        }
        used += 1;
    }
    if used != file.params.len() {
        let known: std::collections::BTreeSet<String> = network.params().iter().map(|p| p.name.clone()).collect();
        let extra: Vec<&String> = file.params.keys().filter(|k| !known.contains(*k)).collect();
        return Err(Error::format(format!("checkpoint holds unknown parameter arrays: {extra:?}")));
    }

    let normalizer = Normalizer {
        entries: file
            .normalizer
            .iter()
            .map(|e| {
                Ok(NormEntry {
                    name: e.name.clone(),
                    mean: decode_f64(&e.mean, &format!("normalizer mean of '{}'", e.name))?,
                    std: decode_f64(&e.std, &format!("normalizer std of '{}'", e.name))?,
                    standardize: e.standardize,
                    constant: e.constant,
                })
            })
            .collect::<Result<Vec<NormEntry>>>()?,
    };
    let meta = CheckpointMeta {
        seed: file.meta.seed,
        iterations: file.meta.iterations,
        final_loss: decode_f64(&file.meta.final_loss, "final loss")?,
    };
    Ok(Checkpoint { network, normalizer, schema_sha: file.schema_sha, meta })
}

/// Loads a checkpoint and verifies it was trained against the expected
/// feature schema; a mismatch is a compatibility error.
pub fn load_checkpoint_for_schema(path: &Path, expected_sha: &str) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    if ckpt.schema_sha != expected_sha {
        return Err(Error::incompatible(format!(
            "checkpoint was trained against schema {} but the current schema is {expected_sha}",
            ckpt.schema_sha
        )));
    }
    Ok(ckpt)
}

/// Exact parameter snapshot, for bitwise comparisons in tests and tools.
pub fn flatten_params(net: &Network<f64>) -> Vec<(String, Tensor<f64>)> {
    net.params().iter().map(|p| (p.name.clone(), p.tensor.clone())).collect()
}
