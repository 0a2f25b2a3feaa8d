//! Versioned JSON checkpoints: layer shapes, activation specs, and parameter
//! arrays as plain decimal 64-bit values. Save/load round-trips are
//! value-identical.

use super::{ActivationSpec, Layer, NetError, Network};
use crate::numerics::{Mat64, Vec64};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported format_version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint field `{field}`: {detail}")]
    BadField { field: String, detail: String },
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    layers: Vec<LayerRecord>,
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    rows: usize,
    cols: usize,
    w: Vec<f64>,
    b: Vec<f64>,
    activation: ActivationSpec,
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        layers: net
            .layers()
            .iter()
            .map(|l| LayerRecord {
                rows: l.w.rows(),
                cols: l.w.cols(),
                w: l.w.as_slice().to_vec(),
                b: l.b.as_slice().to_vec(),
                activation: l.activation.clone(),
            })
            .collect(),
    };
    fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network, CheckpointError> {
    let text = fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text)?;
    if file.format_version != CHECKPOINT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: file.format_version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let mut layers = Vec::with_capacity(file.layers.len());
    for (i, rec) in file.layers.into_iter().enumerate() {
        if rec.rows == 0 || rec.cols == 0 {
            return Err(CheckpointError::BadField {
                field: format!("layers[{i}].rows/cols"),
                detail: format!("{}x{} is not a valid shape", rec.rows, rec.cols),
            });
        }
        if rec.w.len() != rec.rows * rec.cols {
            return Err(CheckpointError::BadField {
                field: format!("layers[{i}].w"),
                detail: format!("{} elements, expected {}", rec.w.len(), rec.rows * rec.cols),
            });
        }
        if rec.b.len() != rec.rows {
            return Err(CheckpointError::BadField {
                field: format!("layers[{i}].b"),
                detail: format!("{} elements, expected {}", rec.b.len(), rec.rows),
            });
        }
        let w = Mat64::new(rec.rows, rec.cols, rec.w);
        let b = Vec64::new(rec.b);
        layers.push(Layer::new(w, b, rec.activation)?);
    }
    // Re-validate chaining through the public constructor, then reset the
    // version counter.
    Ok(Network::from_parts_unchecked(Network::new(layers)?.layers))
}
