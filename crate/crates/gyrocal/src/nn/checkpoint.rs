//! Self-describing model checkpoints: one JSON file carrying the format
//! tag, the architecture, the training seed, and every parameter tensor in
//! the documented flatten order. Floats serialize in shortest round-trip
//! form, so save/load reproduces parameters bit-for-bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::nn::{NetworkConfig, NetworkParams};
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "bias-net-checkpoint/v1";

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    net: NetworkConfig,
    seed: u64,
    params: NetworkParams,
}

/// Writes a checkpoint. Fails if the parameters do not match the config
/// shapes or contain non-finite values, leaving no file behind.
pub fn save_checkpoint(
    path: &Path,
    config: &NetworkConfig,
    params: &NetworkParams,
    seed: u64,
) -> Result<()> {
    config.validate()?;
    params.validate(config)?;
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_string(),
        net: config.clone(),
        seed,
        params: params.clone(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Internal(format!("checkpoint serialization: {e}")))?;
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

/// Reads and fully validates a checkpoint.
pub fn load_checkpoint(path: &Path) -> Result<(NetworkConfig, NetworkParams, u64)> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: CheckpointFile = serde_json::from_str(&raw)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!(
            "{}: format {:?} is not {CHECKPOINT_FORMAT:?}",
            path.display(),
            file.format
        )));
    }
    file.net.validate()?;
    file.params.validate(&file.net)?;
    Ok((file.net, file.params, file.seed))
}
