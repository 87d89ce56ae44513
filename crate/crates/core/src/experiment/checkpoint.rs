//! Versioned model + belief checkpoints.
//!
//! Layout: a magic line, a version line, a SHA-256 line over the payload, then a JSON
//! payload. Floats are written in shortest round-trip form, so reloading reproduces
//! every parameter bit for bit.
//!
//! ```text
//! hyre-checkpoint
//! version 1
//! sha256 <hex>
//! {"model": ..., "blocks": [...], "belief": "k = ..."}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensemble::EnsembleModel;
use crate::error::{Error, Result};
use crate::hyre::BeliefState;

const MAGIC: &str = "hyre-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct BlockInfo {
    name: String,
    frozen: bool,
    params: usize,
}

#[derive(Serialize, Deserialize)]
struct Payload {
    model: EnsembleModel,
    blocks: Vec<BlockInfo>,
    belief: String,
}

pub fn checkpoint_to_string(model: &EnsembleModel, belief: &BeliefState) -> Result<String> {
    if belief.k() != model.heads() {
        return Err(Error::invalid("belief and model disagree on head count"));
    }
    let payload = Payload {
        model: model.clone(),
        blocks: model
            .blocks()
            .into_iter()
            .map(|(name, frozen, p)| BlockInfo {
                name,
                frozen,
                params: p.param_count(),
            })
            .collect(),
        belief: belief.to_string(),
    };
    let json = serde_json::to_string(&payload).map_err(|e| Error::format(e.to_string()))?;
    let digest = hex::encode(Sha256::digest(json.as_bytes()));
    Ok(format!("{MAGIC}\nversion {CHECKPOINT_VERSION}\nsha256 {digest}\n{json}\n"))
}

pub fn checkpoint_from_str(text: &str) -> Result<(EnsembleModel, BeliefState)> {
    let mut lines = text.splitn(4, '\n');
    if lines.next() != Some(MAGIC) {
        return Err(Error::format("not a checkpoint file"));
    }
    let version = lines
        .next()
        .and_then(|l| l.strip_prefix("version "))
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(|| Error::format("checkpoint version line missing"))?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(format!(
            "checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})"
        )));
    }
    let digest = lines
        .next()
        .and_then(|l| l.strip_prefix("sha256 "))
        .ok_or_else(|| Error::format("checkpoint checksum line missing"))?;
    let json = lines
        .next()
        .ok_or_else(|| Error::format("checkpoint payload missing"))?
        .trim_end_matches('\n');
    if hex::encode(Sha256::digest(json.as_bytes())) != digest {
        return Err(Error::format("checkpoint checksum mismatch (truncated or corrupted)"));
    }
    let payload: Payload = serde_json::from_str(json).map_err(|e| Error::format(format!("checkpoint payload: {e}")))?;
    payload
        .model
        .config
        .validate()
        .map_err(|e| Error::format(format!("checkpoint config: {e}")))?;
    let belief: BeliefState = payload.belief.parse()?;
    if belief.k() != payload.model.heads() {
        return Err(Error::format("checkpoint belief and model disagree on head count"));
    }
    Ok((payload.model, belief))
}

pub fn checkpoint_save(model: &EnsembleModel, belief: &BeliefState, path: &Path) -> Result<()> {
    let text = checkpoint_to_string(model, belief)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn checkpoint_load(path: &Path) -> Result<(EnsembleModel, BeliefState)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|_| Error::format("checkpoint is not valid UTF-8"))?;
    checkpoint_from_str(&text)
}
