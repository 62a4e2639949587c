use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::access::AccessInfo;
use crate::error::{Error, ErrorCode, Result};

/// A piece of origin content. Its bytes are synthesized from `blob_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentItem {
    pub content_id: String,
    pub size_bytes: u64,
    pub duration_s: f64,
    pub blob_seed: u64,
}

impl ContentItem {
    pub fn validate(&self) -> Result<()> {
        if self.content_id.is_empty() {
            return Err(Error::new(ErrorCode::InvalidContent, "content_id must be non-empty"));
        }
        if self.size_bytes == 0 {
            return Err(Error::new(
                ErrorCode::InvalidContent,
                format!("content {}: size_bytes must be > 0", self.content_id),
            ));
        }
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return Err(Error::new(
                ErrorCode::InvalidContent,
                format!("content {}: bad duration {}", self.content_id, self.duration_s),
            ));
        }
        Ok(())
    }
}

/// Deterministic content bytes: SHA-256 in counter mode over
/// `seed_le || block_index_le`, concatenated and truncated to `size_bytes`.
pub fn content_blob(item: &ContentItem) -> Result<Vec<u8>> {
    if item.size_bytes == 0 {
        return Err(Error::new(
            ErrorCode::InvalidContent,
            format!("content {}: size_bytes must be > 0", item.content_id),
        ));
    }
    Ok(blob_bytes(item.blob_seed, item.size_bytes as usize))
}

pub(crate) fn blob_bytes(seed: u64, size: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(size + 32);
    let mut block: u64 = 0;
    while out.len() < size {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(block.to_le_bytes());
        out.extend_from_slice(&h.finalize());
        block += 1;
    }
    out.truncate(size);
    out
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// The controller's answer to a registration: what to pull, and from where.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentPlacement {
    pub surrogate_id: String,
    pub contents: Vec<String>,
    pub media_server: AccessInfo,
}
