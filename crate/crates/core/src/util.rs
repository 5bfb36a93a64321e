// SPDX-License-Identifier: Apache-2.0

use sha2::{Digest, Sha256};

/// Lowercase hex of the first `n_bytes` of SHA-256(`data`).
pub(crate) fn short_hash(data: &[u8], n_bytes: usize) -> String {
    let digest = Sha256::digest(data);
    digest[..n_bytes.min(32)]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// First eight bytes of SHA-256(`data`), little-endian.
pub(crate) fn hash64(data: &[u8]) -> u64 {
    let digest = Sha256::digest(data);
    let mut buf = [0u8; 8];
    buf.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(buf)
}
