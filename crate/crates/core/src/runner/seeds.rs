// SPDX-License-Identifier: Apache-2.0

//! Component seeds derived from the one master seed in the config.
//!
//! `seed(component) = u64::from_le_bytes(SHA-256(master.to_le_bytes() ‖ component)[..8])`
//! with components `"bootstrap/em"`, `"bootstrap/bert_f1"`,
//! `"bootstrap/none_ratio"` and `"embedding"`.

use crate::util::hash64;

pub const BOOTSTRAP_EM: &str = "bootstrap/em";
pub const BOOTSTRAP_BERT_F1: &str = "bootstrap/bert_f1";
pub const BOOTSTRAP_NONE_RATIO: &str = "bootstrap/none_ratio";
pub const EMBEDDING: &str = "embedding";

pub fn derive_seed(master: u64, component: &str) -> u64 {
    let mut buf = master.to_le_bytes().to_vec();
    buf.extend_from_slice(component.as_bytes());
    hash64(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn components_are_isolated() {
        let a = derive_seed(42, BOOTSTRAP_EM);
        assert_eq!(a, derive_seed(42, BOOTSTRAP_EM));
        assert_ne!(a, derive_seed(42, BOOTSTRAP_BERT_F1));
        assert_ne!(a, derive_seed(43, BOOTSTRAP_EM));
    }
}
