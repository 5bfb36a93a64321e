// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

pub fn idf(df: u64, n: u64) -> f64 {
    (1.0 + (n as f64 - df as f64 + 0.5) / (df as f64 + 0.5)).ln()
}

/// BM25 term weight for one (term, chunk) pair.
pub fn weight_bm25(
    tf: u64,
    df: u64,
    n: u64,
    doc_len: u64,
    avg_len: f64,
    params: Bm25Params,
) -> Result<f64> {
    if df < 1 || n < 1 || df > n || doc_len < 1 || avg_len.is_nan() || avg_len <= 0.0 {
        return Err(Error::domain(format!(
            "bm25 preconditions violated: tf={tf} df={df} N={n} len={doc_len} avg={avg_len}"
        )));
    }
    if tf == 0 {
        return Ok(0.0);
    }
    let tf = tf as f64;
    let norm = params.k1 * (1.0 - params.b + params.b * doc_len as f64 / avg_len);
    Ok(idf(df, n) * tf * (params.k1 + 1.0) / (tf + norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: Bm25Params = Bm25Params { k1: 1.2, b: 0.75 };

    #[test]
    fn zero_tf() {
        assert_eq!(weight_bm25(0, 1, 2, 3, 3.0, P).unwrap(), 0.0);
    }

    #[test]
    fn hand_evaluated() {
        let w = weight_bm25(1, 1, 2, 5, 5.0, P).unwrap();
        assert!((w - std::f64::consts::LN_2).abs() < 1e-4, "{w}");
    }

    #[test]
    fn ubiquitous_term_tends_to_zero() {
        let mut prev = f64::INFINITY;
        for n in [10u64, 100, 1000] {
            let w = weight_bm25(1, n, n, 7, 7.0, P).unwrap();
            let expect = (1.0 + 0.5 / (n as f64 + 0.5)).ln();
            assert!((w - expect).abs() < 1e-12);
            assert!(w > 0.0 && w < prev);
            prev = w;
        }
    }

    #[test]
    fn preconditions() {
        assert!(weight_bm25(1, 3, 2, 1, 1.0, P).is_err());
        assert!(weight_bm25(1, 0, 2, 1, 1.0, P).is_err());
        assert!(weight_bm25(1, 1, 2, 0, 1.0, P).is_err());
        assert!(weight_bm25(1, 1, 2, 1, 0.0, P).is_err());
    }
}
