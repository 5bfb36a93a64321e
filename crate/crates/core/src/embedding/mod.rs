// SPDX-License-Identifier: Apache-2.0

//! Embedding providers and cosine similarity.

mod cache;
mod deterministic;
mod remote;

pub use cache::CachedEmbedder;
pub use deterministic::{DeterministicEmbedder, TableEmbedder};
pub use remote::RemoteEmbedder;

use crate::error::{Error, Result};

/// A finite, fixed-length embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::domain(format!(
                "embedding dimension must be >= 2, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("embedding contains non-finite values"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|x| x * alpha).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    Remote,
    Deterministic,
    Table,
}

pub trait EmbeddingProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;

    /// Stable identifier used in cache keys.
    fn provider_id(&self) -> String;

    fn model(&self) -> &str;

    /// `None` until known, for providers that learn it from the first response.
    fn dim(&self) -> Option<usize>;

    fn batch_size(&self) -> usize;

    /// One vector per input, in input order. `texts` must be non-empty.
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>>;
}

/// Embeds `texts` in `batch_size` slices and checks the dimension is uniform.
pub fn embed_all(provider: &dyn EmbeddingProvider, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(texts.len());
    for batch in texts.chunks(provider.batch_size().max(1)) {
        let got = provider.embed(batch)?;
        if got.len() != batch.len() {
            return Err(Error::Integrity(format!(
                "provider returned {} vectors for {} inputs",
                got.len(),
                batch.len()
            )));
        }
        out.extend(got);
    }
    check_uniform_dim(&out)?;
    Ok(out)
}

pub(crate) fn check_uniform_dim(vs: &[EmbeddingVector]) -> Result<()> {
    if let Some(first) = vs.first() {
        if let Some(bad) = vs.iter().find(|v| v.dim() != first.dim()) {
            return Err(Error::Integrity(format!(
                "dimension mismatch in batch: {} vs {}",
                first.dim(),
                bad.dim()
            )));
        }
    }
    Ok(())
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::domain(format!(
            "cosine of vectors with dims {} and {}",
            u.dim(),
            v.dim()
        )));
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::domain("cosine of a zero-norm vector"));
    }
    let dot: f64 = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(&a, &b)| a * b)
        .sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(v: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let u = ev(&[0.3, -2.0, 1.0]);
        assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&ev(&[1.0, 0.0]), &ev(&[0.0, 1.0])).unwrap(), 0.0);
        let c = cosine(&ev(&[1.0, 1.0]), &ev(&[1.0, 0.0])).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn cosine_errors() {
        assert!(cosine(&ev(&[0.0, 0.0]), &ev(&[1.0, 0.0])).is_err());
        assert!(cosine(&ev(&[1.0, 0.0]), &ev(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn vector_validation() {
        assert!(EmbeddingVector::new(vec![1.0]).is_err());
        assert!(EmbeddingVector::new(vec![1.0, f64::NAN]).is_err());
    }

    fn arb_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 8)
            .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
    }

    proptest! {
        #[test]
        fn cosine_symmetric(a in arb_vec(), b in arb_vec()) {
            let (u, v) = (ev(&a), ev(&b));
            prop_assert_eq!(cosine(&u, &v).unwrap(), cosine(&v, &u).unwrap());
        }

        #[test]
        fn cosine_scale_invariant(a in arb_vec(), b in arb_vec()) {
            let (u, v) = (ev(&a), ev(&b));
            let base = cosine(&u, &v).unwrap();
            for alpha in [0.5f64, 2.0, 10.0] {
                let scaled = cosine(&u.scaled(alpha).unwrap(), &v).unwrap();
                prop_assert!((scaled - base).abs() < 1e-9);
            }
        }
    }
}
