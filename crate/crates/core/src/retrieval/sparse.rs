// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// `(term_id, weight)` pairs sorted strictly by term id, all weights positive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sorts `pairs`, drops zero weights and rejects duplicates or negative,
    /// non-finite weights.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Result<Self> {
        if let Some(&(t, w)) = pairs.iter().find(|(_, w)| !w.is_finite() || *w < 0.0) {
            return Err(Error::domain(format!("term {t} has invalid weight {w}")));
        }
        pairs.retain(|&(_, w)| w > 0.0);
        pairs.sort_unstable_by_key(|&(t, _)| t);
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::domain(format!("duplicate term id {}", w[0].0)));
        }
        Ok(Self { entries: pairs })
    }

    pub(crate) fn from_counts(counts: BTreeMap<u32, u32>) -> Self {
        Self {
            entries: counts.into_iter().map(|(t, c)| (t, f64::from(c))).collect(),
        }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weight(&self, term: u32) -> Option<f64> {
        self.entries
            .binary_search_by_key(&term, |&(t, _)| t)
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Sparse dot product by merge join.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}
