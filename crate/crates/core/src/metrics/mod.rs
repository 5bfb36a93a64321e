// SPDX-License-Identifier: Apache-2.0

//! Exact match, BERTScore-style similarity, None Ratio and bootstrap intervals.

mod bertscore;
mod bootstrap;
mod normalize;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bertscore::{bertscore, BertScore};
pub use bootstrap::{
    bootstrap_ci, paired_delta_ci, percentile, resample_means, MetricSummary, PairedDelta,
    DEFAULT_LEVEL, DEFAULT_RESAMPLES, MIN_RESAMPLES,
};
pub use normalize::{exact_match, normalize_answer};

/// Paired-delta magnitudes reported as "no measurable difference".
pub const NO_DIFFERENCE_BERTSCORE: f64 = 0.004;
pub const NO_DIFFERENCE_EM: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Ok,
    /// Nothing fit the budget; the generator still ran on an empty context.
    EmptyContext,
    /// Generation failed; excluded from every metric.
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAOutcome {
    pub question_id: String,
    pub predicted: String,
    pub abstained: bool,
    pub gold_answers: Vec<String>,
    pub em: Option<u8>,
    pub bert_f1: Option<f64>,
    pub status: OutcomeStatus,
}

impl QAOutcome {
    pub fn is_scored(&self) -> bool {
        self.status != OutcomeStatus::Error
    }
}

/// Fraction of scored outcomes that abstained.
pub fn none_ratio(outcomes: &[QAOutcome]) -> Result<f64> {
    let scored: Vec<&QAOutcome> = outcomes.iter().filter(|o| o.is_scored()).collect();
    if scored.is_empty() {
        return Err(Error::UndefinedMetric(
            "none ratio over zero answered questions".into(),
        ));
    }
    let abstained = scored.iter().filter(|o| o.abstained).count();
    Ok(abstained as f64 / scored.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(abstained: bool, status: OutcomeStatus) -> QAOutcome {
        QAOutcome {
            question_id: "q".into(),
            predicted: String::new(),
            abstained,
            gold_answers: vec!["x".into()],
            em: None,
            bert_f1: None,
            status,
        }
    }

    #[test]
    fn none_ratio_examples() {
        let mut v: Vec<QAOutcome> = (0..10).map(|i| outcome(i < 3, OutcomeStatus::Ok)).collect();
        assert!((none_ratio(&v).unwrap() - 0.3).abs() < 1e-12);
        v.push(outcome(true, OutcomeStatus::Error));
        assert!((none_ratio(&v).unwrap() - 0.3).abs() < 1e-12);
        let none: Vec<_> = (0..4).map(|_| outcome(false, OutcomeStatus::Ok)).collect();
        assert_eq!(none_ratio(&none).unwrap(), 0.0);
        let all: Vec<_> = (0..4)
            .map(|_| outcome(true, OutcomeStatus::EmptyContext))
            .collect();
        assert_eq!(none_ratio(&all).unwrap(), 1.0);
    }

    #[test]
    fn none_ratio_undefined() {
        assert!(none_ratio(&[]).is_err());
        assert!(none_ratio(&[outcome(true, OutcomeStatus::Error)]).is_err());
    }
}
