use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::env::{EpisodeRecord, StepCounting};

/// How well a candidate library did on the training instances.
///
/// Counts are kept as integers so `mu` is exact; the float accessors exist
/// for display and persistence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub successes: u64,
    pub instances: u64,
    pub steps_ok: u64,
    pub steps_total: u64,
    pub records: Vec<EpisodeRecord>,
    /// Set when the candidate could not be evaluated at all; its `mu` is
    /// then negative infinity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
}

fn ratio(num: u64, den: u64) -> Ratio<u64> {
    if den == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(num, den)
    }
}

fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl CandidateScore {
    pub fn rejected(reason: impl Into<String>) -> Self {
        CandidateScore {
            successes: 0,
            instances: 0,
            steps_ok: 0,
            steps_total: 0,
            records: Vec::new(),
            rejected: Some(reason.into()),
        }
    }

    pub fn p_succ(&self) -> Ratio<u64> {
        ratio(self.successes, self.instances)
    }

    pub fn p_stepacc(&self) -> Ratio<u64> {
        ratio(self.steps_ok, self.steps_total)
    }

    /// `p_succ + p_stepacc`, or `None` for a rejected candidate.
    pub fn mu_exact(&self) -> Option<Ratio<u64>> {
        match self.rejected {
            Some(_) => None,
            None => Some(self.p_succ() + self.p_stepacc()),
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu_exact().map_or(f64::NEG_INFINITY, to_f64)
    }

    /// True when every instance was solved with no invalid step.
    pub fn is_clean(&self) -> bool {
        self.rejected.is_none() && self.successes == self.instances && self.steps_ok == self.steps_total
    }
}

/// Success rate plus step accuracy pooled over all episodes.
pub fn score(records: &[EpisodeRecord], counting: StepCounting) -> CandidateScore {
    let (steps_ok, steps_total) = records.iter().fold((0u64, 0u64), |(ok, total), r| {
        let (o, t) = r.step_counts(counting);
        (ok + o as u64, total + t as u64)
    });
    CandidateScore {
        successes: records.iter().filter(|r| r.succeeded()).count() as u64,
        instances: records.len() as u64,
        steps_ok,
        steps_total,
        records: records.to_vec(),
        rejected: None,
    }
}

/// Index of the highest `mu`, the first one on ties.
pub(crate) fn best_index(scores: &[CandidateScore]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.mu_exact() > scores[best].mu_exact() {
            best = i;
        }
    }
    best
}
