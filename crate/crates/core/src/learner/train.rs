use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::prompt::Improvement;
use crate::strips::Instance;

use super::score::best_index;
use super::{
    action_creation, action_learn, for_each_sample, goal_text, score, select_error_case, solve_problem, ActionLibrary,
    CandidateScore, FailureCase, LearnContext, LearnError, Provenance,
};

/// One sampled library, possibly rejected before evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub library: ActionLibrary,
    /// Why the sample is unusable; it then scores negative infinity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
    /// The parsed learner reply that produced this revision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub improvement: Option<Improvement>,
}

impl Candidate {
    pub fn accepted(library: ActionLibrary) -> Self {
        Candidate { library, rejected: None, improvement: None }
    }

    pub fn rejected(library: ActionLibrary, reason: impl Into<String>) -> Self {
        Candidate { library, rejected: Some(reason.into()), improvement: None }
    }

    pub fn with(mut self, improvement: Improvement) -> Self {
        self.improvement = Some(improvement);
        self
    }
}

/// One evaluation round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub candidates: Vec<Candidate>,
    pub scores: Vec<CandidateScore>,
    /// Index of the best candidate, the first on ties.
    pub chosen: usize,
    /// True when every candidate was rejected and the previous round's
    /// library was carried over instead.
    pub kept_previous: bool,
    pub chosen_library: ActionLibrary,
    pub chosen_score: CandidateScore,
    /// The case handed to the learner after this round, if any.
    pub failure: Option<FailureCase>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearnState {
    pub history: Vec<IterationRecord>,
}

impl LearnState {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn chosen_mus(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.chosen_score.mu()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Every training instance was solved without an invalid step.
    Clean,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub library: ActionLibrary,
    pub state: LearnState,
    pub stop: StopReason,
}

/// Scores `library` by running the agent on every instance. A library that
/// fails validation is rejected without running anything.
pub fn evaluate(ctx: &LearnContext, library: &ActionLibrary, instances: &[Arc<Instance>]) -> Result<CandidateScore, LearnError> {
    let program = match library.validate(&ctx.domain) {
        Ok(p) => Arc::new(p),
        Err(e) => return Ok(CandidateScore::rejected(e.to_string())),
    };
    let mut records = Vec::with_capacity(instances.len());
    for instance in instances {
        records.push(solve_problem(
            &ctx.kit,
            &ctx.assets,
            &ctx.agent,
            ctx.domain.clone(),
            instance.clone(),
            library,
            program.clone(),
            ctx.config.episode,
            None,
        )?);
    }
    Ok(score(&records, ctx.config.counting))
}

fn evaluate_all(ctx: &LearnContext, candidates: &[Candidate], instances: &[Arc<Instance>]) -> Result<Vec<CandidateScore>, LearnError> {
    for_each_sample(ctx.config.parallel, candidates.len(), |k| match &candidates[k].rejected {
        Some(reason) => Ok(CandidateScore::rejected(reason.clone())),
        None => evaluate(ctx, &candidates[k].library, instances),
    })
}

/// The training loop. `observer` sees every round as soon as it is scored,
/// so callers can persist progress even if a later round aborts.
pub fn train(
    ctx: &LearnContext,
    instances: &[Arc<Instance>],
    mut observer: impl FnMut(&IterationRecord),
) -> Result<TrainOutcome, LearnError> {
    ctx.config.validate()?;
    if instances.is_empty() {
        return Err(LearnError::Config("training needs at least one instance".into()));
    }
    let mut candidates = action_creation(ctx)?;
    let mut state = LearnState::default();
    let mut previous: Option<(ActionLibrary, CandidateScore)> = None;

    for iteration in 1..=ctx.config.maxiter {
        let scores = evaluate_all(ctx, &candidates, instances)?;
        let best = best_index(&scores);
        let (chosen_library, chosen_score, kept_previous) = match (&scores[best].rejected, &previous) {
            (Some(_), Some((library, score))) => (library.clone(), score.clone(), true),
            _ => (candidates[best].library.clone(), scores[best].clone(), false),
        };
        log::info!(
            "iteration {iteration}: mu = [{}], chose {best}{}",
            scores.iter().map(|s| format!("{:.4}", s.mu())).collect::<Vec<_>>().join(", "),
            if kept_previous { " (all rejected, kept previous)" } else { "" }
        );
        let failure = select_error_case(&chosen_score.records, ctx.config.selection, iteration);
        let record = IterationRecord {
            iteration,
            candidates: std::mem::take(&mut candidates),
            scores,
            chosen: best,
            kept_previous,
            chosen_library: chosen_library.clone(),
            chosen_score: chosen_score.clone(),
            failure: failure.clone(),
        };
        observer(&record);
        state.history.push(record);

        let stop = match failure {
            None => Some(StopReason::Clean),
            Some(_) if iteration == ctx.config.maxiter => Some(StopReason::MaxIter),
            Some(_) => None,
        };
        if let Some(stop) = stop {
            let mut library = chosen_library;
            library.provenance = Provenance { iterations: state.iterations(), scores: state.chosen_mus() };
            return Ok(TrainOutcome { library, state, stop });
        }
        let failure = failure.expect("checked above");
        let instance = instances
            .iter()
            .find(|i| i.id == failure.instance_id)
            .expect("failures come from the training instances");
        let goal = goal_text(&ctx.domain, instance);
        candidates = action_learn(ctx, &chosen_library, &failure, &goal)?;
        previous = Some((chosen_library, chosen_score));
    }
    unreachable!("the last iteration always returns")
}
