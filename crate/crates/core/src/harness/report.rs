use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{step_accuracy, EpisodeEnd, EpisodeRecord, ParsedAction, StepCounting};
use crate::learner::{ActionLibrary, CandidateScore, IterationRecord, StopReason};

/// Version of the `report.json` and `train_report.json` layouts.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Which library a report was produced with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryInfo {
    pub version: usize,
    /// SHA-256 of the library JSON.
    pub digest: String,
    pub actions: Vec<String>,
}

impl LibraryInfo {
    pub fn of(library: &ActionLibrary) -> Self {
        LibraryInfo {
            version: library.version,
            digest: hex::encode(Sha256::digest(library.to_json().as_bytes())),
            actions: library.names().map(str::to_string).collect(),
        }
    }
}

/// How often a learned action was called and how often the call ran
/// through without an invalid atomic step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageStats {
    pub invocations: u64,
    pub valid: u64,
}

impl UsageStats {
    pub fn accuracy(&self) -> Option<f64> {
        (self.invocations > 0).then(|| self.valid as f64 / self.invocations as f64)
    }
}

/// Per-action usage over `records`. Every library action gets a row, used
/// or not; calls to names outside the library are counted under their own
/// names when the environment took them as learned actions.
pub fn usage_stats<'a>(library: &ActionLibrary, records: impl IntoIterator<Item = &'a EpisodeRecord>) -> BTreeMap<String, UsageStats> {
    let mut usage: BTreeMap<String, UsageStats> = library.names().map(|n| (n.to_string(), UsageStats::default())).collect();
    for record in records {
        for step in &record.steps {
            if let ParsedAction::Learned { name, .. } = &step.action {
                let u = usage.entry(name.clone()).or_default();
                u.invocations += 1;
                u.valid += u64::from(step.valid);
            }
        }
    }
    usage
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub instance_id: String,
    pub success: bool,
    /// Agent turns taken.
    pub steps: usize,
    pub steps_ok: usize,
    pub steps_total: usize,
    pub step_accuracy: f64,
    pub end: Option<EpisodeEnd>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl InstanceOutcome {
    pub fn of(record: &EpisodeRecord, counting: StepCounting) -> Self {
        let (steps_ok, steps_total) = record.step_counts(counting);
        InstanceOutcome {
            instance_id: record.instance_id.clone(),
            success: record.succeeded(),
            steps: record.steps.len(),
            steps_ok,
            steps_total,
            step_accuracy: step_accuracy(record, counting),
            end: record.end,
            error: record.error.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionReport {
    /// 0-based.
    pub repetition: usize,
    pub outcomes: Vec<InstanceOutcome>,
    pub success_rate: f64,
    pub mean_step_accuracy: f64,
    pub usage: BTreeMap<String, UsageStats>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub instance_id: String,
    pub successes: usize,
    pub repetitions: usize,
}

/// The test-stage result, `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config_digest: String,
    pub domain: String,
    pub library: LibraryInfo,
    pub counting: StepCounting,
    pub test_instances: Vec<String>,
    /// Mean of the per-repetition success rates.
    pub success_rate: f64,
    /// Mean of the per-repetition mean step accuracies.
    pub mean_step_accuracy: f64,
    /// Usage summed over all repetitions.
    pub usage: BTreeMap<String, UsageStats>,
    /// Learned-action calls over all repetitions; equals the usage sum.
    pub learned_invocations: u64,
    pub instances: Vec<InstanceSummary>,
    pub repetitions: Vec<RepetitionReport>,
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    if n == 0 {
        0.0
    } else {
        xs.sum::<f64>() / n as f64
    }
}

impl RunReport {
    /// Aggregates `runs[r][i]`, the episode of repetition `r` on test
    /// instance `i`.
    pub fn build(
        config_digest: &str,
        library: &ActionLibrary,
        counting: StepCounting,
        test_instances: Vec<String>,
        runs: &[Vec<EpisodeRecord>],
    ) -> Self {
        let repetitions: Vec<RepetitionReport> = runs
            .iter()
            .enumerate()
            .map(|(repetition, records)| {
                let outcomes: Vec<InstanceOutcome> = records.iter().map(|r| InstanceOutcome::of(r, counting)).collect();
                let successes = outcomes.iter().filter(|o| o.success).count();
                RepetitionReport {
                    repetition,
                    success_rate: if outcomes.is_empty() { 0.0 } else { successes as f64 / outcomes.len() as f64 },
                    mean_step_accuracy: mean(outcomes.iter().map(|o| o.step_accuracy)),
                    usage: usage_stats(library, records),
                    outcomes,
                }
            })
            .collect();
        let usage = usage_stats(library, runs.iter().flatten());
        let instances = test_instances
            .iter()
            .map(|id| InstanceSummary {
                instance_id: id.clone(),
                successes: repetitions
                    .iter()
                    .filter(|r| r.outcomes.iter().any(|o| &o.instance_id == id && o.success))
                    .count(),
                repetitions: repetitions.len(),
            })
            .collect();
        RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            config_digest: config_digest.to_string(),
            domain: library.domain.clone(),
            library: LibraryInfo::of(library),
            counting,
            test_instances,
            success_rate: mean(repetitions.iter().map(|r| r.success_rate)),
            mean_step_accuracy: mean(repetitions.iter().map(|r| r.mean_step_accuracy)),
            learned_invocations: usage.values().map(|u| u.invocations).sum(),
            usage,
            instances,
            repetitions,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// The human-readable table written next to the JSON.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "domain {}  library v{} ({})", self.domain, self.library.version, short(&self.library.digest));
        let _ = writeln!(out, "config {}", short(&self.config_digest));
        let _ = writeln!(
            out,
            "success rate {:.3}  mean step accuracy {:.3}  over {} repetition(s) of {} instance(s)",
            self.success_rate,
            self.mean_step_accuracy,
            self.repetitions.len(),
            self.test_instances.len()
        );
        let _ = writeln!(out, "\n{:<24} {:>9} {:>9}", "instance", "solved", "step acc");
        for summary in &self.instances {
            let acc = mean(
                self.repetitions
                    .iter()
                    .flat_map(|r| r.outcomes.iter().filter(|o| o.instance_id == summary.instance_id))
                    .map(|o| o.step_accuracy)
                    .collect::<Vec<_>>()
                    .into_iter(),
            );
            let solved = format!("{}/{}", summary.successes, summary.repetitions);
            let _ = writeln!(out, "{:<24} {:>9} {:>9.3}", summary.instance_id, solved, acc);
        }
        if !self.usage.is_empty() {
            let _ = writeln!(out, "\n{:<28} {:>6} {:>6} {:>9}", "learned action", "calls", "valid", "accuracy");
            for (name, u) in &self.usage {
                let _ = writeln!(out, "{:<28} {:>6} {:>6} {:>9}", name, u.invocations, u.valid, fmt_opt(u.accuracy()));
            }
        }
        out
    }
}

fn short(digest: &str) -> &str {
    &digest[..digest.len().min(12)]
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

/// Side-by-side usage of two reports, e.g. the initial and the final
/// library on the same test set.
pub fn usage_diff(before: &RunReport, after: &RunReport) -> String {
    let mut names: Vec<&String> = before.usage.keys().chain(after.usage.keys()).collect();
    names.sort();
    names.dedup();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "success rate {:.3} -> {:.3}   library v{} -> v{}",
        before.success_rate, after.success_rate, before.library.version, after.library.version
    );
    let _ = writeln!(out, "{:<28} {:>13} {:>13}", "learned action", "calls/acc", "calls/acc");
    for name in names {
        let cell = |r: &RunReport| match r.usage.get(name) {
            Some(u) => format!("{}/{}", u.invocations, fmt_opt(u.accuracy())),
            None => "-".to_string(),
        };
        let _ = writeln!(out, "{:<28} {:>13} {:>13}", name, cell(before), cell(after));
    }
    out
}

/// One candidate's line in the training score table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSummary {
    /// Exact `p_succ + p_stepacc`, e.g. `22/15`; absent when rejected.
    pub mu: Option<String>,
    pub p_succ: String,
    pub p_stepacc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
}

impl CandidateSummary {
    fn of(score: &CandidateScore) -> Self {
        CandidateSummary {
            mu: score.mu_exact().map(|m| m.to_string()),
            p_succ: score.p_succ().to_string(),
            p_stepacc: score.p_stepacc().to_string(),
            rejected: score.rejected.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureSummary {
    pub instance_id: String,
    pub step: Option<usize>,
    pub function: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub candidates: Vec<CandidateSummary>,
    pub chosen: usize,
    pub kept_previous: bool,
    pub chosen_mu: Option<String>,
    pub library_version: usize,
    pub failure: Option<FailureSummary>,
}

impl IterationSummary {
    pub fn of(record: &IterationRecord) -> Self {
        IterationSummary {
            iteration: record.iteration,
            candidates: record.scores.iter().map(CandidateSummary::of).collect(),
            chosen: record.chosen,
            kept_previous: record.kept_previous,
            chosen_mu: record.chosen_score.mu_exact().map(|m| m.to_string()),
            library_version: record.chosen_library.version,
            failure: record.failure.as_ref().map(|f| FailureSummary {
                instance_id: f.instance_id.clone(),
                step: f.step,
                function: f.function_name(),
                error: f.error_info(),
            }),
        }
    }
}

/// Requests each model answered, cache hits included.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestCounts {
    pub agent: u64,
    pub learner: u64,
}

/// The training-stage result, `train_report.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainReport {
    pub schema_version: u32,
    pub config_digest: String,
    pub domain: String,
    pub train_instances: Vec<String>,
    pub iterations: Vec<IterationSummary>,
    pub stop: StopReason,
    pub library: LibraryInfo,
    pub requests: RequestCounts,
}

impl TrainReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// The per-iteration score table: one row per round, one column per
/// candidate, the chosen one starred.
pub fn render_score_table(iterations: &[IterationSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<5} {:<40} {:>8}  failure", "iter", "mu per candidate (* = chosen)", "chosen");
    for it in iterations {
        let cells: Vec<String> = it
            .candidates
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let mu = c.mu.clone().unwrap_or_else(|| "-inf".into());
                if k == it.chosen && !it.kept_previous {
                    format!("{mu}*")
                } else {
                    mu
                }
            })
            .collect();
        let chosen = match (&it.chosen_mu, it.kept_previous) {
            (Some(m), false) => m.clone(),
            (Some(m), true) => format!("{m} (kept)"),
            (None, _) => "-inf".into(),
        };
        let failure = it.failure.as_ref().map_or_else(|| "none".to_string(), |f| format!("{} {}", f.instance_id, f.function));
        let _ = writeln!(out, "{:<5} {:<40} {:>8}  {}", it.iteration, cells.join(" "), chosen, failure);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;
    use crate::env::{EpisodeConfig, Environment, StripsEnv};
    use crate::strips::{parse_domain, parse_instance};
    use std::sync::Arc;

    const LIB: &str = "def lift_onto(a, b):\n    Pickup(a)\n    Stack(a, b)\n";

    fn record(steps: &[&str]) -> EpisodeRecord {
        let domain = Arc::new(parse_domain(include_str!("../../domains/blockworld/domain.strips")).unwrap());
        let instance = Arc::new(parse_instance(include_str!("../../domains/blockworld/instances/bw-01.inst")).unwrap());
        let program = Arc::new(parse_program(LIB).unwrap());
        let mut env = StripsEnv::with_library(domain, instance, program, EpisodeConfig::default()).unwrap();
        for s in steps {
            env.step(s).unwrap();
        }
        env.into_record()
    }

    fn library() -> ActionLibrary {
        let mut lib = ActionLibrary::from_program("blockworld", &parse_program(LIB).unwrap());
        lib.entries[0].description = "lift_onto(a, b)".into();
        lib
    }

    #[test]
    fn usage_counts_are_conserved() {
        let solved = record(&["lift_onto('b2','b1')", "lift_onto('b3','b2')"]);
        let slipped = record(&["lift_onto('b2','b1')", "lift_onto('b2','b3')", "Pickup('b3')"]);
        let report = RunReport::build("d", &library(), StepCounting::Atomic, vec!["bw-01".into()], &[vec![solved], vec![slipped]]);
        assert_eq!(report.usage["lift_onto"], UsageStats { invocations: 4, valid: 3 });
        let total: u64 = report.repetitions.iter().flat_map(|r| r.usage.values()).map(|u| u.invocations).sum();
        assert_eq!(total, report.learned_invocations);
        assert_eq!(report.repetitions.len(), 2);
        assert_eq!(report.success_rate, 0.5);
        assert_eq!(report.instances[0].successes, 1);
        assert!(report.render().contains("lift_onto"));
    }

    #[test]
    fn unused_actions_still_get_a_row() {
        let report = RunReport::build("d", &library(), StepCounting::Atomic, vec!["bw-01".into()], &[vec![record(&["Pickup('b1')"])]]);
        assert_eq!(report.usage["lift_onto"], UsageStats::default());
        assert_eq!(report.learned_invocations, 0);
        assert_eq!(report.success_rate, 0.0);
    }

    #[test]
    fn reports_round_trip() {
        let report = RunReport::build("d", &library(), StepCounting::Atomic, vec!["bw-01".into()], &[vec![record(&[])]]);
        let back: RunReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
        assert!(usage_diff(&report, &back).contains("lift_onto"));
    }
}
