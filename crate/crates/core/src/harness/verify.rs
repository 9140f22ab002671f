use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{render_goal, EpisodeConfig, Environment, StripsEnv};
use crate::llm::{BackendKind, CacheEntry, ResponseCache};
use crate::strips::{DomainDefinition, Instance};

use super::{read_json, run_test, run_train, Experiment, ExperimentConfig, HarnessError};

/// The opening of an episode as every agent and learning prompt shows it.
fn fingerprint(domain: &Arc<DomainDefinition>, instance: &Instance) -> Result<String, HarnessError> {
    let mut env = StripsEnv::new(domain.clone(), Arc::new(instance.clone()), EpisodeConfig::default())?;
    let initial = env.reset()?.text;
    Ok(format!("Goal: {}\nObservation: {initial}", render_goal(domain, &instance.goal)))
}

/// Scans every cached request under `cache_dir` (a training-stage cache)
/// for traces of the test set: a test instance id, or the goal and initial
/// observation of a test instance. Episodes that open identically to a
/// training instance or to the prompt demonstration are not attributable
/// and are skipped. Returns one line per violation.
pub fn check_hygiene(
    cache_dir: &Path,
    domain: &DomainDefinition,
    train: &[Arc<Instance>],
    test: &[Arc<Instance>],
    example: Option<&Instance>,
) -> Result<Vec<String>, HarnessError> {
    if !cache_dir.is_dir() {
        return Ok(Vec::new());
    }
    let domain = Arc::new(domain.clone());
    let mut allowed = BTreeSet::new();
    for instance in train.iter().map(|i| i.as_ref()).chain(example) {
        allowed.insert(fingerprint(&domain, instance)?);
    }
    let mut needles = Vec::new();
    for instance in test {
        needles.push((instance.id.clone(), format!("instance id `{}`", instance.id)));
        let print = fingerprint(&domain, instance)?;
        if !allowed.contains(&print) {
            needles.push((print, format!("the opening of `{}`", instance.id)));
        }
    }
    let cache = ResponseCache::open(cache_dir)?;
    let mut violations = Vec::new();
    for path in cache.entries()? {
        let entry: CacheEntry = read_json(&path)?;
        let text: String = entry.request.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n");
        for (needle, what) in &needles {
            if text.contains(needle.as_str()) {
                violations.push(format!("{}: training prompt contains {what}", path.display()));
            }
        }
    }
    Ok(violations)
}

/// What [`replay_verify`] found.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub cache_entries: usize,
    pub cache_problems: Vec<String>,
    pub hygiene_violations: Vec<String>,
    /// Artifact name and whether both replays wrote identical bytes.
    pub identical: Vec<(String, bool)>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.cache_problems.is_empty() && self.hygiene_violations.is_empty() && self.identical.iter().all(|(_, same)| *same)
    }
}

const COMPARED: [&str; 4] = ["library.json", "train_report.json", "report.json", "report.txt"];

fn stage_dirs(config: &ExperimentConfig, stage: &str) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = [&config.agent, &config.learner]
        .into_iter()
        .filter_map(|b| ExperimentConfig::stage_backend(b, stage).cache_dir)
        .collect();
    dirs.sort();
    dirs.dedup();
    dirs
}

/// Checks a recorded cache: every entry is intact, no training prompt leaks
/// the test set, and two full `train` + `test` replays from the cache write
/// byte-identical artifacts. `config.out` is not touched; the replays run in
/// temporary directories.
pub fn replay_verify(config: &ExperimentConfig) -> Result<VerifyReport, HarnessError> {
    let mut replay = config.clone();
    for backend in [&mut replay.agent, &mut replay.learner] {
        backend.kind = BackendKind::Replay;
    }
    replay.validate()?;
    let mut report = VerifyReport::default();

    for dir in stage_dirs(&replay, "train").into_iter().chain(stage_dirs(&replay, "test")) {
        if dir.is_dir() {
            let (n, problems) = ResponseCache::open(&dir)?.verify()?;
            report.cache_entries += n;
            report.cache_problems.extend(problems);
        }
    }
    let experiment = Experiment::prepare(&replay)?;
    let example = experiment.bundle.example.as_ref().map(|(i, _)| i);
    for dir in stage_dirs(&replay, "train") {
        report.hygiene_violations.extend(check_hygiene(
            &dir,
            &experiment.bundle.domain,
            &experiment.train,
            &experiment.test,
            example,
        )?);
    }

    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|source| HarnessError::Io { path: std::env::temp_dir(), source })?;
        let mut run = replay.clone();
        run.out = dir.path().to_path_buf();
        let trained = run_train(&run)?;
        run_test(&run, &trained.library_path)?;
        let mut files = Vec::new();
        for name in COMPARED {
            let path = dir.path().join(name);
            files.push(std::fs::read(&path).map_err(|source| HarnessError::Io { path, source })?);
        }
        outputs.push(files);
    }
    report.identical = COMPARED.iter().zip(outputs[0].iter().zip(&outputs[1])).map(|(n, (a, b))| (n.to_string(), a == b)).collect();
    Ok(report)
}
