#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use learnact::env::EpisodeConfig;
use learnact::learner::{LearnConfig, LearnContext, Model};
use learnact::llm::{BackendConfig, BackendKind, Gateway, Script};
use learnact::prompt::{PromptAssets, PromptKit};
use learnact::strips::{DomainBundle, Instance};

pub fn manifest(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

pub fn blockworld() -> DomainBundle {
    DomainBundle::load(manifest("domains/blockworld")).unwrap()
}

pub fn script() -> Script {
    Script::load(manifest("fixtures/blockworld/script.toml")).unwrap()
}

pub fn instances(bundle: &DomainBundle, ids: &[&str]) -> Vec<Arc<Instance>> {
    ids.iter().map(|id| Arc::new(bundle.instance(id).unwrap().clone())).collect()
}

pub fn scripted_config() -> BackendConfig {
    BackendConfig { kind: BackendKind::Scripted, model: "scripted".into(), ..BackendConfig::default() }
}

/// A context whose agent and learner answer from `script`, each through its
/// own gateway so their calls are counted apart.
pub fn context(bundle: &DomainBundle, script: Script, samples: usize, maxiter: usize) -> (LearnContext, Arc<Gateway>, Arc<Gateway>) {
    let agent = Arc::new(Gateway::uncached(script.clone()));
    let learner = Arc::new(Gateway::uncached(script));
    let ctx = LearnContext {
        domain: Arc::new(bundle.domain.clone()),
        kit: PromptKit::builtin(),
        assets: PromptAssets::load(bundle.root.join("prompt")).unwrap(),
        agent: Model::new(agent.clone(), scripted_config()),
        learner: Model::new(learner.clone(), scripted_config()),
        config: LearnConfig {
            samples,
            maxiter,
            episode: EpisodeConfig { max_steps: 5, ..EpisodeConfig::default() },
            ..LearnConfig::default()
        },
    };
    (ctx, agent, learner)
}

/// The three training instances of the learning fixture.
pub const TRAIN: [&str; 3] = ["bw-learned-case", "bw-02", "bw-04"];

/// Compares `actual` with `tests/golden/<name>`. With `UPDATE_GOLDEN=1` the
/// file is (re)written instead; review the diff before committing it.
pub fn assert_golden(name: &str, actual: &str) {
    let path = manifest("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}; run with UPDATE_GOLDEN=1", path.display()));
    if expected != actual {
        let line = expected.lines().zip(actual.lines()).position(|(a, b)| a != b).map_or(0, |i| i + 1);
        panic!("{} differs from the rendered text (first difference near line {line}):\n{actual}", path.display());
    }
}

/// The Blockworld fixture experiment writing into `out`.
pub fn fixture_config(out: &std::path::Path) -> learnact::harness::ExperimentConfig {
    let mut config = learnact::harness::ExperimentConfig::load(manifest("fixtures/blockworld/experiment.toml")).unwrap();
    config.out = out.to_path_buf();
    config
}
