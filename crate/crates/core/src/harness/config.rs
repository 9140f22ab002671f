use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{EpisodeConfig, StepCounting};
use crate::learner::{ErrorSelection, LearnConfig};
use crate::llm::{BackendConfig, BackendKind};
use crate::prompt::HistoryBudget;

use super::HarnessError;

/// One experiment: where the data lives, how it is split, the loop's knobs
/// and the two models. Read from a TOML file whose relative input paths are
/// resolved against the file's directory; `out` stays relative to the
/// working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Domain bundle directory.
    pub domain: PathBuf,
    /// Instance files or directories; empty means the bundle's `instances/`.
    pub instances: Vec<PathBuf>,
    /// Split seed.
    pub seed: u64,
    /// M, the number of training instances.
    pub train_size: usize,
    /// K, samples per creation or revision.
    pub samples: usize,
    pub maxiter: usize,
    /// Agent turns per episode.
    pub max_steps: usize,
    /// Atomic actions per episode, counting those inside learned actions.
    pub max_atomic_steps: usize,
    /// Test-stage repetitions; forced to 1 when the agent replays a cache.
    pub repetitions: usize,
    pub counting: StepCounting,
    pub selection: ErrorSelection,
    /// Evaluate candidates and test episodes on a thread pool.
    pub parallel: bool,
    /// Directory overriding the built-in prompt templates.
    pub templates: Option<PathBuf>,
    pub history: HistoryBudget,
    /// G, the acting model.
    pub agent: BackendConfig,
    /// F, the model that writes and repairs actions.
    pub learner: BackendConfig,
    /// Output directory, relative to the working directory.
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let episode = EpisodeConfig::default();
        let learn = LearnConfig::default();
        ExperimentConfig {
            domain: PathBuf::new(),
            instances: Vec::new(),
            seed: 0,
            train_size: 3,
            samples: learn.samples,
            maxiter: learn.maxiter,
            max_steps: episode.max_steps,
            max_atomic_steps: episode.max_atomic_steps,
            repetitions: 3,
            counting: learn.counting,
            selection: learn.selection,
            parallel: false,
            templates: None,
            history: HistoryBudget::default(),
            agent: BackendConfig::default(),
            learner: BackendConfig::default(),
            out: PathBuf::from("runs/latest"),
        }
    }
}

/// Command-line values that replace what the config file says.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub domain: Option<PathBuf>,
    pub instances: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub train_size: Option<usize>,
    pub samples: Option<usize>,
    pub maxiter: Option<usize>,
    pub max_steps: Option<usize>,
    pub repetitions: Option<usize>,
    /// Sets the kind of both models.
    pub backend: Option<BackendKind>,
    /// Sets the cache directory of both models.
    pub cache_dir: Option<PathBuf>,
    /// Sets the rule file of both models.
    pub script: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

fn resolve(base: &Path, path: &mut PathBuf) {
    if !path.as_os_str().is_empty() && path.is_relative() {
        *path = base.join(&*path);
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a config file, resolving its relative paths against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        let mut config = Self::parse(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.domain);
        self.instances.iter_mut().for_each(|p| resolve(base, p));
        if let Some(t) = &mut self.templates {
            resolve(base, t);
        }
        for backend in [&mut self.agent, &mut self.learner] {
            if let Some(c) = &mut backend.cache_dir {
                resolve(base, c);
            }
            if let Some(s) = &mut backend.script {
                resolve(base, s);
            }
        }
    }

    pub fn apply(&mut self, o: &ConfigOverrides) {
        if let Some(v) = &o.domain {
            self.domain = v.clone();
        }
        if !o.instances.is_empty() {
            self.instances = o.instances.clone();
        }
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = o.$field { self.$field = v; })*};
        }
        set!(seed, train_size, samples, maxiter, max_steps, repetitions);
        for backend in [&mut self.agent, &mut self.learner] {
            if let Some(kind) = o.backend {
                backend.kind = kind;
            }
            if let Some(dir) = &o.cache_dir {
                backend.cache_dir = Some(dir.clone());
            }
            if let Some(script) = &o.script {
                backend.script = Some(script.clone());
            }
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
    }

    /// Checks what can be checked without reading the dataset.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.domain.as_os_str().is_empty() {
            return Err(HarnessError::Config("no domain directory given".into()));
        }
        if self.repetitions == 0 {
            return Err(HarnessError::Config("repetitions must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(HarnessError::Config("max_steps must be at least 1".into()));
        }
        self.learn_config().validate()?;
        self.agent.validate()?;
        self.learner.validate()?;
        Ok(())
    }

    pub fn episode(&self) -> EpisodeConfig {
        EpisodeConfig { max_steps: self.max_steps, max_atomic_steps: self.max_atomic_steps }
    }

    pub fn learn_config(&self) -> LearnConfig {
        LearnConfig {
            samples: self.samples,
            maxiter: self.maxiter,
            episode: self.episode(),
            counting: self.counting,
            selection: self.selection,
            parallel: self.parallel,
        }
    }

    /// Replayed repetitions would be identical, so replay runs once.
    pub fn effective_repetitions(&self) -> usize {
        match self.agent.kind {
            BackendKind::Replay => 1,
            _ => self.repetitions,
        }
    }

    /// SHA-256 over the settings that determine results. The output
    /// directory and cache locations are left out so that reruns elsewhere
    /// share a digest.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        for b in [&mut c.agent, &mut c.learner] {
            b.cache_dir = None;
        }
        let json = serde_json::to_string(&c).expect("configs serialize");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Backend settings for one stage: the cache directory, if any, gets a
    /// per-stage subdirectory so training prompts can be audited apart from
    /// test prompts.
    pub fn stage_backend(backend: &BackendConfig, stage: &str) -> BackendConfig {
        let mut b = backend.clone();
        b.cache_dir = b.cache_dir.map(|d| d.join(stage));
        b
    }
}
