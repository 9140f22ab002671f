use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::env::EpisodeRecord;
use crate::learner::{solve_problem, train, ActionLibrary, LearnContext, Model, TrainOutcome};
use crate::llm::Gateway;
use crate::prompt::{PromptAssets, PromptKit};
use crate::strips::{DomainBundle, Instance};

use super::{
    render_score_table, split_dataset, write_file, ExperimentConfig, HarnessError, IterationSummary, LibraryInfo,
    RequestCounts, RunReport, SplitFile, TrainReport, REPORT_SCHEMA_VERSION,
};

/// A validated config with its dataset loaded and split.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub bundle: DomainBundle,
    pub train: Vec<Arc<Instance>>,
    pub test: Vec<Arc<Instance>>,
    pub kit: PromptKit,
    pub assets: PromptAssets,
}

impl Experiment {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let bundle = DomainBundle::load(&config.domain)?;
        let dataset = if config.instances.is_empty() { bundle.instances.clone() } else { bundle.load_instances(&config.instances)? };
        let mut ids: Vec<&str> = dataset.iter().map(|i| i.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(HarnessError::Config(format!("instance id `{}` occurs twice", w[0])));
        }
        let (train, test) = split_dataset(&dataset, config.seed, config.train_size)?;
        let kit = match &config.templates {
            Some(dir) => PromptKit::from_dir(dir)?,
            None => PromptKit::builtin(),
        }
        .with_history_budget(config.history);
        let assets = PromptAssets::load(bundle.root.join("prompt"))?;
        Ok(Experiment {
            config: config.clone(),
            train: train.into_iter().map(Arc::new).collect(),
            test: test.into_iter().map(Arc::new).collect(),
            bundle,
            kit,
            assets,
        })
    }

    pub fn split_file(&self) -> SplitFile {
        SplitFile {
            schema_version: REPORT_SCHEMA_VERSION,
            domain: self.bundle.domain.name.clone(),
            seed: self.config.seed,
            train: self.train.iter().map(|i| i.id.clone()).collect(),
            test: self.test.iter().map(|i| i.id.clone()).collect(),
        }
    }

    fn out(&self, rel: &str) -> PathBuf {
        self.config.out.join(rel)
    }

    fn write_split(&self) -> Result<(), HarnessError> {
        let json = serde_json::to_string_pretty(&self.split_file()).expect("splits serialize");
        write_file(&self.out("split.json"), &format!("{json}\n"))
    }
}

/// Computes the split and writes `split.json`.
pub fn run_split(config: &ExperimentConfig) -> Result<SplitFile, HarnessError> {
    let experiment = Experiment::prepare(config)?;
    experiment.write_split()?;
    Ok(experiment.split_file())
}

fn gateway(backend: &crate::llm::BackendConfig, stage: &str) -> Result<(Model, Arc<Gateway>), HarnessError> {
    let backend = ExperimentConfig::stage_backend(backend, stage);
    let gateway = Arc::new(Gateway::from_config(&backend)?);
    Ok((Model::new(gateway.clone(), backend), gateway))
}

fn requests(g: &Gateway) -> u64 {
    g.upstream_calls() + g.cache_hits()
}

#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub library_path: PathBuf,
    pub report: TrainReport,
    pub outcome: TrainOutcome,
}

/// The training stage. Each round is persisted as soon as it is scored; on
/// abort the rounds so far stay on disk next to `train/error.txt`.
pub fn run_train(config: &ExperimentConfig) -> Result<TrainArtifacts, HarnessError> {
    let experiment = Experiment::prepare(config)?;
    experiment.write_split()?;
    let (agent, agent_gw) = gateway(&config.agent, "train")?;
    let (learner, learner_gw) = gateway(&config.learner, "train")?;
    let ctx = LearnContext {
        domain: Arc::new(experiment.bundle.domain.clone()),
        kit: experiment.kit.clone(),
        assets: experiment.assets.clone(),
        agent,
        learner,
        config: config.learn_config(),
    };

    let mut summaries = Vec::new();
    let mut write_error = None;
    let result = train(&ctx, &experiment.train, |record| {
        summaries.push(IterationSummary::of(record));
        let json = serde_json::to_string_pretty(record).expect("records serialize");
        let written = write_file(&experiment.out(&format!("train/iteration-{:03}.json", record.iteration)), &format!("{json}\n"))
            .and_then(|()| write_file(&experiment.out("train/scores.txt"), &render_score_table(&summaries)));
        if let Err(e) = written {
            write_error.get_or_insert(e);
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    let outcome = match result {
        Ok(outcome) => outcome,
        Err(e) => {
            let _ = write_file(&experiment.out("train/error.txt"), &format!("{e}\n"));
            return Err(e.into());
        }
    };

    let library_path = experiment.out("library.json");
    std::fs::create_dir_all(&config.out).map_err(|source| HarnessError::Io { path: config.out.clone(), source })?;
    outcome.library.save(&library_path)?;
    let report = TrainReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config_digest: config.digest(),
        domain: experiment.bundle.domain.name.clone(),
        train_instances: experiment.train.iter().map(|i| i.id.clone()).collect(),
        iterations: summaries,
        stop: outcome.stop,
        library: LibraryInfo::of(&outcome.library),
        requests: RequestCounts { agent: requests(&agent_gw), learner: requests(&learner_gw) },
    };
    write_file(&experiment.out("train_report.json"), &report.to_json())?;
    log::info!(
        "training stopped ({:?}) after {} round(s); {} agent and {} learner request(s), {} upstream",
        outcome.stop,
        outcome.state.iterations(),
        report.requests.agent,
        report.requests.learner,
        agent_gw.upstream_calls() + learner_gw.upstream_calls()
    );
    Ok(TrainArtifacts { library_path, report, outcome })
}

#[derive(Debug, Clone)]
pub struct TestArtifacts {
    pub report: RunReport,
    pub report_path: PathBuf,
    /// `records[r][i]`: repetition `r` on test instance `i`.
    pub records: Vec<Vec<EpisodeRecord>>,
}

/// The test stage: every test instance, every repetition, with the frozen
/// library at `library_path`. Repetition `r` asks the agent with seed `r`.
pub fn run_test(config: &ExperimentConfig, library_path: &Path) -> Result<TestArtifacts, HarnessError> {
    let experiment = Experiment::prepare(config)?;
    experiment.write_split()?;
    let library = ActionLibrary::load(library_path)?;
    let domain = Arc::new(experiment.bundle.domain.clone());
    let program = Arc::new(library.validate(&domain)?);
    let (agent, _) = gateway(&config.agent, "test")?;

    let repetitions = config.effective_repetitions();
    let jobs: Vec<(usize, Arc<Instance>)> =
        (0..repetitions).flat_map(|r| experiment.test.iter().map(move |i| (r, i.clone()))).collect();
    let run = |(r, instance): &(usize, Arc<Instance>)| {
        solve_problem(
            &experiment.kit,
            &experiment.assets,
            &agent,
            domain.clone(),
            instance.clone(),
            &library,
            program.clone(),
            config.episode(),
            Some(*r as u64),
        )
    };
    let flat: Vec<EpisodeRecord> = if config.parallel {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect::<Result<_, _>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_, _>>()?
    };
    let n = experiment.test.len();
    let records: Vec<Vec<EpisodeRecord>> = flat.chunks(n.max(1)).map(<[EpisodeRecord]>::to_vec).collect();

    let report = RunReport::build(
        &config.digest(),
        &library,
        config.counting,
        experiment.test.iter().map(|i| i.id.clone()).collect(),
        &records,
    );
    let mut lines = String::new();
    for (r, rep) in records.iter().enumerate() {
        for record in rep {
            let line = serde_json::json!({ "repetition": r, "record": record });
            lines.push_str(&line.to_string());
            lines.push('\n');
        }
    }
    write_file(&experiment.out("test/episodes.jsonl"), &lines)?;
    let report_path = experiment.out("report.json");
    write_file(&report_path, &report.to_json())?;
    write_file(&experiment.out("report.txt"), &report.render())?;
    Ok(TestArtifacts { report, report_path, records })
}
