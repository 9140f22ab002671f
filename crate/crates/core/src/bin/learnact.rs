//! Command-line front end for the harness.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use learnact::env::{serve, EpisodeConfig, StripsEnv};
use learnact::harness::{
    render_score_table, replay_verify, run_split, run_test, run_train, usage_diff, ConfigOverrides, ExperimentConfig,
    RunReport, TrainReport,
};
use learnact::learner::ActionLibrary;
use learnact::llm::BackendKind;
use learnact::strips::DomainBundle;

#[derive(Parser)]
#[command(name = "learnact", version, about = "Learn composite actions for a language agent and evaluate them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split the dataset and write split.json.
    Split(Common),
    /// Learn an action library on the training split.
    Train(Common),
    /// Evaluate a library on the test split.
    Test {
        #[command(flatten)]
        common: Common,
        /// Library to evaluate; defaults to <out>/library.json.
        #[arg(long)]
        library: Option<PathBuf>,
    },
    /// Print report tables; with two run reports, also their usage diff.
    Report {
        /// report.json or train_report.json files; defaults to <out>/report.json.
        reports: Vec<PathBuf>,
        #[arg(long, default_value = "runs/latest")]
        out: PathBuf,
    },
    /// Check a recorded cache and that two replays give identical artifacts.
    ReplayVerify(Common),
    /// Serve one instance over the JSON-lines stdio protocol.
    ServeEnv {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        instance: String,
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long, default_value_t = EpisodeConfig::default().max_steps)]
        max_steps: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Live,
    Replay,
    Scripted,
}

#[derive(Args)]
struct Common {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    domain: Option<PathBuf>,
    /// Instance files or directories; repeatable.
    #[arg(long, num_args = 1..)]
    instances: Vec<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_size: Option<usize>,
    /// K, samples per creation or revision.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    maxiter: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Backend kind for both models.
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    /// Response cache for both models.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Rule file for the scripted backend.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        config.apply(&ConfigOverrides {
            domain: self.domain.clone(),
            instances: self.instances.clone(),
            seed: self.seed,
            train_size: self.train_size,
            samples: self.samples,
            maxiter: self.maxiter,
            max_steps: self.max_steps,
            repetitions: self.repetitions,
            backend: self.backend.map(|b| match b {
                Backend::Live => BackendKind::Live,
                Backend::Replay => BackendKind::Replay,
                Backend::Scripted => BackendKind::Scripted,
            }),
            cache_dir: self.cache_dir.clone(),
            script: self.script.clone(),
            out: self.out.clone(),
        });
        Ok(config)
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Split(common) => {
            let split = run_split(&common.config()?)?;
            println!("train: {}", split.train.join(" "));
            println!("test:  {}", split.test.join(" "));
        }
        Command::Train(common) => {
            let trained = run_train(&common.config()?)?;
            print!("{}", render_score_table(&trained.report.iterations));
            println!("stop: {:?}; library written to {}", trained.report.stop, trained.library_path.display());
        }
        Command::Test { common, library } => {
            let config = common.config()?;
            let library = library.unwrap_or_else(|| config.out.join("library.json"));
            let tested = run_test(&config, &library)?;
            print!("{}", tested.report.render());
            println!("report written to {}", tested.report_path.display());
        }
        Command::Report { reports, out } => report(if reports.is_empty() { vec![out.join("report.json")] } else { reports })?,
        Command::ReplayVerify(common) => {
            let verdict = replay_verify(&common.config()?)?;
            println!("cache entries checked: {}", verdict.cache_entries);
            for line in verdict.cache_problems.iter().chain(&verdict.hygiene_violations) {
                println!("problem: {line}");
            }
            for (name, same) in &verdict.identical {
                println!("{name}: {}", if *same { "identical" } else { "DIFFERS" });
            }
            if !verdict.ok() {
                bail!("replay verification failed");
            }
            println!("replay verification passed");
        }
        Command::ServeEnv { domain, instance, library, max_steps } => {
            let bundle = DomainBundle::load(&domain)?;
            let inst = bundle.instance(&instance).with_context(|| format!("no instance `{instance}`"))?.clone();
            let definition = Arc::new(bundle.domain.clone());
            let program = match library {
                Some(path) => ActionLibrary::load(&path)?.validate(&definition)?,
                None => ActionLibrary::empty(definition.name.clone()).program()?,
            };
            let config = EpisodeConfig { max_steps, ..EpisodeConfig::default() };
            let mut env = StripsEnv::with_library(definition, Arc::new(inst), Arc::new(program), config)?;
            serve(&mut env, std::io::stdin().lock(), std::io::stdout().lock())?;
        }
    }
    Ok(())
}

fn report(paths: Vec<PathBuf>) -> anyhow::Result<()> {
    let mut runs = Vec::new();
    for path in &paths {
        let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
        if let Ok(run) = serde_json::from_str::<RunReport>(&text) {
            println!("== {}", path.display());
            print!("{}", run.render());
            runs.push(run);
        } else {
            let train: TrainReport = serde_json::from_str(&text).with_context(|| format!("{} is not a report", path.display()))?;
            println!("== {}", path.display());
            print!("{}", render_score_table(&train.iterations));
        }
    }
    if let [before, after] = runs.as_slice() {
        println!("== usage before -> after");
        print!("{}", usage_diff(before, after));
    }
    Ok(())
}
