//! Optional smoke run against a live chat-completions endpoint: trains and
//! tests on Blockworld, then prints the success rate. Nothing is asserted
//! about the rate. Skips unless LEARNACT_ENDPOINT is set.
//!
//!     LEARNACT_ENDPOINT=https://api.openai.com/v1/chat/completions \
//!     LEARNACT_MODEL=gpt-4 LEARNACT_KEY_VAR=OPENAI_API_KEY \
//!     cargo run --example live_smoke -- [out-dir]
//!
//! Every reply is cached under <out-dir>/cache, so a second run with
//! `--backend replay` in the CLI reproduces it offline.

use std::path::PathBuf;

use learnact::harness::{run_test, run_train, ExperimentConfig};
use learnact::learner::ActionLibrary;
use learnact::llm::{BackendConfig, BackendKind};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let Ok(endpoint) = std::env::var("LEARNACT_ENDPOINT") else {
        println!("LEARNACT_ENDPOINT is not set; skipping the live run");
        return Ok(());
    };
    let key_var = std::env::var("LEARNACT_KEY_VAR").unwrap_or_else(|_| "OPENAI_API_KEY".into());
    anyhow::ensure!(std::env::var_os(&key_var).is_some(), "credential variable {key_var} is not set");
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/live-smoke"));
    let backend = BackendConfig {
        kind: BackendKind::Live,
        model: std::env::var("LEARNACT_MODEL").unwrap_or_else(|_| "gpt-4".into()),
        endpoint: Some(endpoint),
        api_key_env: Some(key_var),
        cache_dir: Some(out.join("cache")),
        ..BackendConfig::default()
    };
    let config = ExperimentConfig {
        domain: PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("domains/blockworld"),
        agent: backend.clone(),
        learner: BackendConfig { temperature: 0.7, ..backend },
        repetitions: 1,
        out,
        ..ExperimentConfig::default()
    };

    let trained = run_train(&config)?;
    let library = ActionLibrary::load(&trained.library_path)?;
    library.validate(&learnact::strips::DomainBundle::load(&config.domain)?.domain)?;
    println!("library: {} action(s), stop {:?}", library.names().count(), trained.report.stop);
    let tested = run_test(&config, &trained.library_path)?;
    print!("{}", tested.report.render());
    println!("success rate {:.3} (reported, not asserted)", tested.report.success_rate);
    Ok(())
}
