//! Trains an action library on Blockworld with scripted model replies and
//! prints the score table and the learned source. No network access.
//!
//!     cargo run --example scripted_training [-- out-dir]

use std::path::PathBuf;

use learnact::harness::{render_score_table, ExperimentConfig};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let mut config = ExperimentConfig::load(manifest.join("fixtures/blockworld/experiment.toml"))?;
    let tmp = tempfile::tempdir()?;
    config.out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| tmp.path().to_path_buf());

    let trained = learnact::harness::run_train(&config)?;
    print!("{}", render_score_table(&trained.report.iterations));
    println!("stop: {:?}", trained.report.stop);
    for round in &trained.outcome.state.history {
        if let Some(failure) = &round.failure {
            println!("round {} repaired `{}`: {}", round.iteration, failure.function_name(), failure.error_info());
        }
    }
    println!("== learned library (version {})", trained.outcome.library.version);
    println!("{}", trained.outcome.library.source());

    let tested = learnact::harness::run_test(&config, &trained.library_path)?;
    print!("{}", tested.report.render());
    Ok(())
}
