//! Drives an environment living in another process over the JSON-lines
//! stdio protocol. The child is this crate's `learnact serve-env`.
//!
//!     cargo build && cargo run --example stdio_adapter

use std::path::PathBuf;
use std::process::Command;

use learnact::env::{Environment, ProcessEnv};

fn main() -> anyhow::Result<()> {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::var_os("LEARNACT_BIN").map(PathBuf::from).unwrap_or_else(|| {
        let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
        manifest.join("../../target").join(profile).join("learnact")
    });
    anyhow::ensure!(exe.is_file(), "{} not found; run `cargo build` first or set LEARNACT_BIN", exe.display());
    let mut command = Command::new(exe);
    command.args(["serve-env", "--instance", "bw-01", "--domain"]).arg(manifest.join("domains/blockworld"));
    let mut env = ProcessEnv::spawn(command)?;

    println!("reset -> {}", env.reset()?.text);
    for step in ["Pickup('b9')", "Frobnicate('b1')"] {
        let result = env.step(step)?;
        println!("{step} -> valid {} ({:?}): {}", result.observation.valid, result.error_kind, result.observation.text);
    }
    Ok(())
}
