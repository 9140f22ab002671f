//! Records model replies into a cache, replays them with no backend at all,
//! and shows that a request the cache has not seen is refused.
//!
//!     cargo run --example replay_cache

use learnact::llm::{BackendConfig, ChatRequest, Gateway, LlmError, Message, ResponseCache, ScriptedBackend};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let config = BackendConfig { model: "demo".into(), ..BackendConfig::default() };
    let ask = |text: &str| config.request(vec![Message::system("You are a planner."), Message::user(text)]);

    let recorder = Gateway::cached(
        ScriptedBackend::from_replies(["Pickup('b1')", "Stack('b1','b2')"]),
        ResponseCache::open(dir.path())?,
    );
    for prompt in ["Goal: hold b1\nAction:", "Goal: b1 on b2\nAction:", "Goal: hold b1\nAction:"] {
        println!("record  {:?} -> {}", prompt, recorder.complete(&ask(prompt))?);
    }
    println!("upstream calls {}, cache hits {}", recorder.upstream_calls(), recorder.cache_hits());

    let replay = Gateway::replay(ResponseCache::open(dir.path())?);
    let request: ChatRequest = ask("Goal: b1 on b2\nAction:");
    println!("replay  digest {} -> {}", &request.digest()[..12], replay.complete(&request)?);
    match replay.complete(&ask("Goal: something new\nAction:")) {
        Err(LlmError::ReplayMiss { digest }) => println!("replay  unseen request refused (digest {})", &digest[..12]),
        other => anyhow::bail!("expected a replay miss, got {other:?}"),
    }
    let (entries, problems) = ResponseCache::open(dir.path())?.verify()?;
    println!("cache holds {entries} entries, {} problem(s)", problems.len());
    Ok(())
}
