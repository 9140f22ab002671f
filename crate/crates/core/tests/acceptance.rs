//! Acceptance checks, one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the summary reads top to bottom; exits nonzero when
//! any criterion fails.

mod common;

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use learnact::dsl::{execute, parse_invocation, parse_program, Program, SimulatedHost, TraceOutcome, Value};
use learnact::env::{render_observation, EpisodeConfig, EpisodeRecord, Environment, StepCounting, StripsEnv};
use learnact::harness::replay_verify;
use learnact::learner::{score, train, StopReason};
use learnact::llm::BackendKind;
use learnact::strips::{Atom, DomainBundle, GroundAction, Object, WorldState};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure!(took < limit, "took {took:?}, limit {limit:?}");
    Ok(took)
}

const DISMANTLE: &str = "\
def dismantle_stack_until(block_list, block_target):
    for top_block, bottom_block in zip(block_list, block_list[1:]):
        if top_block == block_target:
            break
        Unstack(top_block, bottom_block)
        Putdown(top_block)
";

const CONSTRUCT: &str = "\
def construct_stack(block_list):
    for top_block, bottom_block in reverse(zip(block_list, block_list[1:])):
        Pickup(top_block)
        Stack(top_block, bottom_block)
";

const CONSTRUCT_BUGGY: &str = "\
def construct_stack(block_list):
    for top_block, bottom_block in zip(block_list, block_list[1:]):
        Pickup(top_block)
        Stack(top_block, bottom_block)
";

fn transcript_text(bundle: &DomainBundle) -> Result<(String, EpisodeRecord), String> {
    let (instance, plan) = bundle.example.clone().ok_or("no prompt demonstration")?;
    let config = EpisodeConfig { max_steps: plan.len(), ..EpisodeConfig::default() };
    let mut env = StripsEnv::new(Arc::new(bundle.domain.clone()), Arc::new(instance), config).map_err(|e| e.to_string())?;
    let mut text = format!("Goal: {}\n", env.goal_text());
    text.push_str(&format!("Observation: {}\n", env.reset().map_err(|e| e.to_string())?.text));
    for step in &plan {
        let result = env.step(step).map_err(|e| e.to_string())?;
        text.push_str(&format!("Action: {step}\nObservation: {}\n", result.observation.text));
    }
    Ok((text, env.into_record()))
}

fn sentences(line: &str) -> BTreeSet<String> {
    let collapsed = line.split_whitespace().collect::<Vec<_>>().join(" ").replace("., ", ", ");
    collapsed.split_inclusive(". ").map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

/// Per line of the reference transcript: sentences only the reference has,
/// and sentences only the engine produces. The reference drops a clear
/// block, reports an empty arm while holding, and names the wrong block on
/// the table; everything else must agree up to whitespace and order.
const KNOWN_DIFFERENCES: [(usize, &[&str], &[&str]); 3] = [
    (5, &[], &["The b3 is clear."]),
    (7, &["Robot arm is empty."], &[]),
    (11, &["b2 is on the table."], &["b3 is on the table."]),
];

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let bundle = blockworld();
    let (text, record) = transcript_text(&bundle)?;
    assert_golden("blockworld_transcript.txt", &text);
    ensure!(record.reward == 1, "reward {}", record.reward);
    ensure!((record.atomic_ok, record.atomic_total) == (8, 9), "step accuracy {}/{}", record.atomic_ok, record.atomic_total);
    let sentinel = "Observation: The action is not valid and therefore takes no effect. Please remember to satisfy the restriction of actions.";
    ensure!(text.lines().nth(15) == Some(sentinel), "line 16 is not the invalid-action sentinel");
    ensure!(text.trim_end().ends_with(" The goal is satisfied."), "no goal sentinel at the end");

    let reference = std::fs::read_to_string(manifest("tests/fixtures/reference_transcript.txt")).map_err(|e| e.to_string())?;
    let ours: Vec<&str> = text.lines().collect();
    let theirs: Vec<&str> = reference.lines().collect();
    ensure!(ours.len() == theirs.len(), "{} lines, reference has {}", ours.len(), theirs.len());
    let mut exact = 0;
    for (i, (a, b)) in ours.iter().zip(&theirs).enumerate() {
        let (a_set, b_set) = (sentences(a), sentences(b));
        let only_ref: BTreeSet<String> = b_set.difference(&a_set).cloned().collect();
        let only_ours: BTreeSet<String> = a_set.difference(&b_set).cloned().collect();
        let (want_ref, want_ours) = KNOWN_DIFFERENCES
            .iter()
            .find(|(line, _, _)| *line == i)
            .map(|(_, r, o)| (r.iter().map(|s| s.to_string()).collect(), o.iter().map(|s| s.to_string()).collect()))
            .unwrap_or_default();
        ensure!(
            only_ref == want_ref && only_ours == want_ours,
            "line {}: reference-only {only_ref:?}, engine-only {only_ours:?}",
            i + 1
        );
        exact += usize::from(a == &b.trim_end());
    }
    let took = within(start, Duration::from_secs(1))?;
    Ok(format!("reward 1, 8/9 valid, {exact}/20 lines byte-identical to the reference, others differ only as documented, {took:.0?}"))
}

fn criterion_2() -> Outcome {
    let bundle = blockworld();
    let domain = Arc::new(bundle.domain.clone());
    let program = Arc::new(parse_program(&format!("{DISMANTLE}\n{CONSTRUCT}")).map_err(|e| e.to_string())?);
    let instance = Arc::new(bundle.instance("bw-learned-case").ok_or("no learned-case instance")?.clone());
    let mut env = StripsEnv::with_library(domain, instance, program, EpisodeConfig::default()).map_err(|e| e.to_string())?;
    let first = env.reset().map_err(|e| e.to_string())?.text;
    ensure!(first == "b3 is on b2. b2 is on b1. b1 is on the table. Robot arm is empty. The b3 is clear.", "initial: {first}");
    let expected = [
        (
            "dismantle_stack_until(['b3','b2','b1'],'b1')",
            "b1 is on the table. b2 is on the table. b3 is on the table. Robot arm is empty. The b1 is clear. The b2 is clear. The b3 is clear.",
        ),
        (
            "construct_stack(['b1','b2','b3'])",
            "b1 is on b2. b2 is on b3. b3 is on the table. Robot arm is empty. The b1 is clear. The goal is satisfied.",
        ),
    ];
    for (call, observation) in expected {
        let result = env.step(call).map_err(|e| e.to_string())?;
        ensure!(result.observation.text == observation, "{call} gave {}", result.observation.text);
    }
    let record = env.record();
    ensure!(record.steps.len() == 2 && record.reward == 1, "{} invocations, reward {}", record.steps.len(), record.reward);
    ensure!((record.atomic_ok, record.atomic_total) == (8, 8), "atomic {}/{}", record.atomic_ok, record.atomic_total);
    Ok("two invocations, 8 atomic steps, all valid, goal reached".into())
}

/// Blockworld as plain atom strings, written out by hand.
mod flat {
    use std::collections::BTreeSet;

    pub type State = BTreeSet<String>;

    fn has(s: &State, atom: String) -> bool {
        s.contains(&atom)
    }

    /// Preconditions, additions and deletions of one ground action.
    fn effects(name: &str, args: &[String]) -> Option<(Vec<String>, Vec<String>, Vec<String>)> {
        let on = |a: &str, b: &str| format!("on({a},{b})");
        let one = |p: &str, a: &str| format!("{p}({a})");
        let arm = || "armempty".to_string();
        Some(match (name, args) {
            ("Pickup", [b]) => {
                let pre = vec![one("clear", b), one("ontable", b), arm()];
                (pre.clone(), vec![one("holding", b)], pre)
            }
            ("Putdown", [b]) => (vec![one("holding", b)], vec![one("ontable", b), one("clear", b), arm()], vec![one("holding", b)]),
            ("Stack", [a, b]) if a != b => (
                vec![one("holding", a), one("clear", b)],
                vec![on(a, b), one("clear", a), arm()],
                vec![one("holding", a), one("clear", b)],
            ),
            ("Unstack", [a, b]) if a != b => {
                let pre = vec![on(a, b), one("clear", a), arm()];
                (pre.clone(), vec![one("holding", a), one("clear", b)], pre)
            }
            _ => return None,
        })
    }

    pub fn applicable(s: &State, name: &str, args: &[String]) -> bool {
        effects(name, args).is_some_and(|(pre, _, _)| pre.into_iter().all(|a| has(s, a)))
    }

    pub fn apply(s: &State, name: &str, args: &[String]) -> Option<State> {
        if !applicable(s, name, args) {
            return None;
        }
        let (_, add, del) = effects(name, args)?;
        let mut next = s.clone();
        for d in del {
            next.remove(&d);
        }
        next.extend(add);
        Some(next)
    }
}

fn flatten(atoms: &BTreeSet<Atom>) -> flat::State {
    atoms.iter().map(ToString::to_string).collect()
}

/// What a learned-action call did: atomic steps with validity, the index
/// of the failing step if any, and the final state.
type Expansion = (Vec<(String, Vec<String>, bool)>, Option<usize>, flat::State);

fn pairs(list: &[String]) -> Vec<(String, String)> {
    list.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect()
}

/// Hand expansion of the two learned actions over the flat simulator.
fn oracle(call: &str, list: &[String], target: Option<&str>, buggy: bool, state: &flat::State) -> Expansion {
    let mut steps = Vec::new();
    let mut s = state.clone();
    let mut issue = |name: &str, args: Vec<String>, s: &mut flat::State| -> bool {
        match flat::apply(s, name, &args) {
            Some(next) => {
                *s = next;
                steps.push((name.to_string(), args, true));
                true
            }
            None => {
                steps.push((name.to_string(), args, false));
                false
            }
        }
    };
    let mut failed = false;
    if call == "dismantle_stack_until" {
        for (top, bottom) in pairs(list) {
            if Some(top.as_str()) == target {
                break;
            }
            if !issue("Unstack", vec![top.clone(), bottom], &mut s) || !issue("Putdown", vec![top], &mut s) {
                failed = true;
                break;
            }
        }
    } else {
        let mut order = pairs(list);
        if !buggy {
            order.reverse();
        }
        for (top, bottom) in order {
            if !issue("Pickup", vec![top.clone()], &mut s) || !issue("Stack", vec![top, bottom], &mut s) {
                failed = true;
                break;
            }
        }
    }
    let abort = failed.then(|| steps.len() - 1);
    (steps, abort, s)
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Object>, BTreeSet<Atom>, Vec<Vec<String>>) {
    let mut blocks: Vec<String> = (1..=n).map(|i| format!("b{i}")).collect();
    let objects = blocks.iter().map(|b| Object { name: b.clone(), ty: "block".into() }).collect();
    blocks.shuffle(rng);
    let mut atoms = BTreeSet::new();
    let held = if rng.gen_bool(0.3) { blocks.pop() } else { None };
    match &held {
        Some(b) => atoms.insert(Atom::new("holding", [b.clone()])),
        None => atoms.insert(Atom::new("armempty", Vec::<String>::new())),
    };
    // towers listed top to bottom
    let mut towers: Vec<Vec<String>> = Vec::new();
    for b in blocks {
        match towers.choose_mut(rng) {
            Some(t) if rng.gen_bool(0.6) => t.insert(0, b),
            _ => towers.push(vec![b]),
        }
    }
    for t in &towers {
        atoms.insert(Atom::new("clear", [t[0].clone()]));
        for w in t.windows(2) {
            atoms.insert(Atom::new("on", [w[0].clone(), w[1].clone()]));
        }
        atoms.insert(Atom::new("ontable", [t[t.len() - 1].clone()]));
    }
    (objects, atoms, towers)
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let bundle = blockworld();
    let domain = &bundle.domain;
    let correct = parse_program(&format!("{DISMANTLE}\n{CONSTRUCT}")).map_err(|e| e.to_string())?;
    let buggy = parse_program(CONSTRUCT_BUGGY).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut cases, mut aborted) = (0, 0);
    for _ in 0..400 {
        let n = rng.gen_range(1..=5);
        let (objects, atoms, towers) = random_state(&mut rng, n);
        let state = WorldState { objects: Arc::new(objects.clone()), atoms, goal: Arc::new(BTreeSet::new()) };
        let mut names: Vec<String> = objects.iter().map(|o| o.name.clone()).collect();
        // a real tower half of the time, a random block list otherwise
        let list: Vec<String> = match towers.choose(&mut rng) {
            Some(t) if rng.gen_bool(0.5) => t.clone(),
            _ => {
                names.shuffle(&mut rng);
                names[..rng.gen_range(1..=n)].to_vec()
            }
        };
        let dismantle = rng.gen_bool(0.5);
        let use_buggy = !dismantle && rng.gen_bool(0.5);
        let target = list.choose(&mut rng).cloned().filter(|_| rng.gen_bool(0.8)).unwrap_or_else(|| "nothing".into());
        let (call, program): (String, &Program) = if dismantle {
            (format!("dismantle_stack_until({},'{target}')", Value::strs(list.clone())), &correct)
        } else {
            (format!("construct_stack({})", Value::strs(list.clone())), if use_buggy { &buggy } else { &correct })
        };
        let invocation = parse_invocation(&call).map_err(|e| format!("{call}: {e}"))?;
        let mut host = SimulatedHost::new(domain, state.clone());
        let trace = execute(program, &invocation, &mut host).map_err(|e| format!("{call}: {e}"))?;
        let got: Expansion = (
            trace.entries.iter().map(|e| (e.name.clone(), e.args.clone(), e.valid)).collect(),
            match trace.outcome {
                TraceOutcome::Completed => None,
                TraceOutcome::Aborted { index, .. } => Some(index),
            },
            flatten(&host.state.atoms),
        );
        let name = if dismantle { "dismantle_stack_until" } else { "construct_stack" };
        let want = oracle(name, &list, Some(target.as_str()), use_buggy, &flatten(&state.atoms));
        ensure!(got == want, "{call} from {:?}: interpreter {got:?}, oracle {want:?}", flatten(&state.atoms));
        cases += 1;
        aborted += usize::from(want.1.is_some());
    }
    let took = within(start, Duration::from_secs(10))?;
    Ok(format!("{cases} random states, {aborted} aborted calls, traces identical, {took:.0?}"))
}

fn criterion_4() -> Outcome {
    let bundle = blockworld();
    let domain = &bundle.domain;
    let names: Vec<String> = (1..=4).map(|i| format!("b{i}")).collect();
    let objects: Vec<Object> = names.iter().map(|b| Object { name: b.clone(), ty: "block".into() }).collect();
    let mut atoms: BTreeSet<Atom> = names.iter().flat_map(|b| [Atom::new("ontable", [b]), Atom::new("clear", [b])]).collect();
    atoms.insert(Atom::new("armempty", Vec::<String>::new()));
    let start = WorldState { objects: Arc::new(objects.clone()), atoms, goal: Arc::new(BTreeSet::new()) };

    let mut ground = Vec::new();
    for a in &names {
        ground.push(("Pickup", vec![a.clone()]));
        ground.push(("Putdown", vec![a.clone()]));
        for b in names.iter().filter(|b| *b != a) {
            ground.push(("Stack", vec![a.clone(), b.clone()]));
            ground.push(("Unstack", vec![a.clone(), b.clone()]));
        }
    }
    let actions: Vec<GroundAction> = ground
        .iter()
        .map(|(n, args)| GroundAction::ground(domain, &objects, n, args))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;

    let mut seen = HashSet::from([start.atoms.clone()]);
    let mut queue = VecDeque::from([start]);
    let mut renders = HashSet::new();
    let (mut states, mut checks, mut holding) = (0, 0, 0);
    while let Some(state) = queue.pop_front() {
        states += 1;
        holding += usize::from(state.atoms.iter().any(|a| a.predicate == "holding"));
        ensure!(renders.insert(render_observation(domain, &state)), "two states render alike: {}", render_observation(domain, &state));
        let flat_state = flatten(&state.atoms);
        for (action, (name, args)) in actions.iter().zip(&ground) {
            checks += 1;
            let expected = flat::apply(&flat_state, name, args);
            ensure!(state.applicable(action) == expected.is_some(), "{action} applicability differs in {flat_state:?}");
            let got = state.apply(action).ok();
            ensure!(got.as_ref().map(|s| flatten(&s.atoms)) == expected, "{action} result differs in {flat_state:?}");
            if let Some(next) = got {
                if seen.insert(next.atoms.clone()) {
                    queue.push_back(next);
                }
            }
        }
    }
    ensure!(states == 125 && holding == 52, "{states} reachable states ({holding} holding), expected 125 (52)");
    Ok(format!("{states} reachable states, {checks} action checks, zero mismatches, {} distinct renderings", renders.len()))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let bundle = blockworld();
    let (ctx, agent, learner) = context(&bundle, script(), 4, 3);
    ensure!(ctx.agent.config.kind == BackendKind::Scripted && ctx.learner.config.kind == BackendKind::Scripted, "not scripted");
    let outcome = train(&ctx, &instances(&bundle, &TRAIN), |_| {}).map_err(|e| e.to_string())?;
    ensure!(outcome.stop == StopReason::Clean, "stopped with {:?}", outcome.stop);
    ensure!(outcome.state.iterations() == 2, "{} iterations", outcome.state.iterations());
    let first = &outcome.state.history[0];
    ensure!(
        first.scores.iter().all(|s| s.p_stepacc() < Ratio::from_integer(1)),
        "a creation sample already has perfect step accuracy"
    );
    for round in &outcome.state.history {
        let best = round.scores.iter().filter_map(|s| s.mu_exact()).max();
        ensure!(round.chosen_score.mu_exact() == best, "round {}: chosen mu is not the maximum", round.iteration);
    }
    let mu = outcome.state.history[1].chosen_score.mu_exact();
    ensure!(mu == Some(Ratio::from_integer(2)), "final mu {mu:?}");
    ensure!(agent.cache_hits() == 0 && learner.cache_hits() == 0, "unexpected cache use");
    let took = within(start, Duration::from_secs(30))?;
    let first_mu = first.chosen_score.mu_exact().map(|m| m.to_string()).unwrap_or_default();
    Ok(format!("mu {first_mu} then 2 at iteration 2, scripted backends only, {took:.0?}"))
}

fn record(id: &str, solved: bool, ok: usize, total: usize) -> EpisodeRecord {
    let mut r = EpisodeRecord::new(id, "");
    r.reward = u8::from(solved);
    r.atomic_ok = ok;
    r.atomic_total = total;
    r
}

fn criterion_6() -> Outcome {
    let cases = [
        ("2 of 3 solved, 20/25 steps", vec![record("a", true, 8, 10), record("b", true, 7, 7), record("c", false, 5, 8)], Ratio::new(22, 15)),
        ("perfect run", vec![record("a", true, 4, 4), record("b", true, 6, 6)], Ratio::from_integer(2)),
        ("all failed, no steps", vec![record("a", false, 0, 0), record("b", false, 0, 0)], Ratio::from_integer(0)),
    ];
    let mut shown = Vec::new();
    for (what, records, want) in cases {
        let got = score(&records, StepCounting::Atomic).mu_exact();
        ensure!(got == Some(want), "{what}: mu {got:?}, expected {want}");
        shown.push(format!("{what} = {want}"));
    }
    Ok(shown.join("; "))
}

fn criterion_7() -> Outcome {
    let bundle = blockworld();
    let (ctx, agent, learner) = context(&bundle, script(), 4, 2);
    let outcome = train(&ctx, &instances(&bundle, &TRAIN), |_| {}).map_err(|e| e.to_string())?;
    let (m, k, maxiter, max_funcs) = (3u64, 4u64, 2u64, 2u64);
    let max_steps = ctx.config.episode.max_steps as u64;
    let max_funcs_seen = outcome.library.names().count() as u64;
    ensure!(max_funcs_seen <= max_funcs, "library has {max_funcs_seen} functions");
    let agent_bound = m * k * maxiter * max_steps;
    let learner_bound = k * (1 + 2 * max_funcs) * (1 + maxiter);
    let (a, l) = (agent.upstream_calls(), learner.upstream_calls());
    ensure!(a <= agent_bound, "agent calls {a} > {agent_bound}");
    ensure!(l <= learner_bound, "learner calls {l} > {learner_bound}");
    Ok(format!("agent calls {a} <= {agent_bound}, learner calls {l} <= {learner_bound}"))
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = fixture_config(&dir.path().join("record"));
    let cache = dir.path().join("cache");
    config.agent.cache_dir = Some(cache.clone());
    config.learner.cache_dir = Some(cache);
    let trained = learnact::harness::run_train(&config).map_err(|e| e.to_string())?;
    learnact::harness::run_test(&config, &trained.library_path).map_err(|e| e.to_string())?;
    let verdict = replay_verify(&config).map_err(|e| e.to_string())?;
    ensure!(verdict.ok(), "{verdict:?}");
    let names: Vec<&str> = verdict.identical.iter().map(|(n, _)| n.as_str()).collect();
    ensure!(names.contains(&"library.json") && names.contains(&"report.json"), "compared only {names:?}");
    Ok(format!("{} cached responses; two replays wrote identical {}", verdict.cache_entries, names.join(", ")))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("transcript golden", criterion_1),
        ("learned-case golden", criterion_2),
        ("oracle equivalence", criterion_3),
        ("reachability soundness", criterion_4),
        ("scripted-learning convergence", criterion_5),
        ("score formula", criterion_6),
        ("call-count bound", criterion_7),
        ("replay determinism", criterion_8),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(message)
        });
        match result {
            Ok(detail) => println!("criterion {}: PASS: {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL: {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
