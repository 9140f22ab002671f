mod common;

use std::sync::Arc;

use common::*;
use learnact::env::{EpisodeEnd, Environment, StripsEnv};
use learnact::harness::{
    check_hygiene, run_split, run_test, run_train, Experiment, HarnessError, RunReport, SplitFile, TrainReport,
};
use learnact::learner::{ActionLibrary, LearnError, StopReason};
use learnact::llm::{BackendKind, ChatBackend, Message};
use learnact::prompt::{parse_agent_action, History};

fn read(path: &std::path::Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn scripted_end_to_end_library_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let trained = run_train(&fixture_config(dir.path())).unwrap();
    assert_eq!(trained.report.stop, StopReason::Clean);
    assert_eq!(trained.report.iterations.len(), 2);
    assert_eq!(trained.report.iterations[1].chosen_mu.as_deref(), Some("2"));
    assert_golden("fixture_library.json", &read(&trained.library_path));
    let split: SplitFile = serde_json::from_str(&read(&dir.path().join("split.json"))).unwrap();
    assert_eq!(split.train, trained.report.train_instances);
    assert_eq!(read(&dir.path().join("train/scores.txt")).lines().count(), 3);
    assert!(dir.path().join("train/iteration-002.json").is_file());
}

#[test]
fn one_iteration_gives_one_score_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = fixture_config(dir.path());
    config.maxiter = 1;
    let trained = run_train(&config).unwrap();
    assert_eq!(trained.report.stop, StopReason::MaxIter);
    assert_eq!(trained.report.iterations.len(), 1);
    assert_eq!(read(&dir.path().join("train/scores.txt")).lines().count(), 2);
    let report: TrainReport = serde_json::from_str(&read(&dir.path().join("train_report.json"))).unwrap();
    assert_eq!(report, trained.report);
    // the chosen creation sample, unrevised
    assert_eq!(trained.outcome.library.version, 0);
}

#[test]
fn learned_library_solves_the_test_split() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config(dir.path());
    let trained = run_train(&config).unwrap();
    let tested = run_test(&config, &trained.library_path).unwrap();
    let report = &tested.report;
    assert_eq!(report.repetitions.len(), 3);
    assert!(report.test_instances.len() >= 4);
    assert_eq!(report.success_rate, 1.0);
    assert_eq!(report.mean_step_accuracy, 1.0);
    for usage in report.usage.values() {
        assert!(usage.invocations > 0);
        assert_eq!(usage.accuracy(), Some(1.0));
    }
    let learned_calls = tested
        .records
        .iter()
        .flatten()
        .flat_map(|r| &r.steps)
        .filter(|s| matches!(s.action, learnact::env::ParsedAction::Learned { .. }))
        .count() as u64;
    assert_eq!(report.learned_invocations, learned_calls);
    assert_eq!(report.library.version, trained.outcome.library.version);
    assert_eq!(RunReport::load(&tested.report_path).unwrap(), *report);
    assert!(read(&dir.path().join("report.txt")).contains("construct_stack"));
    assert_eq!(read(&dir.path().join("test/episodes.jsonl")).lines().count(), 3 * report.test_instances.len());
}

#[test]
fn empty_library_reduces_to_the_act_agent() {
    let bundle = blockworld();
    let example = manifest("domains/blockworld/prompt/example.inst");
    let dir = tempfile::tempdir().unwrap();
    let mut config = fixture_config(dir.path());
    config.instances = vec![example, manifest("domains/blockworld/instances/bw-01.inst")];
    config.train_size = 1;
    config.repetitions = 1;
    config.max_steps = 12;
    config.seed = (0..).find(|&s| {
        let mut c = config.clone();
        c.seed = s;
        Experiment::prepare(&c).unwrap().test.iter().any(|i| i.id == "bw-transcript")
    }).unwrap();
    let (_, plan) = bundle.example.clone().unwrap();
    let mut script = script();
    script.rules.push(learnact::llm::ScriptRule {
        goal: Some(learnact::env::render_goal(&bundle.domain, &bundle.example.as_ref().unwrap().0.goal)),
        steps: plan,
        then: Some("Finish()".into()),
        ..Default::default()
    });
    // the transcript goal equals the learned-case goal; put the new rule first
    let rule = script.rules.pop().unwrap();
    script.rules.insert(0, rule);
    let script_path = dir.path().join("script.toml");
    std::fs::write(&script_path, toml::to_string(&script).unwrap()).unwrap();
    config.agent.script = Some(script_path);

    let library_path = dir.path().join("empty.json");
    ActionLibrary::empty("blockworld").save(&library_path).unwrap();
    let tested = run_test(&config, &library_path).unwrap();

    let experiment = Experiment::prepare(&config).unwrap();
    let agent = script;
    for (instance, record) in experiment.test.iter().zip(&tested.records[0]) {
        let mut env = StripsEnv::new(Arc::new(bundle.domain.clone()), instance.clone(), config.episode()).unwrap();
        while env.is_active() && env.record().steps.len() < config.max_steps {
            let prompt = experiment.kit.render_act(&experiment.assets, &env.goal_text(), &History::from_record(env.record())).unwrap();
            let request = prompt.request(&config.agent).with_seed(Some(0));
            assert_eq!(request.messages.last().map(|m: &Message| m.role), Some(learnact::llm::Role::User));
            env.step(&parse_agent_action(&agent.complete(&request).unwrap())).unwrap();
        }
        let mut act = env.into_record();
        act.end.get_or_insert(EpisodeEnd::StepBudget);
        assert_eq!(&act, record);
    }
    let transcript = tested.report.repetitions[0].outcomes.iter().find(|o| o.instance_id == "bw-transcript").unwrap();
    assert!(transcript.success);
    assert_eq!((transcript.steps_ok, transcript.steps_total), (8, 9));
    assert!(tested.report.usage.is_empty());
}

#[test]
fn training_prompts_never_show_test_instances() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = fixture_config(&dir.path().join("out"));
    let cache = dir.path().join("cache");
    config.agent.cache_dir = Some(cache.clone());
    config.learner.cache_dir = Some(cache.clone());
    let trained = run_train(&config).unwrap();
    run_test(&config, &trained.library_path).unwrap();
    let experiment = Experiment::prepare(&config).unwrap();
    let example = experiment.bundle.example.as_ref().map(|(i, _)| i);
    let check = |dir: &std::path::Path| {
        check_hygiene(dir, &experiment.bundle.domain, &experiment.train, &experiment.test, example).unwrap()
    };
    assert!(std::fs::read_dir(cache.join("train")).unwrap().count() > 0);
    assert_eq!(check(&cache.join("train")), Vec::<String>::new());
    // the test-stage cache is full of test prompts, which the check must see
    let leaks = check(&cache.join("test"));
    assert!(!leaks.is_empty());
    assert!(leaks.iter().all(|l| l.contains("the opening of")));
}

#[test]
fn aborted_training_keeps_finished_rounds() {
    let dir = tempfile::tempdir().unwrap();
    let mut script = script();
    script.rules.retain(|r| r.label != "learning");
    let script_path = dir.path().join("script.toml");
    std::fs::write(&script_path, toml::to_string(&script).unwrap()).unwrap();
    let mut config = fixture_config(&dir.path().join("out"));
    config.agent.script = Some(script_path.clone());
    config.learner.script = Some(script_path);
    let err = run_train(&config).unwrap_err();
    assert!(matches!(err, HarnessError::Learn(LearnError::Llm(_))), "{err}");
    let out = dir.path().join("out");
    assert!(out.join("train/iteration-001.json").is_file());
    assert!(!out.join("train/iteration-002.json").exists());
    assert!(read(&out.join("train/error.txt")).contains("does not match"));
    assert!(!out.join("library.json").exists());
}

#[test]
fn splits_are_seeded_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = fixture_config(dir.path());
    let a = run_split(&config).unwrap();
    assert_eq!(a, run_split(&config).unwrap());
    assert_eq!(a.train.len(), 3);
    assert_eq!(a.train.len() + a.test.len(), blockworld().instances.len());
    config.train_size = blockworld().instances.len();
    assert!(matches!(run_split(&config), Err(HarnessError::Split { .. })));
}

#[test]
fn libraries_for_other_domains_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config(dir.path());
    let path = dir.path().join("gripper.json");
    ActionLibrary::empty("gripper").save(&path).unwrap();
    assert!(matches!(run_test(&config, &path), Err(HarnessError::Library(_))));
}

#[test]
fn replay_without_a_cache_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = fixture_config(dir.path());
    config.agent.kind = BackendKind::Replay;
    assert!(run_split(&config).is_err());
}
