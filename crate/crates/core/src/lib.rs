//! Learning composite actions for a language agent.
//!
//! An agent model acts in a text environment one invocation at a time. A
//! learner model writes new actions as small programs over the atomic
//! actions, and they are kept when they help on training tasks. The loop:
//!
//! 1. [`learner::action_creation`] samples K candidate libraries of learned
//!    actions, each with a description and a usage example.
//! 2. [`learner::train`] runs the agent with every candidate on the training
//!    instances and keeps the candidate with the best
//!    `mu = p_succ + p_stepacc`.
//! 3. It localizes one failure in the kept library and asks the learner
//!    model for K repairs ([`learner::action_learn`]). Evaluation and repair
//!    repeat until a library is clean or `maxiter` rounds have run.
//! 4. [`harness::run_test`] evaluates the frozen library on held-out
//!    instances.
//!
//! Modules, bottom up:
//!
//! - [`strips`]: domain and instance files, ground actions, world states
//! - [`dsl`]: the language learned actions are written in, with a tracing
//!   interpreter
//! - [`env`]: episodes with textual observations, reward and step
//!   accounting, plus a stdio protocol for external environments
//! - [`llm`]: chat backends (live HTTP, scripted, replay) behind a caching,
//!   counting gateway
//! - [`prompt`]: prompt templates, domain prompt material and reply parsing
//! - [`learner`]: creation, scoring, error selection, repair and the
//!   training loop
//! - [`harness`]: experiment configs, dataset splits, the train and test
//!   stages, reports and replay verification
//!
//! ```
//! use std::sync::Arc;
//! use learnact::dsl::parse_program;
//! use learnact::env::{EpisodeConfig, Environment, StripsEnv};
//! use learnact::strips::{parse_domain, parse_instance};
//!
//! let domain = parse_domain("domain d\ntype block\npredicate up/1 block \"{0} is up\"\n\
//!     action Lift(b:block)\n  pre: !up(b)\n  add: up(b)\n").unwrap();
//! let instance = parse_instance("instance i\ndomain d\nobjects\n  a c - block\ninit\ngoal\n  up(a) up(c)\n").unwrap();
//! let library = parse_program("def lift_all(blocks):\n    for b in blocks:\n        Lift(b)\n").unwrap();
//! let mut env = StripsEnv::with_library(Arc::new(domain), Arc::new(instance), Arc::new(library), EpisodeConfig::default()).unwrap();
//! env.reset().unwrap();
//! let result = env.step("lift_all(['a','c'])").unwrap();
//! assert!(result.observation.done);
//! assert_eq!(env.record().atomic_ok, 2);
//! ```

pub mod dsl;
pub mod env;
pub mod harness;
pub mod learner;
pub mod llm;
pub mod prompt;
pub mod strips;
