//! Newline-delimited JSON protocol for out-of-process environments.
//!
//! Requests are `{"op":"reset"}` or `{"op":"step","invocation":"Pickup('b1')"}`;
//! each gets exactly one response line `{"text":…,"valid":…,"done":…}`, with an
//! optional `error_kind`, or `{"error":…}` when the request cannot be served.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};

use super::{EnvError, Environment, ErrorKind, Observation, StepResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Request {
    Reset,
    Step { invocation: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Observation {
        text: String,
        valid: bool,
        done: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error_kind: Option<ErrorKind>,
    },
    Error {
        error: String,
    },
}

/// Serves `env` until `input` reaches end of file.
pub fn serve<E: Environment, R: BufRead, W: Write>(env: &mut E, input: R, mut output: W) -> Result<(), EnvError> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Err(e) => Response::Error { error: format!("malformed request: {e}") },
            Ok(Request::Reset) => match env.reset() {
                Ok(o) => Response::Observation { text: o.text, valid: o.valid, done: o.done, error_kind: None },
                Err(e) => Response::Error { error: e.to_string() },
            },
            Ok(Request::Step { invocation }) => match env.step(&invocation) {
                Ok(r) => Response::Observation {
                    text: r.observation.text,
                    valid: r.observation.valid,
                    done: r.observation.done,
                    error_kind: r.error_kind,
                },
                Err(e) => Response::Error { error: e.to_string() },
            },
        };
        serde_json::to_writer(&mut output, &response).map_err(|e| EnvError::Protocol(e.to_string()))?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

/// Client side: an environment living in a child process.
pub struct ProcessEnv {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ProcessEnv {
    pub fn spawn(mut command: Command) -> Result<Self, EnvError> {
        let mut child = command.stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
        let stdin = child.stdin.take().ok_or_else(|| EnvError::Protocol("child has no stdin".into()))?;
        let stdout = child.stdout.take().ok_or_else(|| EnvError::Protocol("child has no stdout".into()))?;
        Ok(ProcessEnv { child, stdin, stdout: BufReader::new(stdout) })
    }

    fn round_trip(&mut self, request: &Request) -> Result<(Observation, Option<ErrorKind>), EnvError> {
        let line = serde_json::to_string(request).map_err(|e| EnvError::Protocol(e.to_string()))?;
        writeln!(self.stdin, "{line}")?;
        self.stdin.flush()?;
        let mut reply = String::new();
        if self.stdout.read_line(&mut reply)? == 0 {
            return Err(EnvError::Protocol("environment closed its output".into()));
        }
        match serde_json::from_str::<Response>(&reply) {
            Ok(Response::Observation { text, valid, done, error_kind }) => {
                Ok((Observation { text, valid, done }, error_kind))
            }
            Ok(Response::Error { error }) if error == EnvError::EpisodeOver.to_string() => Err(EnvError::EpisodeOver),
            Ok(Response::Error { error }) => Err(EnvError::Protocol(error)),
            Err(e) => Err(EnvError::Protocol(format!("malformed response: {e}"))),
        }
    }
}

impl Environment for ProcessEnv {
    fn reset(&mut self) -> Result<Observation, EnvError> {
        self.round_trip(&Request::Reset).map(|(o, _)| o)
    }

    fn step(&mut self, invocation: &str) -> Result<StepResult, EnvError> {
        let (observation, error_kind) = self.round_trip(&Request::Step { invocation: invocation.to_string() })?;
        let error_kind = match (observation.valid, error_kind) {
            (true, _) => None,
            // remote simulators are not obliged to classify failures
            (false, kind) => Some(kind.unwrap_or(ErrorKind::PreconditionFailed)),
        };
        Ok(StepResult { observation, error_kind, message: None })
    }
}

impl Drop for ProcessEnv {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
