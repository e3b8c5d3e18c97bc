//! Trainer backends: the in-process simulator and the external subprocess
//! driver.
//!
//! The pipeline talks to either through one narrow interface: train for `n`
//! steps under the current mixture, evaluate on the dev set, shut down.
//! External trainers speak line-delimited JSON over stdin/stdout, one
//! request in flight at a time:
//!
//! ```text
//! -> {"cmd":"train","steps":32,"alpha":[0.7,0.3],"seed":1234}
//! <- {"ok":true}
//! -> {"cmd":"evaluate"}
//! <- {"accuracy":0.72,"mean_tokens":812.5,"sample_count":512,"checkpoint_id":"ckpt-32"}
//! -> {"cmd":"shutdown"}
//! (child exits)
//! ```
//!
//! Any malformed reply, out-of-range value, or silence past the configured
//! timeout aborts the run with a protocol error carrying a transcript
//! excerpt.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::benefit::ValidationReport;
use crate::data::DataPool;
use crate::error::{Error, Result};
use crate::mixture::MixtureWeights;
use crate::rng;
use crate::sim::{self, ProxyState, ResponseSurface};

/// Result of one validation pass.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: ValidationReport,
    pub checkpoint_id: String,
}

/// A trainer the pipeline can drive.
pub trait TrainerBackend {
    /// Run `steps` training steps sampling under `alpha`.
    fn train(&mut self, steps: u64, alpha: &MixtureWeights) -> Result<()>;

    /// Measure the current model on the dev set.
    fn evaluate(&mut self) -> Result<EvalOutcome>;

    /// Release the trainer. Called once, after the final evaluation.
    fn shutdown(&mut self) -> Result<()>;
}

// ---------------------------------------------------------------------------
// Simulated backend
// ---------------------------------------------------------------------------

/// Closed-loop desk-scale trainer: samples real batches from the pools and
/// feeds their composition to the response surface.
pub struct SimulatedTrainer {
    pool: DataPool,
    surface: ResponseSurface,
    state: ProxyState,
    batch_size: usize,
    seed: u64,
    noise_seed: u64,
}

impl SimulatedTrainer {
    pub fn new(pool: DataPool, surface: ResponseSurface, batch_size: usize, seed: u64) -> Result<Self> {
        surface.validate()?;
        pool.validate_for_run()?;
        Ok(Self {
            pool,
            surface,
            state: ProxyState::initial(),
            batch_size,
            seed,
            // Decorrelate evaluation noise from batch sampling.
            noise_seed: rng::hash_parts(&[seed, 0x5eed]),
        })
    }

    pub fn state(&self) -> &ProxyState {
        &self.state
    }
}

impl TrainerBackend for SimulatedTrainer {
    fn train(&mut self, steps: u64, alpha: &MixtureWeights) -> Result<()> {
        for _ in 0..steps {
            let batch = crate::data::sample_batch(
                &self.pool,
                alpha,
                self.batch_size,
                self.seed,
                self.state.step,
            )?;
            self.state = sim::train_step(&self.state, &batch, &self.surface);
        }
        Ok(())
    }

    fn evaluate(&mut self) -> Result<EvalOutcome> {
        let report = sim::evaluate(&self.state, &self.surface, self.noise_seed);
        Ok(EvalOutcome {
            report,
            checkpoint_id: format!("sim-{:06}", self.state.step),
        })
    }

    fn shutdown(&mut self) -> Result<()> {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// External backend
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct TrainCmd<'a> {
    cmd: &'static str,
    steps: u64,
    alpha: &'a [f64],
    seed: u64,
}

#[derive(Serialize)]
struct BareCmd {
    cmd: &'static str,
}

#[derive(Deserialize)]
struct OkReply {
    ok: bool,
}

#[derive(Deserialize)]
struct EvalReply {
    accuracy: f64,
    mean_tokens: f64,
    sample_count: u64,
    checkpoint_id: String,
}

/// Default per-command reply timeout: one day, real training is slow.
pub const DEFAULT_COMMAND_TIMEOUT: Duration = Duration::from_secs(86_400);

const TRANSCRIPT_LINES: usize = 20;

/// Drives a child process over the line-delimited JSON protocol above.
pub struct ExternalTrainer {
    child: Child,
    stdin: ChildStdin,
    replies: Receiver<std::io::Result<String>>,
    timeout: Duration,
    transcript: VecDeque<String>,
    seed: u64,
    steps_done: u64,
    shut_down: bool,
}

impl ExternalTrainer {
    /// Spawn `command` (program + arguments) and take over its stdio.
    pub fn spawn(command: &[String], timeout: Duration, seed: u64) -> Result<Self> {
        let (program, args) = command.split_first().ok_or_else(|| {
            Error::Config("external trainer command must not be empty".into())
        })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Config(format!("failed to spawn {program:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        // Blocking pipe reads cannot be timed out portably; a detached
        // reader thread forwards lines over a channel instead.
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        Ok(Self {
            child,
            stdin,
            replies: rx,
            timeout,
            transcript: VecDeque::new(),
            seed,
            steps_done: 0,
            shut_down: false,
        })
    }

    fn record(&mut self, direction: &str, line: &str) {
        if self.transcript.len() == TRANSCRIPT_LINES {
            self.transcript.pop_front();
        }
        self.transcript.push_back(format!("{direction} {line}"));
    }

    fn transcript_excerpt(&self) -> String {
        self.transcript
            .iter()
            .cloned()
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn protocol_error(&self, message: impl Into<String>) -> Error {
        Error::Protocol {
            message: message.into(),
            transcript: self.transcript_excerpt(),
        }
    }

    fn send<T: Serialize>(&mut self, cmd: &T) -> Result<()> {
        let line = serde_json::to_string(cmd)?;
        self.record("->", &line);
        writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| self.protocol_error(format!("failed to write command: {e}")))
    }

    fn recv(&mut self) -> Result<String> {
        match self.replies.recv_timeout(self.timeout) {
            Ok(Ok(line)) => {
                self.record("<-", &line);
                Ok(line)
            }
            Ok(Err(e)) => Err(self.protocol_error(format!("failed reading reply: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(self.protocol_error(format!(
                "no reply within {:?}",
                self.timeout
            ))),
            Err(RecvTimeoutError::Disconnected) => {
                Err(self.protocol_error("trainer closed its output before replying"))
            }
        }
    }
}

impl TrainerBackend for ExternalTrainer {
    fn train(&mut self, steps: u64, alpha: &MixtureWeights) -> Result<()> {
        // Per-window seed: reproducible, distinct across windows.
        let window_seed = rng::hash_parts(&[self.seed, self.steps_done]);
        self.send(&TrainCmd {
            cmd: "train",
            steps,
            alpha: alpha.as_slice(),
            seed: window_seed,
        })?;
        let line = self.recv()?;
        let reply: OkReply = serde_json::from_str(&line)
            .map_err(|e| self.protocol_error(format!("bad train reply {line:?}: {e}")))?;
        if !reply.ok {
            return Err(self.protocol_error(format!("trainer refused train command: {line:?}")));
        }
        self.steps_done += steps;
        Ok(())
    }

    fn evaluate(&mut self) -> Result<EvalOutcome> {
        self.send(&BareCmd { cmd: "evaluate" })?;
        let line = self.recv()?;
        let reply: EvalReply = serde_json::from_str(&line)
            .map_err(|e| self.protocol_error(format!("bad evaluate reply {line:?}: {e}")))?;
        let report = ValidationReport::new(
            reply.accuracy,
            reply.mean_tokens,
            reply.sample_count,
            self.steps_done,
        )
        .map_err(|e| self.protocol_error(format!("out-of-range evaluate reply {line:?}: {e}")))?;
        Ok(EvalOutcome {
            report,
            checkpoint_id: reply.checkpoint_id,
        })
    }

    fn shutdown(&mut self) -> Result<()> {
        if self.shut_down {
            return Ok(());
        }
        self.shut_down = true;
        self.send(&BareCmd { cmd: "shutdown" })?;
        // Wait for the child to exit, bounded by the command timeout.
        let deadline = Instant::now() + self.timeout;
        loop {
            match self.child.try_wait() {
                Ok(Some(_)) => return Ok(()),
                Ok(None) => {
                    if Instant::now() >= deadline {
                        let _ = self.child.kill();
                        let _ = self.child.wait();
                        return Err(self.protocol_error("trainer did not exit after shutdown"));
                    }
                    std::thread::sleep(Duration::from_millis(10));
                }
                Err(e) => return Err(self.protocol_error(format!("wait failed: {e}"))),
            }
        }
    }
}

impl Drop for ExternalTrainer {
    fn drop(&mut self) {
        if !self.shut_down {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}
