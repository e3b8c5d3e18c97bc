//! Reference implementation of the external-trainer wire protocol, used by
//! the protocol tests and as a template for real trainer adapters.
//!
//! Reads one JSON command per line on stdin and answers one JSON line on
//! stdout:
//!
//! - `{"cmd":"train","steps":n,"alpha":[..],"seed":s}` -> `{"ok":true}`
//! - `{"cmd":"evaluate"}` -> the next scripted report, or a surface-derived
//!   one when no script is given
//! - `{"cmd":"shutdown"}` -> exit 0
//!
//! Misbehavior flags exist so the driver's failure paths can be exercised:
//! `--garbage-on-evaluate` answers non-JSON, `--hang-on-evaluate` goes
//! silent, `--quit-on-train` exits mid-protocol.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::Parser;
use serde::Deserialize;

use l2s::sim::{evaluate, ProxyState, ResponseSurface};

#[derive(Parser)]
#[command(name = "stub_trainer", about = "Scriptable external-trainer stub")]
struct Cli {
    /// File of evaluate replies (one JSON object per line), played in order.
    /// The last line repeats once exhausted.
    #[arg(long)]
    script: Option<PathBuf>,

    /// Reply to `evaluate` with a line that is not JSON.
    #[arg(long)]
    garbage_on_evaluate: bool,

    /// Never reply to `evaluate` (for timeout tests).
    #[arg(long)]
    hang_on_evaluate: bool,

    /// Exit without replying on the first `train` command.
    #[arg(long)]
    quit_on_train: bool,
}

#[derive(Deserialize)]
struct Cmd {
    cmd: String,
    #[serde(default)]
    steps: u64,
    #[serde(default)]
    alpha: Vec<f64>,
}

fn main() {
    let cli = Cli::parse();
    let scripted: Vec<String> = match &cli.script {
        Some(path) => std::fs::read_to_string(path)
            .expect("readable script file")
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::to_string)
            .collect(),
        None => Vec::new(),
    };

    let surface = ResponseSurface::default().noiseless();
    let mut state = ProxyState::initial();
    let mut evals = 0usize;

    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    for line in stdin.lock().lines() {
        let line = line.expect("readable stdin");
        if line.trim().is_empty() {
            continue;
        }
        let cmd: Cmd = match serde_json::from_str(&line) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("stub_trainer: bad command {line:?}: {e}");
                std::process::exit(1);
            }
        };
        match cmd.cmd.as_str() {
            "train" => {
                if cli.quit_on_train {
                    std::process::exit(0);
                }
                // Account the window as an expectation-exact exposure move.
                let a1 = cmd.alpha.first().copied().unwrap_or(0.5);
                let examples = cmd.steps as f64 * 32.0;
                state.exposure_sys1 += examples * a1 / surface.exposure_scale;
                state.exposure_sys2 += examples * (1.0 - a1) / surface.exposure_scale;
                state.step += cmd.steps;
                writeln!(stdout, "{}", serde_json::json!({ "ok": true })).unwrap();
            }
            "evaluate" => {
                if cli.hang_on_evaluate {
                    loop {
                        std::thread::sleep(std::time::Duration::from_secs(3600));
                    }
                }
                if cli.garbage_on_evaluate {
                    writeln!(stdout, "this is not json").unwrap();
                } else if !scripted.is_empty() {
                    let idx = evals.min(scripted.len() - 1);
                    writeln!(stdout, "{}", scripted[idx]).unwrap();
                } else {
                    let report = evaluate(&state, &surface, 0);
                    writeln!(
                        stdout,
                        "{}",
                        serde_json::json!({
                            "accuracy": report.mean_accuracy,
                            "mean_tokens": report.mean_tokens,
                            "sample_count": report.sample_count,
                            "checkpoint_id": format!("stub-{:06}", state.step),
                        })
                    )
                    .unwrap();
                }
                evals += 1;
            }
            "shutdown" => {
                std::process::exit(0);
            }
            other => {
                eprintln!("stub_trainer: unknown command {other:?}");
                std::process::exit(1);
            }
        }
        stdout.flush().unwrap();
    }
}
