//! Subcommand pipelines sharing stage bookkeeping and the output directory.

mod analyze;
mod solve;
mod sweep;
mod transform;
mod verify;

use clap::Subcommand;
use serde::Serialize;

use crate::config::{Problem, RunConfig, UsageError};
use crate::output::OutputDir;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Area condition, critical L and flat-core verdicts.
    Analyze,
    /// Tabulate Psi, Psi' and the transformed nonlinearity.
    Transform,
    /// Time map, extremal eigenvalues and solution profiles.
    Solve,
    /// Vary L, p or lambda over a grid.
    Sweep,
    /// Asymptotic diagnostics and the randomized area identity check.
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Transform => "transform",
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Indeterminate,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub name: String,
    pub status: StageStatus,
    pub message: String,
}

/// State of one command run.
pub struct Run<'a> {
    pub cfg: &'a RunConfig,
    pub prob: &'a Problem,
    pub out: OutputDir,
    pub stages: Vec<Stage>,
}

impl<'a> Run<'a> {
    pub fn new(cfg: &'a RunConfig, prob: &'a Problem, out: OutputDir) -> Self {
        Self {
            cfg,
            prob,
            out,
            stages: Vec::new(),
        }
    }

    pub fn record(&mut self, name: &str, status: StageStatus, message: impl Into<String>) {
        self.stages.push(Stage {
            name: name.to_string(),
            status,
            message: message.into(),
        });
    }

    /// Run `body`, recording success or the error chain; `None` on failure.
    pub fn stage<T>(&mut self, name: &str, body: impl FnOnce(&mut Self) -> anyhow::Result<T>) -> Option<T> {
        match body(self) {
            Ok(v) => {
                if !self.stages.iter().any(|s| s.name == name) {
                    self.record(name, StageStatus::Ok, "");
                }
                Some(v)
            }
            Err(e) => {
                self.record(name, StageStatus::Failed, format!("{e:#}"));
                None
            }
        }
    }

    pub fn exit_code(&self) -> u8 {
        if self.stages.iter().any(|s| s.status == StageStatus::Failed) {
            1
        } else if self.stages.iter().any(|s| s.status == StageStatus::Indeterminate) {
            2
        } else {
            0
        }
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Command-specific checks that must pass before any output is written.
pub fn precheck(cmd: Command, cfg: &RunConfig, prob: &Problem) -> anyhow::Result<()> {
    match cmd {
        Command::Analyze => {
            prob.nonlinearity(cmd.name())?;
        }
        Command::Transform => {
            prob.nonlinearity(cmd.name())?;
            cfg.scalar_l()?;
        }
        Command::Solve => {
            cfg.scalar_l()?;
            cfg.scalar_lambda()?;
        }
        Command::Sweep => {
            prob.nonlinearity(cmd.name())?;
            cfg.scalar_l()?;
            cfg.scalar_lambda()?;
            if cfg.vary.is_none() || cfg.grid.is_none() {
                return Err(usage("sweep needs `vary` and `grid`"));
            }
        }
        Command::Verify => {
            prob.nonlinearity(cmd.name())?;
            verify::precheck(cfg, prob)?;
        }
    }
    Ok(())
}

pub fn run(cmd: Command, run: &mut Run) {
    match cmd {
        Command::Analyze => analyze::run(run),
        Command::Transform => transform::run(run),
        Command::Solve => solve::run(run),
        Command::Sweep => sweep::run(run),
        Command::Verify => verify::run(run),
    }
}
