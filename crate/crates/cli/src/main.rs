//! `gradreg`: command-line front end for the gradient-regularization solver.

mod commands;
mod config;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;

use commands::{Command, Run};
use config::UsageError;
use manifest::{RunManifest, ARTIFACT};
use output::OutputDir;

const EXIT_ERROR: u8 = 1;
const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(name = "gradreg", version, about = "Quasilinear problems with natural-growth gradient terms")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Built-in configuration: f_pos, f_sign, f_sqrt, linear or schrodinger.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Seed for randomized checks; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

fn fail(err: &anyhow::Error) -> ExitCode {
    let code = if err.downcast_ref::<UsageError>().is_some() { EXIT_USAGE } else { EXIT_ERROR };
    eprintln!("gradreg: {err:#}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let start = Instant::now();

    let prepared = (|| -> anyhow::Result<_> {
        if cli.jobs == Some(0) {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        let mut cfg = config::load(cli.preset.as_deref(), cli.config.as_deref(), cli.seed)?;
        if let Some(out) = &cli.out {
            cfg.output_dir = Some(out.clone());
        }
        let prob = cfg.resolve()?;
        commands::precheck(cli.command, &cfg, &prob)?;
        Ok((cfg, prob))
    })();
    let (cfg, prob) = match prepared {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            return fail(&e.into());
        }
    }
    let out = match OutputDir::create(&cfg.output_dir()) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };

    let mut run = Run::new(&cfg, &prob, out);
    commands::run(cli.command, &mut run);
    let exit = run.exit_code();
    let manifest = RunManifest {
        artifact: ARTIFACT,
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        preset: cli.preset.as_deref(),
        seed: cfg.seed,
        jobs: cli.jobs,
        config: serde_json::to_value(&cfg).expect("config serializes"),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        stages: &run.stages,
        files: run.out.files(),
        exit_code: exit,
    };
    if let Err(e) = run.out.write_manifest(&manifest.to_value()) {
        return fail(&e);
    }
    for s in run.stages.iter().filter(|s| s.status != commands::StageStatus::Ok) {
        eprintln!("gradreg: stage {} {:?}: {}", s.name, s.status, s.message);
    }
    ExitCode::from(exit)
}
