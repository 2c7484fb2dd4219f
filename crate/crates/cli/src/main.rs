use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use hetgcn::harness::{self, LambdaSetting, Mode, RunConfig, RunSummary};
use hetgcn::{Error, Result};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    BuildGraph,
    Train,
    Eval,
    Sweep,
    Ablate,
}

impl From<Command> for Mode {
    fn from(c: Command) -> Mode {
        match c {
            Command::BuildGraph => Mode::BuildGraph,
            Command::Train => Mode::Train,
            Command::Eval => Mode::Eval,
            Command::Sweep => Mode::Sweep,
            Command::Ablate => Mode::Ablate,
        }
    }
}

/// Text classification over a document-word graph with a fused embedding head.
#[derive(Debug, Parser)]
#[command(name = "hetgcn", version)]
struct Args {
    mode: Command,

    /// Run configuration; repeat once per task for `ablate`.
    #[arg(short, long = "config", required = true)]
    configs: Vec<PathBuf>,

    /// Fusion weight in [0, 1], or `sweep` to select it on the dev split.
    #[arg(long)]
    lambda: Option<String>,

    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (overrides `out` in every config).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(args: &Args, mode: Mode) -> Result<Vec<RunConfig>> {
    let lambda: Option<LambdaSetting> = args.lambda.as_deref().map(str::parse).transpose()?;
    let mut cfgs = Vec::new();
    for path in &args.configs {
        let mut cfg = RunConfig::load(path, mode)?;
        if let Some(l) = &lambda {
            cfg.lambda = l.clone();
        }
        if let Some(seed) = args.seed {
            cfg.train.seed = seed;
        }
        if let Some(out) = &args.out {
            cfg.out = out.clone();
        }
        cfgs.push(cfg);
    }
    Ok(cfgs)
}

fn run(args: &Args) -> Result<RunSummary> {
    let mode = Mode::from(args.mode);
    let cfgs = load(args, mode)?;
    if mode == Mode::Ablate {
        let out = args.out.clone().unwrap_or_else(|| cfgs[0].out.clone());
        let mut summary = RunSummary::default();
        harness::ablate(&cfgs, &out, &mut summary)?;
        return Ok(summary);
    }
    match cfgs.as_slice() {
        [cfg] => harness::run(cfg),
        _ => Err(Error::Config(
            "only ablate accepts more than one --config".into(),
        )),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&args) {
        Ok(summary) => {
            for line in &summary.lines {
                println!("{line}");
            }
            for path in &summary.artifacts {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
