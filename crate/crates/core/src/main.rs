use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use parsebrain::pipeline::{
    cmd_compare, cmd_encode, cmd_features, cmd_probe, cmd_report, selftest, FeatureGroup, PipelineError, Run,
    RunConfig, StudyMode,
};

#[derive(Parser)]
#[command(name = "parsebrain", version, about = "Syntactic feature spaces, fMRI encoding models and ROI statistics")]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the configured feature spaces.
    Features,
    /// Fit cross-validated encoding models.
    Encode {
        /// Groups such as `CC+CI`; all configured groups when omitted.
        groups: Vec<String>,
    },
    /// Run a significance study over stored encodings.
    Compare {
        /// individual, hierarchical or pairwise.
        mode: String,
    },
    /// Summarise compared studies as CSV, JSON and SVG.
    Report {
        /// Studies to report; every study on disk when omitted.
        modes: Vec<String>,
    },
    /// Word-level semantic probe of every space.
    Probe,
    /// Planted-signal end-to-end check on generated data.
    Selftest,
}

fn load(cli: &Cli) -> Result<Run, PipelineError> {
    let path = cli.config.as_ref().ok_or_else(|| PipelineError::Config { line: None, msg: "--config is required".into() })?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.set_seed(s);
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    Run::new(cfg)
}

fn run(cli: &Cli) -> Result<bool, PipelineError> {
    match &cli.cmd {
        Cmd::Features => {
            let run = load(cli)?;
            for (space, dim) in cmd_features(&run)? {
                println!("{space}\t{dim}");
            }
        }
        Cmd::Encode { groups } => {
            let run = load(cli)?;
            let groups: Vec<FeatureGroup> = groups.iter().map(|g| FeatureGroup::parse(g)).collect::<Result<_, _>>()?;
            for s in cmd_encode(&run, &groups)? {
                println!("{}\t{}\t{}\t{:.6}", s.group, s.subject, s.design_dim, s.mean_pooled_r2);
            }
        }
        Cmd::Compare { mode } => {
            let run = load(cli)?;
            let outcome = cmd_compare(&run, mode.parse()?)?;
            for (c, maps) in outcome.comparisons.iter().zip(&outcome.maps) {
                let n: usize = maps.iter().map(|m| m.n_rejected()).sum();
                println!("{}\t{n}", c.name);
            }
        }
        Cmd::Report { modes } => {
            let run = load(cli)?;
            let modes: Vec<StudyMode> = modes.iter().map(|m| m.parse()).collect::<Result<_, _>>()?;
            for (mode, rows) in cmd_report(&run, &modes)? {
                println!("{mode}\t{} rows", rows.len());
            }
        }
        Cmd::Probe => {
            let run = load(cli)?;
            for r in cmd_probe(&run)? {
                println!("{}\t{:.6}", r.space, r.r2);
            }
        }
        Cmd::Selftest => {
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out")).join("selftest");
            let checks = selftest(&dir, cli.jobs)?;
            for c in &checks {
                println!("{c}");
            }
            return Ok(checks.iter().all(|c| c.pass));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
