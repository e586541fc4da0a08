use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pmimo::config::{validate, PatternSource, SchemeKind, SimConfig};
use pmimo::harness::{run_and_write, Arm, ExperimentPlan, Figure};
use pmimo::Error;

#[derive(Parser, Debug)]
#[command(name = "pmimo", version, about = "Pseudo-MIMO OFDM link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Per-subcarrier condition numbers of the effective channel.
    Condnum,
    /// Spectral efficiency over the SNR grid.
    Se,
    /// Energy efficiency over a transmit-power sweep.
    Ee,
    /// Coded QPSK block error rate over the SNR grid.
    Bler,
    /// Time-domain link against the effective-channel model.
    Validate,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SchemeArg {
    Pmimo,
    Fd,
    Hybrid,
    All,
}

#[derive(clap::Args, Debug)]
struct Opts {
    /// `key = value` config file; unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    realizations: Option<usize>,
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[arg(long, global = true, value_enum, default_value_t = SchemeArg::All)]
    scheme: SchemeArg,
    /// dft, random, opt or quant:<bits>
    #[arg(long, global = true, value_parser = parse_pattern)]
    pattern: Option<PatternSource>,
}

fn parse_pattern(s: &str) -> Result<PatternSource, String> {
    s.parse().map_err(|_| format!("unknown pattern source `{s}`"))
}

fn figure(c: Command) -> Figure {
    match c {
        Command::Condnum => Figure::CondNum,
        Command::Se => Figure::SeSweep,
        Command::Ee => Figure::EeCurve,
        Command::Bler => Figure::Bler,
        Command::Validate => Figure::Validate,
    }
}

fn build_plan(cli: &Cli) -> Result<ExperimentPlan, Error> {
    let o = &cli.opts;
    let mut cfg = match &o.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            SimConfig::from_kv_str(&text)?
        }
        None => SimConfig::default(),
    };
    if let Some(s) = o.seed {
        cfg.master_seed = s;
    }
    if let Some(r) = o.realizations {
        cfg.n_realizations = r;
    }
    if let Some(p) = o.pattern {
        cfg.pattern_source = p;
    }
    let cfg = validate(cfg)?;
    let arms: Vec<Arm> = Arm::all(&cfg)
        .into_iter()
        .filter(|a| match o.scheme {
            SchemeArg::All => true,
            SchemeArg::Pmimo => a.scheme.kind == SchemeKind::Pmimo,
            SchemeArg::Fd => a.scheme.kind == SchemeKind::FdMimo,
            SchemeArg::Hybrid => a.scheme.kind == SchemeKind::HybridMimo,
        })
        .collect();
    let mut plan = ExperimentPlan::new(figure(cli.command), arms, &o.out)?;
    plan.workers = o.workers.max(1);
    Ok(plan)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match build_plan(&cli).and_then(|plan| run_and_write(&plan)) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Io { .. }) { 2 } else { 1 })
        }
    }
}
