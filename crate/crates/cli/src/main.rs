//! `freqhop`: run configured interferometer experiments.
//!
//!   freqhop fringes --config scan.toml --out results/
//!   freqhop hbt --config hbt.toml --trials 100000 --seed 7
//!   freqhop replay-counts
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 for runtime errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use freqhop::detection::{PublishedCounts, PUBLISHED_COUNTS};
use freqhop::experiment::output::{headline_metrics, truncate_sig};
use freqhop::experiment::run::ReplayRow;
use freqhop::experiment::{emit_replay, emit_results, parse_config, replay_counts, run, ExperimentKind};
use freqhop::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "freqhop", version, about = "Two-colour Mach-Zehnder interferometer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fringe scan over mirror displacement (also runs `single_shot` configs).
    Fringes(RunArgs),
    /// Second-order correlation, linear or across the converter.
    Hbt(RunArgs),
    /// Conversion efficiency against pump intensity.
    QeCurve(RunArgs),
    /// Up-conversion of a polarization-entangled pair.
    Ebit(RunArgs),
    /// Recompute g2 bounds from recorded count totals.
    ReplayCounts(ReplayArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `trials` from the config.
    #[arg(long, conflicts_with = "analytic_only")]
    trials: Option<u64>,
    /// Exact probabilities only; no sampling.
    #[arg(long)]
    analytic_only: bool,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// Count record `N,N_A,N_B,N_C`; repeatable. Defaults to the built-in records.
    #[arg(long = "counts", value_name = "N,N_A,N_B,N_C")]
    counts: Vec<String>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else {
        3
    }
}

fn run_experiment(args: &RunArgs, allowed: &[ExperimentKind], command: &str) -> Result<()> {
    let mut config = parse_config(&args.config)?;
    if !allowed.contains(&config.kind) {
        return Err(Error::Config(format!(
            "{}: kind `{}` cannot be run by `{command}`",
            args.config.display(),
            config.kind.as_str()
        )));
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if args.analytic_only {
        config.trials = 0;
    }
    let output = run(&config)?;
    let written = emit_results(&config, &output, &args.out)?;
    report_written(&written);
    if let Some(metrics) = headline_metrics(&output).as_object() {
        for (k, v) in metrics {
            println!("  {k} = {v}");
        }
    }
    Ok(())
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn parse_counts(text: &str) -> Result<PublishedCounts> {
    let fields: Vec<u64> = text
        .split(',')
        .map(|f| f.trim().parse::<u64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("--counts {text:?}: {e}")))?;
    let [n, a, b, c] = fields[..] else {
        return Err(Error::Config(format!("--counts {text:?}: expected N,N_A,N_B,N_C")));
    };
    Ok(PublishedCounts {
        label: "custom",
        n_trials: n,
        n_a: a,
        n_b: b,
        n_c: c,
        quoted_bound: f64::NAN,
    })
}

fn replay(args: &ReplayArgs) -> Result<()> {
    let mut rows: Vec<ReplayRow> = if args.counts.is_empty() {
        replay_counts(&PUBLISHED_COUNTS)?
    } else {
        let records = args.counts.iter().map(|c| parse_counts(c)).collect::<Result<Vec<_>>>()?;
        replay_counts(&records)
            .map_err(|e| Error::Config(e.to_string()))?
            .into_iter()
            .enumerate()
            .map(|(i, mut r)| {
                r.label = format!("custom_{}", i + 1);
                r.quoted_bound = None;
                r
            })
            .collect()
    };
    rows.sort_by(|a, b| a.label.cmp(&b.label));
    for r in &rows {
        let g = &r.estimate;
        print!(
            "{}: N = {}, N_A = {}, N_B = {}, N_C = {}, g2 <= {}",
            r.label,
            g.n_trials,
            g.n_a,
            g.n_b,
            g.n_c,
            truncate_sig(g.upper_bound, 3)
        );
        match r.quoted_bound {
            Some(q) => println!(" (quoted {q:.2e})"),
            None => println!(),
        }
    }
    report_written(&emit_replay(&rows, &args.out)?);
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    use ExperimentKind::*;
    match &cli.command {
        Command::Fringes(a) => run_experiment(a, &[Fringes, SingleShot], "fringes"),
        Command::Hbt(a) => run_experiment(a, &[HbtLinear, HbtNonlinear], "hbt"),
        Command::QeCurve(a) => run_experiment(a, &[QeCurve], "qe-curve"),
        Command::Ebit(a) => run_experiment(a, &[Ebit], "ebit"),
        Command::ReplayCounts(a) => replay(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
