use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use rsma_aoi::baselines::SchemeTag;
use rsma_aoi::cli::{emit_results, run_experiment, write_raw_trace, write_traces, ExperimentId, ExperimentSpec, RunOptions};
use rsma_aoi::model::SystemConfig;
use rsma_aoi::{Error, Result};

/// Age-of-information experiments for rate-splitting vehicular broadcast.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// JSON scenario; missing keys take the default scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// One of validate-analytic, csit-compare, convergence, sweep-power, sweep-velocity,
    /// sweep-blocklength, sweep-antennas, maxaoi-power, maxaoi-blocklength, lambda-tradeoff.
    #[arg(long)]
    experiment: String,
    /// Overrides `rng_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `n_trials` (slots per Monte Carlo run).
    #[arg(long)]
    trials: Option<usize>,
    /// Output CSV, replaced if present.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Comma-separated subset of rsma,sdma,noma.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// Comma-separated sweep grid replacing the experiment default.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    sweep: Option<Vec<f64>>,
    /// Comma-separated series grid (velocities or λ values) replacing the default.
    #[arg(long, value_delimiter = ',')]
    series: Option<Vec<f64>>,
    /// Writes every optimizer trace to this CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Writes the per-slot trace of the first Monte Carlo trajectory to this CSV.
    #[arg(long)]
    raw_trace: Option<PathBuf>,
    /// Slots kept in the raw trace.
    #[arg(long, default_value_t = 1000)]
    raw_trace_slots: usize,
}

fn run(args: Args) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io(format!("cannot read {}: {e}", p.display())))?;
            SystemConfig::from_json(&text)?
        }
        None => SystemConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.rng_seed = s;
    }
    if let Some(t) = args.trials {
        cfg.n_trials = t;
    }
    let id: ExperimentId = args.experiment.parse()?;
    let mut spec = ExperimentSpec::new(id);
    if let Some(list) = &args.schemes {
        spec.schemes = list.iter().filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse::<SchemeTag>()).collect::<Result<_>>()?;
    }
    if let Some(v) = args.sweep {
        spec.sweep = v;
    }
    if let Some(v) = args.series {
        spec.series = v;
    }
    spec.out = Some(args.out.clone());
    if args.workers == 0 {
        return Err(Error::InvalidArgument("--workers must be at least 1".into()));
    }
    let run = RunOptions { workers: args.workers, raw_trace_slots: if args.raw_trace.is_some() { args.raw_trace_slots } else { 0 } };
    let table = run_experiment(&spec, &cfg, &run)?;
    for d in &table.diagnostics {
        eprintln!("warning: {d}");
    }
    emit_results(&table.rows, &args.out)?;
    if let Some(p) = &args.trace_out {
        let f = std::fs::File::create(p).map_err(|e| Error::Io(format!("cannot write {}: {e}", p.display())))?;
        write_traces(&table.traces, std::io::BufWriter::new(f))?;
    }
    if let Some(p) = &args.raw_trace {
        let f = std::fs::File::create(p).map_err(|e| Error::Io(format!("cannot write {}: {e}", p.display())))?;
        write_raw_trace(&table.raw_trace, std::io::BufWriter::new(f))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
