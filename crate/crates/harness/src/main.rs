use clap::{Parser, Subcommand};
use isacbench::config::{load_config, ExperimentConfig};
use isacbench::error::HarnessError;
use isacbench::report::{emit_report, write_csv, write_summary, ReportFormat, ResultRow};
use isacbench::runner::{metrics_from_records, read_records, run_with, write_records, RunOptions};
use isacbench_core::metrics::{ambiguity, AmbiguityGrid};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "isacbench", version, about = "Sensing and communication benchmark runner")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir`. Reports go to stdout when neither is set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; overrides `workers`.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = ReportFormat::Csv)]
    format: ReportFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scene, channel, estimator and metrics for every scenario, without sweep expansion.
    Simulate,
    /// Ambiguity surface of each scenario's first-trial waveform as a CSV grid.
    Ambiguity {
        /// Doppler cells over [-fs/2, fs/2).
        #[arg(long, default_value_t = 64)]
        doppler_cells: usize,
    },
    /// Recomputes record-based metrics from a previous `simulate` run.
    Metrics {
        /// Defaults to `records.jsonl` in the output directory.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Synchronization scenarios only.
    Sync,
    /// Scenarios expanded over the `[sweep]` grids, then synchronization scenarios.
    Sweep,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let path = cli.config.as_ref().ok_or_else(|| HarnessError::Validation(vec!["--config is required".into()]))?;
    let mut cfg = load_config(path)?;
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(HarnessError::Validation(vec!["--workers must be >= 1".into()]));
        }
        cfg.workers = Some(w);
    }
    let out_dir = cli.out.clone().or_else(|| cfg.output_dir.as_ref().map(|d| cfg.resolve(d)));
    eprintln!("# resolved configuration\n{}", cfg.echo());
    let opts = |scenarios, sync, sweep| RunOptions { scenarios, sync, sweep, workers: cfg.workers };
    match &cli.command {
        Command::Simulate => {
            let out = run_with(&cfg, &opts(true, false, false))?;
            if let Some(dir) = &out_dir {
                std::fs::create_dir_all(dir)?;
                write_records(&dir.join("records.jsonl"), &out.records)?;
            }
            report(&out.rows, cli.format, out_dir.as_deref())
        }
        Command::Sync => report(&run_with(&cfg, &opts(false, true, false))?.rows, cli.format, out_dir.as_deref()),
        Command::Sweep => report(&run_with(&cfg, &opts(true, true, true))?.rows, cli.format, out_dir.as_deref()),
        Command::Metrics { records } => {
            let path = match (records, &out_dir) {
                (Some(p), _) => p.clone(),
                (None, Some(d)) => d.join("records.jsonl"),
                (None, None) => return Err(HarnessError::Validation(vec!["metrics needs --records or --out".into()])),
            };
            let rows = metrics_from_records(&cfg, &read_records(&path)?)?;
            report(&rows, cli.format, out_dir.as_deref())
        }
        Command::Ambiguity { doppler_cells } => ambiguity_grids(&cfg, *doppler_cells, out_dir.as_deref()),
    }
}

fn report(rows: &[ResultRow], format: ReportFormat, dir: Option<&Path>) -> Result<(), HarnessError> {
    match dir {
        Some(d) => {
            let p = emit_report(rows, format, d)?;
            eprintln!("wrote {} rows to {}", rows.len(), p.display());
            Ok(())
        }
        None => {
            let stdout = std::io::stdout().lock();
            match format {
                ReportFormat::Csv => write_csv(rows, stdout),
                ReportFormat::Summary => write_summary(rows, stdout),
            }
        }
    }
}

fn ambiguity_grids(cfg: &ExperimentConfig, cells: usize, dir: Option<&Path>) -> Result<(), HarnessError> {
    if cells == 0 {
        return Err(HarnessError::Validation(vec!["--doppler-cells must be >= 1".into()]));
    }
    for s in &cfg.scenarios {
        let fail = |message: String| HarnessError::Trial { trial: 0, unit: s.id.clone(), message };
        let u = s.waveform.build(vec![0; s.waveform.bit_count()], &cfg.base_dir).map_err(fail)?;
        let fs = u.sample_rate();
        let n = u.len() as i64;
        let grid = AmbiguityGrid::new(
            (-(n - 1)..n).collect(),
            (0..cells).map(|k| -fs / 2.0 + k as f64 * fs / cells as f64).collect(),
        )
        .map_err(|e| fail(e.to_string()))?;
        let map = ambiguity(&u, &grid).map_err(|e| fail(e.to_string()))?;
        let mut buf = Vec::new();
        writeln!(buf, "delay_s,doppler_hz,magnitude")?;
        for (i, nu) in map.grid.dopplers.iter().enumerate() {
            for (j, tau) in map.lag_seconds().iter().enumerate() {
                writeln!(buf, "{tau},{nu},{}", map.at(i, j))?;
            }
        }
        match dir {
            Some(d) => {
                std::fs::create_dir_all(d)?;
                let p = d.join(format!("ambiguity_{}.csv", s.id.replace('/', "_")));
                std::fs::write(&p, &buf)?;
                eprintln!("wrote {}", p.display());
            }
            None => std::io::stdout().lock().write_all(&buf)?,
        }
    }
    Ok(())
}
