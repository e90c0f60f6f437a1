use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use floodda::gauges::read_metrics_csv;
use floodda::harness::{
    compare_experiments, prepare_scenario, read_csi_csv, run_batch, run_experiment, write_comparison_csv, write_report,
    write_truth, ExperimentConfig, ExperimentReport,
};
use floodda::time::TimeBase;
use floodda::{ControlSet, Error};

/// Twin experiments for ensemble data assimilation in a 2D flood model.
#[derive(Parser, Debug)]
#[command(name = "floodda", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the truth run, synthetic observations and reference flood maps.
    Truth(Common),
    /// Run one experiment.
    Run(Common),
    /// Run the FR1, FR2 and DA1 to DA5 matrix on one shared truth.
    Batch(Common),
    /// Rank experiments from existing output directories.
    Report {
        /// Experiment directories, or a single batch directory.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (TOML). Defaults describe DA2 on the 30-day event.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    members: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    no_bias_correction: bool,
    /// `all` or `friction`.
    #[arg(long)]
    controls: Option<ControlSet>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.members {
            cfg.members = n;
        }
        if let Some(t) = self.tau {
            cfg.tau = t;
        }
        if self.no_bias_correction {
            cfg.bias_correction = false;
        }
        if let Some(c) = self.controls {
            cfg.controls = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn rejects_matrix_overrides(&self) -> Result<(), Error> {
        if self.tau.is_some() || self.no_bias_correction || self.controls.is_some() {
            return Err(Error::Config(
                "batch fixes tau, bias correction and controls per experiment; drop those flags".into(),
            ));
        }
        Ok(())
    }
}

fn summary(r: &ExperimentReport) -> String {
    let rmse: Vec<String> = r.metrics.iter().map(|m| format!("{} {:.4}", m.station, m.rmse)).collect();
    format!("{}: RMSE {} m", r.config.name, rmse.join(", "))
}

/// Directories holding a `metrics.csv`: the arguments themselves, or the
/// children of a single batch directory.
fn experiment_dirs(dirs: &[PathBuf]) -> Result<Vec<PathBuf>, Error> {
    let has_metrics = |d: &Path| d.join("metrics.csv").is_file();
    if let [single] = dirs {
        if !has_metrics(single) {
            let mut children: Vec<PathBuf> = std::fs::read_dir(single)
                .map_err(|e| Error::Config(format!("{}: {e}", single.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| has_metrics(p))
                .collect();
            children.sort();
            return Ok(children);
        }
    }
    match dirs.iter().find(|d| !has_metrics(d)) {
        Some(d) => Err(Error::Config(format!("{} has no metrics.csv", d.display()))),
        None => Ok(dirs.to_vec()),
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    let time = TimeBase::default();
    match cli.command {
        Command::Truth(args) => {
            let cfg = args.config()?;
            let scenario = prepare_scenario(&cfg)?;
            write_truth(&cfg, &scenario, &args.out, &time)?;
            println!("truth written to {}", args.out.display());
        }
        Command::Run(args) => {
            let cfg = args.config()?;
            let scenario = prepare_scenario(&cfg)?;
            let report = run_experiment(&cfg, &scenario)?;
            write_report(&report, &scenario, &args.out, &time)?;
            println!("{}", summary(&report));
        }
        Command::Batch(args) => {
            args.rejects_matrix_overrides()?;
            let cfg = args.config()?;
            let (scenario, reports) = run_batch(&cfg)?;
            write_truth(&cfg, &scenario, args.out.join("truth"), &time)?;
            for r in &reports {
                write_report(r, &scenario, args.out.join(&r.config.name), &time)?;
                println!("{}", summary(r));
            }
            let metrics: Vec<_> = reports.iter().flat_map(|r| r.metrics.clone()).collect();
            let mut csi = Vec::new();
            for r in &reports {
                csi.extend(read_csi_csv(args.out.join(&r.config.name).join("csi.csv"))?);
            }
            write_comparison_csv(&compare_experiments(&metrics, &csi)?, args.out.join("comparison.csv"))?;
        }
        Command::Report { dirs, out } => {
            let dirs = experiment_dirs(&dirs)?;
            let (mut metrics, mut csi) = (Vec::new(), Vec::new());
            for d in &dirs {
                metrics.extend(read_metrics_csv(d.join("metrics.csv"))?);
                let c = d.join("csi.csv");
                if c.is_file() {
                    csi.extend(read_csi_csv(c)?);
                }
            }
            let rows = compare_experiments(&metrics, &csi)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Config(format!("{}: {e}", out.display())))?;
            write_comparison_csv(&rows, out.join("comparison.csv"))?;
            for r in rows.iter().filter(|r| r.mark == "best") {
                println!("best {} at {}: {} ({:.4})", r.metric, r.key, r.experiment, r.value);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap reports usage errors with code 2, which is reserved for numerical
    // failures here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for numerical failures, 1 for everything else (bad input, i/o).
fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}
