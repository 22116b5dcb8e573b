use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fiberair::xprunner::{
    build_library, csv_string, emit_csv, optimize_subcarrier_powers, parse_csv, plot_table,
    run_sweep, ExperimentConfig, InputSpec, SweepResult,
};
use fiberair::{Error, Library};

/// Environment variable holding the worker thread count.
const WORKERS_ENV: &str = "FIBERAIR_WORKERS";

#[derive(Parser)]
#[command(name = "fiberair", version, about = "Nonlinear fiber AIR sweeps")]
struct Cli {
    /// Worker threads (overrides FIBERAIR_WORKERS; default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration file without running anything.
    Validate { config: PathBuf },
    /// Run the launch-power sweep and write the CSV.
    Sweep {
        config: PathBuf,
        /// Output CSV (default: the config's output.csv, else stdout).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Run only the techniques with these labels.
        #[arg(long = "only")]
        only: Vec<String>,
    },
    /// Build a sequence library for a selected-sequences technique.
    Select {
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Technique label (default: the first selected-sequences technique).
        #[arg(long)]
        technique: Option<String>,
        /// Surrogate launch power, dBm (default: the selection power or the first sweep power).
        #[arg(long, allow_hyphen_values = true)]
        power: Option<f64>,
    },
    /// Optimize per-subcarrier launch powers.
    OptimizeSc {
        config: PathBuf,
        /// Also write the evaluated allocations as sweep CSV.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Convert a sweep CSV into a wide table for plotting.
    Plotdata {
        csv: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(path).map_err(|e| Failure::Config(e.to_string()))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let labels: Vec<&str> = cfg.techniques.iter().map(|t| t.label.as_str()).collect();
            println!(
                "ok: {} channels, {} techniques [{}], {} powers x {} blocks",
                cfg.scenario.n_channels,
                cfg.techniques.len(),
                labels.join(", "),
                cfg.sweep.powers_dbm.len(),
                cfg.sweep.blocks_per_point
            );
            Ok(())
        }
        Command::Sweep {
            config,
            output,
            only,
        } => {
            let mut cfg = load(&config)?;
            if !only.is_empty() {
                for l in &only {
                    cfg.technique(l).map_err(Failure::from)?;
                }
                cfg.techniques.retain(|t| only.contains(&t.label));
            }
            let result = run_sweep(&cfg)?;
            let target = output.or_else(|| cfg.output.csv.clone());
            match &target {
                Some(p) => emit_csv(&result, p)?,
                None => print!("{}", csv_string(&result)?),
            }
            report_peaks(&result);
            let failed = result.failures().count();
            if failed > 0 {
                for r in result.failures() {
                    eprintln!(
                        "failed: {} @ {} dBm: {}",
                        r.config,
                        r.power_dbm,
                        r.error.as_deref().unwrap_or("")
                    );
                }
                return Err(Failure::Runtime(format!("{failed} sweep points failed")));
            }
            Ok(())
        }
        Command::Select {
            config,
            output,
            technique,
            power,
        } => {
            let cfg = load(&config)?;
            let t = match &technique {
                Some(l) => cfg.technique(l).map_err(Failure::from)?,
                None => cfg
                    .techniques
                    .iter()
                    .find(|t| t.input == InputSpec::SelectedSequences)
                    .ok_or_else(|| Failure::Config("no selected_sequences technique".into()))?,
            };
            let sel = cfg
                .selection
                .as_ref()
                .ok_or_else(|| Failure::Config("missing 'selection' section".into()))?;
            let p = power.or(sel.power_dbm).unwrap_or(cfg.sweep.powers_dbm[0]);
            let lib: Library = build_library(&cfg, t, p)?;
            let path = output
                .or_else(|| cfg.output.library.clone())
                .ok_or_else(|| Failure::Config("no library output path (-o)".into()))?;
            lib.save(&path)?;
            eprintln!(
                "kept {} of {} candidates at {p} dBm: mean cost {:.4e} W, population {:.4e} W (ratio {:.3})",
                lib.len(),
                lib.n_candidates,
                lib.mean_cost(),
                lib.population_mean_cost,
                lib.mean_cost() / lib.population_mean_cost
            );
            Ok(())
        }
        Command::OptimizeSc { config, output } => {
            let cfg = load(&config)?;
            let opt = optimize_subcarrier_powers(&cfg)?;
            println!("power_dbm: {}", opt.power_dbm);
            for (tilt, row) in &opt.evaluated {
                println!(
                    "tilt {tilt:+.2} dB: {:.4} ± {:.4}",
                    row.air_bits, row.std_err
                );
            }
            let factors: Vec<String> = opt
                .power_factors
                .iter()
                .map(|f| format!("{f:.4}"))
                .collect();
            println!(
                "best tilt {:+.2} dB, factors [{}], AIR {:.4} ± {:.4} bits/sym/pol",
                opt.tilt_db,
                factors.join(", "),
                opt.row.air_bits,
                opt.row.std_err
            );
            if let Some(p) = output {
                let rows = opt
                    .evaluated
                    .iter()
                    .map(|(tilt, r)| fiberair::xprunner::SweepRow {
                        config: format!("{}@{:+}dB", r.config, tilt),
                        ..r.clone()
                    })
                    .collect();
                emit_csv(&SweepResult::new(rows), &p)?;
            }
            Ok(())
        }
        Command::Plotdata { csv, output } => {
            let text = std::fs::read_to_string(&csv)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", csv.display())))?;
            let rows = parse_csv(&text).map_err(|e| Failure::Config(e.to_string()))?;
            write_text(output.as_deref(), &plot_table(&rows))
        }
    }
}

fn report_peaks(result: &SweepResult) {
    for label in result.configs() {
        if let Some(p) = result.peak(&label) {
            eprintln!(
                "peak {label}: {:.4} ± {:.4} bits/sym/pol at {} dBm",
                p.air_bits, p.std_err, p.power_dbm
            );
        }
    }
}

fn configure_workers(flag: Option<usize>) -> Result<(), Failure> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                Failure::Config(format!(
                    "{WORKERS_ENV} must be a positive integer, got '{v}'"
                ))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Failure::Config("worker count must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = configure_workers(cli.workers).and_then(|_| run(cli));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
