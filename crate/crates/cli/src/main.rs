use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use soc_market::io::RunConfig;

mod commands;

/// Lattice market simulator: criticality, gains and GARCH diagnostics.
#[derive(Debug, Parser)]
#[command(name = "soc-market", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML run configuration; defaults apply to anything missing.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding `lattice.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory, overriding `run.out_dir`.
    #[arg(long, global = true, env = "SOC_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Worker threads for ensembles (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override any configuration value, e.g. `--set gains.bin_width=0.1`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One lattice run: snapshots, signal and entropy traces, site activity.
    Simulate {
        #[arg(long)]
        steps: Option<u64>,
        /// Also write every replaced site as `s,j`.
        #[arg(long)]
        hit_log: bool,
    },
    /// Gap function, avalanches and the ensemble size distribution.
    Avalanches {
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Ensemble histogram of equilibrated returns with Gaussian fits.
    Gains {
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        equilibration: Option<u64>,
    },
    /// Return, price and volatility series for lattice and historical windows.
    Series(SeriesArgs),
    /// GARCH(1,1) fits and lattice-versus-historical tables.
    GarchFit(SeriesArgs),
    /// Validate a minute-bar file and write it in normalized form.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Keep going past bad rows and list them in the summary.
        #[arg(long)]
        lenient: bool,
    },
    /// Manifest linking every artifact in the output directory.
    Report,
}

#[derive(Debug, Args)]
struct SeriesArgs {
    /// Number of lattice series.
    #[arg(long, default_value_t = 4)]
    sets: usize,
    #[arg(long)]
    equilibration: Option<u64>,
    /// Minute-bar file for historical windows.
    #[arg(long)]
    bars: Option<PathBuf>,
    /// Start bar of a historical window; repeatable.
    #[arg(long = "offset")]
    offsets: Vec<usize>,
}

fn resolve(global: &GlobalArgs, command: &Command) -> soc_market::Result<RunConfig> {
    let text = match &global.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| soc_market::Error::Config(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut overrides = global.overrides.clone();
    let mut set = |key: &str, value: String| overrides.push(format!("{key}={value}"));
    if let Some(seed) = global.seed {
        set("lattice.seed", seed.to_string());
    }
    match command {
        Command::Simulate { steps, hit_log } => {
            if let Some(s) = steps {
                set("run.steps", s.to_string());
            }
            if *hit_log {
                set("run.hit_log", "true".into());
            }
        }
        Command::Avalanches { runs, steps } => {
            if let Some(r) = runs {
                set("run.ensemble_runs", r.to_string());
            }
            if let Some(s) = steps {
                set("run.steps", s.to_string());
            }
        }
        Command::Gains {
            runs,
            equilibration,
        } => {
            if let Some(r) = runs {
                set("run.ensemble_runs", r.to_string());
            }
            if let Some(e) = equilibration {
                set("run.equilibration_steps", e.to_string());
            }
        }
        Command::Series(a) | Command::GarchFit(a) => {
            if let Some(e) = a.equilibration {
                set("run.equilibration_steps", e.to_string());
            }
            if !a.offsets.is_empty() {
                set("series.offsets", format!("{:?}", a.offsets));
            }
        }
        Command::Ingest { .. } | Command::Report => {}
    }
    let mut config = RunConfig::from_toml_with_overrides(&text, &overrides)?;
    if let Some(dir) = &global.out_dir {
        config.run.out_dir = dir.clone();
    }
    Ok(config)
}

fn run(cli: Cli) -> soc_market::Result<()> {
    if let Some(jobs) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| soc_market::Error::Config(format!("thread pool: {e}")))?;
    }
    let config = resolve(&cli.global, &cli.command)?;
    let out = commands::Output::create(&config.run.out_dir)?;
    match cli.command {
        Command::Simulate { .. } => commands::simulate(&config, &out),
        Command::Avalanches { .. } => commands::avalanches(&config, &out),
        Command::Gains { .. } => commands::gains(&config, &out),
        Command::Series(a) => commands::series(&config, &out, a.sets, a.bars.as_deref()),
        Command::GarchFit(a) => commands::garch_fit(&config, &out, a.sets, a.bars.as_deref()),
        Command::Ingest { input, lenient } => commands::ingest(&config, &out, &input, lenient),
        Command::Report => commands::report(&config, &out),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            eprintln!("error: usage: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.class(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
