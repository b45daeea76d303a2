use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dfs_qkd::detection::simulate_session;
use dfs_qkd::harness::{self, ExperimentConfig, OutputFormat, Preset};
use dfs_qkd::{security, selftest, RotatorSetting, Scheme};

#[derive(Parser)]
#[command(name = "dfsqkd", version, about = "Reference-frame-free QKD simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset used when no config is given.
    #[arg(long, default_value = "long_fiber")]
    preset: Preset,
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies the simulated time per setting.
    #[arg(long, default_value_t = 1.0)]
    duration_scale: f64,
}

impl Common {
    fn resolve(&self) -> dfs_qkd::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::preset(self.preset),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.scale_duration(self.duration_scale)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every (scheme, setting) pair and write one row each.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one setting and print its tally as JSON.
    Single {
        #[command(flatten)]
        common: Common,
        /// Index into the configured settings.
        #[arg(long, default_value_t = 0, conflicts_with = "angles")]
        setting: usize,
        /// Explicit plate angles in degrees: QWP1,HWP,QWP2.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        angles: Option<Vec<f64>>,
        #[arg(long, default_value = "flip_half")]
        scheme: Scheme,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Read a tally file and print the security report.
    Keyrate { tally: PathBuf },
    /// Run the built-in invariant suites.
    Selftest,
}

fn run(cli: Cli) -> dfs_qkd::Result<bool> {
    match cli.command {
        Command::Sweep { common, format, out } => {
            let cfg = common.resolve()?;
            let rows = harness::run_sweep(&cfg)?;
            match out {
                Some(path) => {
                    harness::emit(&rows, format, &path)?;
                    let echo = harness::write_config_echo(&cfg, &path)?;
                    eprintln!("wrote {} rows to {} (config in {})", rows.len(), path.display(), echo.display());
                }
                None => print!("{}", harness::render(&rows, format)?),
            }
            Ok(true)
        }
        Command::Single { common, setting, angles, scheme, out } => {
            let cfg = common.resolve()?;
            let rotator = match angles {
                Some(a) => RotatorSetting::new(a[0], a[1], a[2])?,
                None => *cfg.settings.get(setting).ok_or_else(|| {
                    dfs_qkd::Error::InvalidConfig(format!("setting {setting} out of range (have {})", cfg.settings.len()))
                })?,
            };
            let tally = simulate_session(&cfg.noise, &rotator, scheme, cfg.duration_s, cfg.seed)?;
            let json = serde_json::to_string_pretty(&tally)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, json + "\n")?;
                    harness::write_config_echo(&cfg, &path)?;
                }
                None => println!("{json}"),
            }
            match security::report(&tally) {
                Ok(r) => eprintln!("{}", serde_json::to_string(&r)?),
                Err(e) => eprintln!("no report: {e}"),
            }
            Ok(true)
        }
        Command::Keyrate { tally } => {
            let t = harness::load_tally(&tally)?;
            println!("{}", serde_json::to_string_pretty(&security::report(&t)?)?);
            Ok(true)
        }
        Command::Selftest => {
            let results = selftest::run_all();
            for r in &results {
                println!("{r}");
            }
            Ok(selftest::all_passed(&results))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
