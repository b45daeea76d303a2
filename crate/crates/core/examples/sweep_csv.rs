//! Runs the default sweep from a TOML snippet and prints CSV, as
//! `dfsqkd sweep` would.

use dfs_qkd::harness::{average_qber, render, run_sweep};
use dfs_qkd::{ExperimentConfig, OutputFormat};

const CONFIG: &str = r#"
preset = "short_fiber"
seed = 42
schemes = ["none", "flip_half", "haar"]

[noise]
singles_rate_hz = 2000.0
"#;

fn main() -> dfs_qkd::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    let rows = run_sweep(&cfg)?;
    print!("{}", render(&rows, OutputFormat::Csv)?);
    for s in cfg.schemes {
        eprintln!("{s}: mean qber {:.4}", average_qber(&rows, s).unwrap_or(f64::NAN));
    }
    Ok(())
}
