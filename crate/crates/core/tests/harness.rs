use std::process::Command;

use dfs_qkd::harness::{
    config_echo_path, emit, load_tally, render, run_sweep, sig6, ExperimentConfig, OutputFormat, Preset, CSV_COLUMNS,
};
use dfs_qkd::{RotatorSetting, Scheme};

fn quick_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Preset::ShortFiber);
    cfg.scale_duration(0.02).unwrap();
    cfg
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dfsqkd"))
}

#[test]
fn csv_has_header_plus_ten_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    let rows = run_sweep(&quick_config()).unwrap();
    assert_eq!(rows.len(), 10);
    emit(&rows, OutputFormat::Csv, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
}

#[test]
fn json_has_ten_objects_with_csv_field_names() {
    let rows = run_sweep(&quick_config()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&render(&rows, OutputFormat::Json).unwrap()).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 10);
    for obj in arr {
        let keys: Vec<&str> = obj.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, CSV_COLUMNS);
    }
}

#[test]
fn csv_round_trip_keeps_six_digits() {
    let rows = run_sweep(&quick_config()).unwrap();
    let text = render(&rows, OutputFormat::Csv).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    for (rec, row) in rdr.records().zip(&rows) {
        let rec = rec.unwrap();
        assert_eq!(rec[0].parse::<usize>().unwrap(), row.setting_index);
        assert_eq!(rec[1].parse::<Scheme>().unwrap(), row.scheme);
        let vals = [
            row.conclusive_rate_hz,
            row.normalized_coincidence,
            row.qber,
            row.qber_stderr,
            row.p_s,
            row.key_rate_fraction,
        ];
        for (field, v) in rec.iter().skip(2).zip(vals) {
            let parsed: f64 = field.parse().unwrap();
            if v.is_nan() {
                assert!(parsed.is_nan());
            } else {
                assert!((parsed - v).abs() <= 5e-6 * v.abs(), "{field} vs {v}");
                assert_eq!(field, sig6(v));
            }
        }
    }
}

#[test]
fn rows_satisfy_normalization() {
    let rows = run_sweep(&quick_config()).unwrap();
    let max = rows.iter().map(|r| r.conclusive_rate_hz).fold(0.0, f64::max);
    for r in &rows {
        assert!((0.0..=1.0).contains(&r.normalized_coincidence));
        assert!((r.normalized_coincidence - r.conclusive_rate_hz / max).abs() < 1e-12);
    }
    assert!(rows.iter().any(|r| r.normalized_coincidence == 1.0));
}

#[test]
fn short_fiber_none_rises_toward_half_at_bit_flip() {
    let mut cfg = ExperimentConfig::preset(Preset::ShortFiber);
    cfg.schemes = vec![Scheme::None];
    cfg.settings = vec![RotatorSetting::sweep(0), RotatorSetting::sweep(1), RotatorSetting::sweep(4)];
    let rows = run_sweep(&cfg).unwrap();
    for r in &rows[..2] {
        assert!(r.qber < 0.08, "setting {} qber {}", r.setting_index, r.qber);
    }
    assert!(rows[2].qber > 0.35, "bit-flip qber {}", rows[2].qber);
}

#[test]
fn unwritable_path_is_io_error() {
    let rows = run_sweep(&quick_config()).unwrap();
    let err = emit(&rows, OutputFormat::Csv, std::path::Path::new("/nonexistent/dir/rows.csv")).unwrap_err();
    assert!(matches!(err, dfs_qkd::Error::Io(_)));
    assert!(render(&[], OutputFormat::Csv).is_err());
}

#[test]
fn cli_sweep_is_byte_identical_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.path().join(name);
        let st = bin()
            .args(["sweep", "--preset", "short_fiber", "--duration-scale", "0.02", "--seed", "9", "--out"])
            .arg(&path)
            .status()
            .unwrap();
        assert!(st.success());
        outputs.push(std::fs::read(&path).unwrap());
        let echo = ExperimentConfig::load(&config_echo_path(&path)).unwrap();
        assert_eq!(echo.seed, 9);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn cli_single_then_keyrate() {
    let dir = tempfile::tempdir().unwrap();
    let tally = dir.path().join("tally.json");
    let st = bin()
        .args(["single", "--preset", "short_fiber", "--duration-scale", "0.05", "--setting", "0", "--out"])
        .arg(&tally)
        .status()
        .unwrap();
    assert!(st.success());
    let t = load_tally(&tally).unwrap();
    assert!(t.sifted > 0);

    let out = bin().arg("keyrate").arg(&tally).output().unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["rate_fraction"].as_f64().unwrap() > 0.0);
}

#[test]
fn cli_rejects_bad_config_before_simulating() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "settings = []\n").unwrap();
    let out = bin().arg("sweep").arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("setting"));
}

#[test]
fn cli_selftest_passes() {
    let out = bin().arg("selftest").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.contains("PASS")).count(), 6);
}

#[test]
fn shipped_configs_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let short = ExperimentConfig::load(&dir.join("short_fiber.toml")).unwrap();
    assert_eq!(short, ExperimentConfig::preset(Preset::ShortFiber));
    let long = ExperimentConfig::load(&dir.join("long_fiber.toml")).unwrap();
    assert_eq!(long, ExperimentConfig::preset(Preset::LongFiber));
}
