//! `run`, `compare` and `metrics`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::config::{parse_config, RunConfig};
use crate::io::report::render;
use crate::io::sink::{read_csv, CsvSink, TimeSeriesSink};
use crate::metrics::{summarize_rows, SummaryMetrics, Window};
use crate::testbench::run_scenario;

/// Overrides `[output] dir` when set.
pub const OUTPUT_DIR_ENV: &str = "MMC_OUTPUT_DIR";

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const REPORT_FILE: &str = "metrics.txt";
pub const METRICS_JSON_FILE: &str = "metrics.json";

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: SummaryMetrics,
    pub dir: PathBuf,
    pub report: String,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Output directory after applying the environment override.
pub fn output_dir(config: &RunConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => config.output_dir.clone(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Simulates `config`, writing the time series and both metric files to `dir`.
pub fn run_config(config: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut sink = CsvSink::create(dir.join(TIMESERIES_FILE), config.system.params.n_sm)?;
    let summary = run_scenario(&config.system, &config.scenario, &mut sink)?;
    sink.finish()?;
    drop(sink);
    let report = render(&summary);
    write_file(&dir.join(REPORT_FILE), &report)?;
    write_file(&dir.join(METRICS_JSON_FILE), &serde_json::to_string_pretty(&summary)?)?;
    Ok(RunOutcome {
        summary,
        dir: dir.to_path_buf(),
        report,
    })
}

pub fn run_command(config_path: &Path) -> Result<RunOutcome> {
    let config = load_config(config_path)?;
    let dir = output_dir(&config);
    run_config(&config, &dir)
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub a: SummaryMetrics,
    pub b: SummaryMetrics,
    /// Arm-averaged switching frequency of `b` over that of `a`.
    pub f_s_ratio: f64,
    /// Difference of mean steady-state ripple, `b - a` (percentage points).
    pub ripple_delta_pct: f64,
    pub report: String,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Runs two configs that differ only in their policy schedule.
pub fn compare_configs(a: &RunConfig, b: &RunConfig, dir: &Path) -> Result<Comparison> {
    let diffs = a.differences_outside_schedule(b);
    if !diffs.is_empty() {
        return Err(Error::ConfigMismatch(diffs.join("\n")));
    }
    let (dir_a, dir_b) = (dir.join("a"), dir.join("b"));
    let (ra, rb) = std::thread::scope(|s| {
        let ha = s.spawn(|| run_config(a, &dir_a));
        let hb = s.spawn(|| run_config(b, &dir_b));
        (
            ha.join().expect("comparison run a panicked"),
            hb.join().expect("comparison run b panicked"),
        )
    });
    let (ra, rb) = (ra?, rb?);

    let fa = ra.summary.aggregate.f_s_mean;
    let fb = rb.summary.aggregate.f_s_mean;
    let f_s_ratio = if fa == fb { 1.0 } else { fb / fa };
    let ripple_delta_pct = mean(&rb.summary.steady_ripple_pct()) - mean(&ra.summary.steady_ripple_pct());

    let mut report = String::new();
    let pair = |report: &mut String, key: &str, x: f64, y: f64| {
        let _ = writeln!(report, "a.{key} = {x}");
        let _ = writeln!(report, "b.{key} = {y}");
    };
    pair(&mut report, "f_s_mean_hz", fa, fb);
    pair(
        &mut report,
        "ripple_steady_mean_pct",
        mean(&ra.summary.steady_ripple_pct()),
        mean(&rb.summary.steady_ripple_pct()),
    );
    pair(&mut report, "i_z_max_ratio", ra.summary.aggregate.max_i_z_ratio(), rb.summary.aggregate.max_i_z_ratio());
    pair(
        &mut report,
        "tracking_rmse_max_pct",
        ra.summary.aggregate.max_tracking_rmse_pct(),
        rb.summary.aggregate.max_tracking_rmse_pct(),
    );
    pair(&mut report, "p_ac_w", ra.summary.aggregate.p_ac, rb.summary.aggregate.p_ac);
    pair(&mut report, "p_dc_w", ra.summary.aggregate.p_dc, rb.summary.aggregate.p_dc);
    let _ = writeln!(report, "f_s_ratio = {f_s_ratio}");
    let _ = writeln!(report, "ripple_delta_pct = {ripple_delta_pct}");
    write_file(&dir.join("compare.txt"), &report)?;

    Ok(Comparison {
        a: ra.summary,
        b: rb.summary,
        f_s_ratio,
        ripple_delta_pct,
        report,
    })
}

pub fn compare_command(path_a: &Path, path_b: &Path) -> Result<Comparison> {
    let a = load_config(path_a)?;
    let b = load_config(path_b)?;
    let dir = output_dir(&a).join("compare");
    compare_configs(&a, &b, &dir)
}

/// Options for recomputing metrics from a CSV.
#[derive(Debug, Clone, Copy)]
pub struct MetricsOptions {
    pub window: Option<(f64, f64)>,
    /// Nominal DC voltage; capacitor nominal is `v_dc / n`.
    pub v_dc: f64,
    pub settle: f64,
    pub segment: f64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions {
            window: None,
            v_dc: 60e3,
            settle: 0.2,
            segment: 0.1,
        }
    }
}

pub fn metrics_command(csv_path: &Path, opts: MetricsOptions) -> Result<(SummaryMetrics, String)> {
    let (n_sm, rows) = read_csv(csv_path)?;
    if n_sm == 0 {
        return Err(Error::Contract("CSV has no submodule columns".into()));
    }
    let end = rows.last().map_or(0.0, |r| r.t);
    let (t0, t1) = opts.window.unwrap_or((opts.settle, end));
    if opts.window.is_some() && t1 <= t0 {
        return Err(Error::UndefinedMetric {
            metric: "window",
            reason: format!("t1 ({t1}) must exceed t0 ({t0})"),
        });
    }
    let summary = summarize_rows(&rows, opts.v_dc / n_sm as f64, Window::new(t0, t1), opts.segment)?;
    let report = render(&summary);
    Ok((summary, report))
}
