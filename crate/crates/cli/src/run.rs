//! Scenario execution: simulate -> synthesize -> attack -> report, with a
//! manifest that makes every run byte-reproducible, plus sweep aggregation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sculi_core::accel::{build_schedule, simulate_kp};
use sculi_core::attack::{
    build_report, compress_with_offset, static_compress_with_offset, AttackError, AttackReport,
    DEFAULT_QUIESCENT_WINDOW,
};
use sculi_core::curve::{CurveError, CurveParams, Scalar};
use sculi_core::leakage::{beam_intensity, synthesize_trace, LeakageError};
use sculi_core::trace::{Trace, TraceError};
use sculi_core::TOOLKIT_VERSION;

use crate::config::{config_hash, ConfigError, ResolvedScenario};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Leakage(#[from] LeakageError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("manifest error: {0}")]
    Manifest(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Attack-side options shared by the CLI and the sweep runner.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct AttackOptions {
    pub static_only: bool,
    pub allow_inversion: bool,
    pub cycle_offset: usize,
    pub quiescent_window: usize,
}

impl Default for AttackOptions {
    fn default() -> Self {
        AttackOptions {
            static_only: false,
            allow_inversion: true,
            cycle_offset: 0,
            quiescent_window: DEFAULT_QUIESCENT_WINDOW,
        }
    }
}

/// Everything needed to reproduce one run byte-for-byte.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    pub config_hash: String,
    pub repeat: usize,
    pub run_seed: u64,
    pub attack: AttackOptions,
    pub scenario: ResolvedScenario,
    pub outputs: ManifestOutputs,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestOutputs {
    pub trace: String,
    pub report: String,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest, RunError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| RunError::Manifest(e.to_string()))
    }
}

/// Outcome of one scenario repeat.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub scenario: String,
    pub repeat: usize,
    pub seed: u64,
    pub power_pct: f64,
    pub diameter_um: f64,
    pub trace_mean: f64,
    pub report: AttackReport,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn delta_best(&self) -> f64 {
        self.report.best.as_ref().map(|b| b.delta).unwrap_or(f64::NAN)
    }
}

/// Simulate and synthesize one repeat of a scenario, entirely in memory.
pub fn synthesize_run(
    resolved: &ResolvedScenario,
    curve: &CurveParams,
    repeat: usize,
) -> Result<Trace, RunError> {
    let sched = build_schedule();
    let k = resolved.scalar();
    let p = resolved.base_point(curve);
    let (_, log) = simulate_kp(&k, &p, curve, &sched)?;
    let run_seed = resolved.seed.wrapping_add(repeat as u64);
    let trace = synthesize_trace(
        &log,
        &resolved.power,
        &resolved.laser,
        &resolved.floorplan,
        run_seed,
        &resolved.name,
        Some(k.to_hex()),
    )?;
    Ok(trace)
}

/// Run the attack pipeline over a trace (truth from the sidecar when known).
pub fn attack_trace(trace: &Trace, opts: &AttackOptions) -> Result<AttackReport, RunError> {
    let m = if opts.static_only {
        static_compress_with_offset(trace, opts.quiescent_window, opts.cycle_offset)?
    } else {
        compress_with_offset(trace, opts.cycle_offset)?
    };
    let truth = trace
        .meta
        .scalar_hex
        .as_deref()
        .map(Scalar::from_hex)
        .transpose()?;
    let report = build_report(
        &m,
        truth.as_ref(),
        opts.allow_inversion,
        if opts.static_only { "static_tail" } else { "sum_sq" },
        &trace.meta.scenario,
        trace.meta.seed,
    )?;
    Ok(report)
}

/// Full artifact-producing run of one scenario repeat:
/// `<out>/<scenario>/<seed>/{trace.sctr, trace.meta.json, report.json,
/// report.csv, manifest.json}`.
pub fn run_scenario_repeat(
    resolved: &ResolvedScenario,
    curve: &CurveParams,
    repeat: usize,
    opts: &AttackOptions,
    out_root: &Path,
) -> Result<RunOutcome, RunError> {
    let run_seed = resolved.seed.wrapping_add(repeat as u64);
    let dir = out_root.join(&resolved.name).join(run_seed.to_string());
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let trace = synthesize_run(resolved, curve, repeat)?;
    let trace_path = dir.join("trace.sctr");
    trace.write(&trace_path)?;

    let report = attack_trace(&trace, opts)?;
    let report_path = dir.join("report.json");
    fs::write(&report_path, report.to_json_bytes()).map_err(io_err(&report_path))?;
    let csv_path = dir.join("report.csv");
    fs::write(&csv_path, report.to_csv()).map_err(io_err(&csv_path))?;

    let manifest = Manifest {
        toolkit_version: TOOLKIT_VERSION.to_string(),
        config_hash: config_hash(resolved),
        repeat,
        run_seed,
        attack: *opts,
        scenario: resolved.clone(),
        outputs: ManifestOutputs {
            trace: "trace.sctr".into(),
            report: "report.json".into(),
        },
    };
    let manifest_path = dir.join("manifest.json");
    let mut manifest_bytes =
        serde_json::to_vec_pretty(&manifest).map_err(|e| RunError::Manifest(e.to_string()))?;
    manifest_bytes.push(b'\n');
    fs::write(&manifest_path, manifest_bytes).map_err(io_err(&manifest_path))?;

    Ok(RunOutcome {
        scenario: resolved.name.clone(),
        repeat,
        seed: run_seed,
        power_pct: if resolved.laser.enabled { resolved.laser.power_pct } else { 0.0 },
        diameter_um: resolved.laser.fwhm_diameter_um,
        trace_mean: trace.mean(),
        report,
        out_dir: dir,
    })
}

/// Re-execute a manifest; the produced report bytes match the original.
pub fn rerun_manifest(
    manifest: &Manifest,
    curve: &CurveParams,
    out_root: &Path,
) -> Result<RunOutcome, RunError> {
    run_scenario_repeat(&manifest.scenario, curve, manifest.repeat, &manifest.attack, out_root)
}

/// One aggregated sweep row (per scenario, over its repeats).
#[derive(Clone, Debug, Serialize)]
pub struct SweepSummaryRow {
    pub scenario: String,
    pub power_pct: f64,
    pub diameter_um: f64,
    pub beam_intensity: f64,
    pub dc_offset_mean: f64,
    pub delta_best_mean: f64,
    pub delta_best_std: f64,
    pub repeats: usize,
}

/// Sweep outcome: a row per scenario x repeat plus per-scenario summaries.
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<RunOutcome>,
    pub summary: Vec<SweepSummaryRow>,
    /// Per-repeat mean level of the reference (laser-off) scenario traces.
    pub reference_means: Vec<f64>,
    pub reference_scenario: String,
}

impl SweepResult {
    pub fn dc_offset(&self, row: &RunOutcome) -> f64 {
        row.trace_mean - self.reference_means[row.repeat.min(self.reference_means.len() - 1)]
    }

    /// Plot-ready CSV: scenario, power_pct, diameter_um, dc_offset,
    /// delta_best; one row per scenario x repeat.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,power_pct,diameter_um,dc_offset,delta_best\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.4}\n",
                row.scenario,
                row.power_pct,
                row.diameter_um,
                self.dc_offset(row),
                row.delta_best(),
            ));
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "scenario,power_pct,diameter_um,beam_intensity,dc_offset_mean,delta_best_mean,delta_best_std,repeats\n",
        );
        for s in &self.summary {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.4},{:.4},{}\n",
                s.scenario,
                s.power_pct,
                s.diameter_um,
                s.beam_intensity,
                s.dc_offset_mean,
                s.delta_best_mean,
                s.delta_best_std,
                s.repeats
            ));
        }
        out
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Run every scenario x repeat; the first laser-off scenario provides the
/// reference level for dc offsets. Scenarios run in sequence; each writes
/// only inside its own output directory.
pub fn run_sweep(
    resolved: &[ResolvedScenario],
    curve: &CurveParams,
    opts: &AttackOptions,
    out_root: &Path,
) -> Result<SweepResult, RunError> {
    if resolved.is_empty() {
        return Err(RunError::Config(ConfigError::Empty));
    }
    let reference = resolved
        .iter()
        .find(|r| !r.laser.enabled)
        .unwrap_or(&resolved[0]);
    let reference_scenario = reference.name.clone();

    let mut rows: Vec<RunOutcome> = Vec::new();
    for r in resolved {
        for repeat in 0..r.repeats {
            rows.push(run_scenario_repeat(r, curve, repeat, opts, out_root)?);
        }
    }

    let reference_means: Vec<f64> = rows
        .iter()
        .filter(|row| row.scenario == reference_scenario)
        .map(|row| row.trace_mean)
        .collect();

    let mut summary = Vec::new();
    for r in resolved {
        let deltas: Vec<f64> = rows
            .iter()
            .filter(|row| row.scenario == r.name)
            .map(|row| row.delta_best())
            .collect();
        let offsets: Vec<f64> = rows
            .iter()
            .filter(|row| row.scenario == r.name)
            .map(|row| {
                row.trace_mean - reference_means[row.repeat.min(reference_means.len() - 1)]
            })
            .collect();
        summary.push(SweepSummaryRow {
            scenario: r.name.clone(),
            power_pct: if r.laser.enabled { r.laser.power_pct } else { 0.0 },
            diameter_um: r.laser.fwhm_diameter_um,
            beam_intensity: beam_intensity(&r.laser),
            dc_offset_mean: mean(&offsets),
            delta_best_mean: mean(&deltas),
            delta_best_std: std_dev(&deltas),
            repeats: r.repeats,
        });
    }

    Ok(SweepResult {
        rows,
        summary,
        reference_means,
        reference_scenario,
    })
}
