//! `sculi` — scenario runner for the accelerator leakage simulator and the
//! single-trace attack pipeline.
//!
//! Exit codes: 0 success, 2 configuration error, 3 calibration/assertion
//! failure (CI-friendly).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sculi_cli::calibrate::{calibrate, CalibrateError};
use sculi_cli::config::{resolve_scenario, Config, ConfigError, ResolvedScenario};
use sculi_cli::run::{
    attack_trace, rerun_manifest, run_scenario_repeat, run_sweep, AttackOptions, Manifest, RunError,
};
use sculi_core::attack::AttackReport;
use sculi_core::curve::CurveParams;
use sculi_core::trace::Trace;

#[derive(Parser)]
#[command(
    name = "sculi",
    version,
    about = "Simulate an EC scalar-multiplication accelerator's power traces under laser illumination and attack them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OutOpt {
    /// Output directory (env SCULI_OUT overrides the built-in default "out")
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutOpt {
    fn resolve(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            std::env::var_os("SCULI_OUT")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out"))
        })
    }
}

#[derive(Args, Clone)]
struct AttackFlags {
    /// Use the static-window pipeline (mean of each cycle's quiescent tail)
    #[arg(long)]
    static_only: bool,
    /// Also rank each candidate's inverted twin
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    allow_inversion: bool,
    /// Skip this many clock cycles before windowing (external traces)
    #[arg(long, default_value_t = 0)]
    cycle_offset: usize,
    /// Samples of the quiescent tail used by --static-only
    #[arg(long, default_value_t = 100)]
    quiescent_window: usize,
}

impl AttackFlags {
    fn to_options(&self) -> AttackOptions {
        AttackOptions {
            static_only: self.static_only,
            allow_inversion: self.allow_inversion,
            cycle_offset: self.cycle_offset,
            quiescent_window: self.quiescent_window,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run scenario simulations and write traces, reports and manifests
    Simulate {
        /// Scenario config (TOML) or a manifest.json from a previous run
        #[arg(long)]
        config: PathBuf,
        /// Only this scenario (default: all)
        #[arg(long)]
        scenario: Option<String>,
        /// Override the scenario base seed
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutOpt,
        #[command(flatten)]
        attack: AttackFlags,
    },
    /// Attack an existing trace file and write report.json/report.csv
    Attack {
        /// Path to a .sctr trace (its .meta.json sidecar provides the truth)
        trace: PathBuf,
        #[command(flatten)]
        out: OutOpt,
        #[command(flatten)]
        attack: AttackFlags,
    },
    /// Run all scenarios x repeats and aggregate a sweep CSV
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutOpt,
        #[command(flatten)]
        attack: AttackFlags,
    },
    /// Search sigma_noise until the mean best delta hits the target band
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        /// Scenario to calibrate against (default: first laser-off one)
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long, default_value_t = 89.0)]
        target_lo: f64,
        #[arg(long, default_value_t = 92.0)]
        target_hi: f64,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Pretty-print a report.json
    Report { report: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(run) = cause.downcast_ref::<RunError>() {
            if matches!(run, RunError::Config(_)) {
                return 2;
            }
        }
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if let Some(cal) = cause.downcast_ref::<CalibrateError>() {
            return match cal {
                CalibrateError::Unreachable { .. } => 3,
                CalibrateError::Run(RunError::Config(_)) => 2,
                CalibrateError::Run(_) => 1,
            };
        }
    }
    1
}

fn load_scenarios(
    config: &Path,
    scenario: Option<&str>,
    seed_override: Option<u64>,
    curve: &CurveParams,
) -> anyhow::Result<Vec<ResolvedScenario>> {
    let cfg = Config::load(config)?;
    if cfg.scenarios.is_empty() {
        return Err(ConfigError::Empty.into());
    }
    let selected: Vec<_> = match scenario {
        Some(name) => vec![cfg.scenario(name)?.clone()],
        None => cfg.scenarios.clone(),
    };
    let mut resolved = Vec::new();
    for mut sc in selected {
        if let Some(seed) = seed_override {
            sc.seed = seed;
        }
        resolved.push(resolve_scenario(&cfg, &sc, curve)?);
    }
    Ok(resolved)
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let curve = CurveParams::b233();
    match cli.command {
        Command::Simulate {
            config,
            scenario,
            seed,
            out,
            attack,
        } => {
            let out_root = out.resolve();
            let opts = attack.to_options();
            // a manifest re-runs one exact repeat; a TOML config runs all
            if config.extension().is_some_and(|e| e == "json") {
                let manifest = Manifest::load(&config)?;
                let outcome = rerun_manifest(&manifest, &curve, &out_root)?;
                println!(
                    "rerun {} seed {} -> {} (delta {:.1})",
                    outcome.scenario,
                    outcome.seed,
                    outcome.out_dir.display(),
                    outcome.delta_best()
                );
                return Ok(());
            }
            for resolved in load_scenarios(&config, scenario.as_deref(), seed, &curve)? {
                for repeat in 0..resolved.repeats {
                    let outcome = run_scenario_repeat(&resolved, &curve, repeat, &opts, &out_root)?;
                    println!(
                        "{} seed {} -> {} (delta {:.1})",
                        outcome.scenario,
                        outcome.seed,
                        outcome.out_dir.display(),
                        outcome.delta_best()
                    );
                }
            }
            Ok(())
        }
        Command::Attack { trace, out, attack } => {
            let t = Trace::read(&trace)?;
            let report = attack_trace(&t, &attack.to_options())?;
            let dir = if out.out.is_some() {
                let d = out.resolve();
                std::fs::create_dir_all(&d)?;
                d
            } else {
                trace.parent().unwrap_or(Path::new(".")).to_path_buf()
            };
            std::fs::write(dir.join("report.json"), report.to_json_bytes())?;
            std::fs::write(dir.join("report.csv"), report.to_csv())?;
            print_report(&report);
            Ok(())
        }
        Command::Sweep {
            config,
            seed,
            out,
            attack,
        } => {
            let out_root = out.resolve();
            let resolved = load_scenarios(&config, None, seed, &curve)?;
            let sweep = run_sweep(&resolved, &curve, &attack.to_options(), &out_root)?;
            std::fs::create_dir_all(&out_root)?;
            std::fs::write(out_root.join("sweep.csv"), sweep.to_csv())?;
            std::fs::write(out_root.join("sweep_summary.csv"), sweep.summary_csv())?;
            println!("{}", sweep.summary_csv().trim_end());
            println!("sweep written to {}", out_root.display());
            Ok(())
        }
        Command::Calibrate {
            config,
            scenario,
            target_lo,
            target_hi,
            seeds,
            out,
        } => {
            let resolved_all = load_scenarios(&config, scenario.as_deref(), None, &curve)?;
            let reference = resolved_all
                .iter()
                .find(|r| !r.laser.enabled)
                .unwrap_or(&resolved_all[0]);
            let result = calibrate(reference, &curve, target_lo, target_hi, seeds)?;
            let out_root = out.resolve();
            std::fs::create_dir_all(&out_root)?;
            let calibrated = format!(
                "# calibrated against scenario `{}` ({} seeds, mean delta {:.2})\n[power]\nsigma_noise = {:.3}\n",
                reference.name, result.seeds, result.mean_delta, result.sigma_noise
            );
            std::fs::write(out_root.join("calibrated.toml"), &calibrated)?;
            let mut log = serde_json::to_vec_pretty(&result)?;
            log.push(b'\n');
            std::fs::write(out_root.join("calibration.json"), log)?;
            println!(
                "calibrated sigma_noise = {:.3} (mean delta {:.2} over {} seeds)",
                result.sigma_noise, result.mean_delta, result.seeds
            );
            Ok(())
        }
        Command::Report { report } => {
            let text = std::fs::read_to_string(&report)?;
            let parsed: AttackReport = serde_json::from_str(&text)?;
            print_report(&parsed);
            Ok(())
        }
    }
}

fn print_report(report: &AttackReport) {
    println!(
        "scenario {}  seed {}  bits {}  compression {}",
        report.scenario, report.seed, report.n_bits, report.compression
    );
    match (&report.best, &report.slots) {
        (Some(best), Some(slots)) => {
            println!(
                "best candidate: slot {:2}  delta {:.0}%{}",
                best.slot,
                best.delta.round(),
                if best.inverted { "  (inverted)" } else { "" }
            );
            let mut ranked: Vec<_> = slots.iter().collect();
            ranked.sort_by(|a, b| {
                let da = a.delta_raw.max(a.delta_inverted);
                let db = b.delta_raw.max(b.delta_inverted);
                db.partial_cmp(&da).unwrap()
            });
            println!("slot  delta_raw  delta_inverted");
            for s in ranked.iter().take(8) {
                println!("{:4}  {:9.2}  {:14.2}", s.slot, s.delta_raw, s.delta_inverted);
            }
        }
        _ => {
            println!(
                "no ground truth in sidecar; extracted {} candidates",
                report.candidates_hex.len()
            );
        }
    }
}
