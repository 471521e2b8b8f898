//! Python bindings for the accelerator simulator and attack pipeline.
//!
//! Field elements, points and scalars cross the boundary as hex strings in
//! the toolkit's canonical formats; reports cross as JSON strings.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use sculi_core::accel::{build_schedule, simulate_kp, Block};
use sculi_core::attack::{best_candidate, comparison_to_mean, compress, static_compress};
use sculi_core::curve::{AffinePoint, CurveParams, Scalar};
use sculi_core::field::BinaryField;
use sculi_core::leakage::{
    absorbed_power, beam_intensity as core_beam_intensity, synthesize_trace, Floorplan, LaserSpec,
    PowerParams,
};
use sculi_core::trace::Trace;

fn val_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_laser(laser: Option<(f64, f64, f64, f64)>) -> LaserSpec {
    match laser {
        Some((power_pct, diameter, cx, cy)) => LaserSpec::new(power_pct, diameter, (cx, cy)),
        None => LaserSpec::disabled(),
    }
}

/// Sum of two GF(2^233) elements (59-digit hex in, hex out).
#[pyfunction]
fn fe_add(a: &str, b: &str) -> PyResult<String> {
    let f = BinaryField::b233();
    let x = f.element_from_hex(a).map_err(val_err)?;
    let y = f.element_from_hex(b).map_err(val_err)?;
    Ok(f.element_to_hex(&f.add(&x, &y)))
}

/// Product of two GF(2^233) elements.
#[pyfunction]
fn fe_mul(a: &str, b: &str) -> PyResult<String> {
    let f = BinaryField::b233();
    let x = f.element_from_hex(a).map_err(val_err)?;
    let y = f.element_from_hex(b).map_err(val_err)?;
    Ok(f.element_to_hex(&f.mul(&x, &y)))
}

#[pyfunction]
fn fe_sqr(a: &str) -> PyResult<String> {
    let f = BinaryField::b233();
    let x = f.element_from_hex(a).map_err(val_err)?;
    Ok(f.element_to_hex(&f.sqr(&x)))
}

#[pyfunction]
fn fe_inv(a: &str) -> PyResult<String> {
    let f = BinaryField::b233();
    let x = f.element_from_hex(a).map_err(val_err)?;
    Ok(f.element_to_hex(&f.inv(&x).map_err(val_err)?))
}

/// The B-233 base point as an "x,y" hex pair.
#[pyfunction]
fn generator() -> String {
    let c = CurveParams::b233();
    c.generator().to_hex(&c.field)
}

/// kP via the Montgomery ladder. `point` defaults to the base point;
/// returns "x,y" or "INF".
#[pyfunction]
#[pyo3(signature = (k_hex, point = None))]
fn ladder_kp(k_hex: &str, point: Option<&str>) -> PyResult<String> {
    let c = CurveParams::b233();
    let k = Scalar::from_hex(k_hex).map_err(val_err)?;
    let p = match point {
        Some(s) => AffinePoint::from_hex(&c.field, s).map_err(val_err)?,
        None => c.generator(),
    };
    Ok(c.ladder_kp(&k, &p).map_err(val_err)?.to_hex(&c.field))
}

/// kP via the independent affine double-and-add oracle.
#[pyfunction]
#[pyo3(signature = (k_hex, point = None))]
fn double_and_add_kp(k_hex: &str, point: Option<&str>) -> PyResult<String> {
    let c = CurveParams::b233();
    let k = Scalar::from_hex(k_hex).map_err(val_err)?;
    let p = match point {
        Some(s) => AffinePoint::from_hex(&c.field, s).map_err(val_err)?,
        None => c.generator(),
    };
    Ok(c.double_and_add_kp(&k, &p).map_err(val_err)?.to_hex(&c.field))
}

/// Beam power per unit area for a given output percentage and FWHM spot
/// diameter (micrometres).
#[pyfunction]
fn beam_intensity(power_pct: f64, fwhm_diameter_um: f64) -> f64 {
    core_beam_intensity(&LaserSpec::new(power_pct, fwhm_diameter_um, (0.0, 0.0)))
}

/// Beam power absorbed by one block of the default floorplan.
#[pyfunction]
#[pyo3(signature = (block, power_pct, fwhm_diameter_um, center, eta = 0.35))]
fn block_absorbed_power(
    block: &str,
    power_pct: f64,
    fwhm_diameter_um: f64,
    center: (f64, f64),
    eta: f64,
) -> PyResult<f64> {
    let b: Block = block.parse().map_err(val_err)?;
    let spec = LaserSpec::new(power_pct, fwhm_diameter_um, center);
    Ok(absorbed_power(&spec, &Floorplan::default(), b, eta))
}

/// Centre of the field multiplier block (the default laser target).
#[pyfunction]
fn multiplier_center() -> (f64, f64) {
    Floorplan::default().blocks[Block::FieldMultiplier].center()
}

fn synthesize(
    scalar_hex: &str,
    seed: u64,
    sigma_noise: Option<f64>,
    laser: Option<(f64, f64, f64, f64)>,
    scenario: &str,
) -> PyResult<(Trace, Scalar)> {
    let curve = CurveParams::b233();
    let sched = build_schedule();
    let k = Scalar::from_hex(scalar_hex).map_err(val_err)?;
    let (_, log) = simulate_kp(&k, &curve.generator(), &curve, &sched).map_err(val_err)?;
    let mut params = PowerParams::default();
    if let Some(s) = sigma_noise {
        params.sigma_noise = s;
    }
    let trace = synthesize_trace(
        &log,
        &params,
        &parse_laser(laser),
        &Floorplan::default(),
        seed,
        scenario,
        Some(k.to_hex()),
    )
    .map_err(val_err)?;
    Ok((trace, k))
}

/// Simulate a kP run and write its power trace (plus sidecar) to
/// `out_path`. Returns (n_samples, mean_level).
#[pyfunction]
#[pyo3(signature = (scalar_hex, seed, out_path, sigma_noise = None, laser = None, scenario = "python"))]
fn simulate_trace(
    scalar_hex: &str,
    seed: u64,
    out_path: PathBuf,
    sigma_noise: Option<f64>,
    laser: Option<(f64, f64, f64, f64)>,
    scenario: &str,
) -> PyResult<(usize, f64)> {
    let (trace, _) = synthesize(scalar_hex, seed, sigma_noise, laser, scenario)?;
    trace
        .write(&out_path)
        .map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok((trace.samples.len(), trace.mean()))
}

/// Simulate, synthesize and attack in memory. Returns
/// (best_delta, best_slot, inverted).
#[pyfunction]
#[pyo3(signature = (scalar_hex, seed, sigma_noise = None, laser = None, static_only = false))]
fn simulate_and_attack(
    scalar_hex: &str,
    seed: u64,
    sigma_noise: Option<f64>,
    laser: Option<(f64, f64, f64, f64)>,
    static_only: bool,
) -> PyResult<(f64, usize, bool)> {
    let (trace, k) = synthesize(scalar_hex, seed, sigma_noise, laser, "python")?;
    let m = if static_only {
        static_compress(&trace, sculi_core::attack::DEFAULT_QUIESCENT_WINDOW).map_err(val_err)?
    } else {
        compress(&trace).map_err(val_err)?
    };
    let best = best_candidate(&comparison_to_mean(&m), &k, true).map_err(val_err)?;
    Ok((best.delta, best.slot, best.inverted))
}

/// Attack a trace file; ground truth comes from the sidecar when present.
/// Returns the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (trace_path, static_only = false, allow_inversion = true))]
fn attack_file(trace_path: PathBuf, static_only: bool, allow_inversion: bool) -> PyResult<String> {
    let trace = Trace::read(&trace_path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    let m = if static_only {
        static_compress(&trace, sculi_core::attack::DEFAULT_QUIESCENT_WINDOW).map_err(val_err)?
    } else {
        compress(&trace).map_err(val_err)?
    };
    let truth = trace
        .meta
        .scalar_hex
        .as_deref()
        .map(Scalar::from_hex)
        .transpose()
        .map_err(val_err)?;
    let report = sculi_core::attack::build_report(
        &m,
        truth.as_ref(),
        allow_inversion,
        if static_only { "static_tail" } else { "sum_sq" },
        &trace.meta.scenario,
        trace.meta.seed,
    )
    .map_err(val_err)?;
    Ok(String::from_utf8(report.to_json_bytes()).expect("json is utf-8"))
}

#[pymodule]
fn sculi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TOOLKIT_VERSION", sculi_core::TOOLKIT_VERSION)?;
    m.add_function(wrap_pyfunction!(fe_add, m)?)?;
    m.add_function(wrap_pyfunction!(fe_mul, m)?)?;
    m.add_function(wrap_pyfunction!(fe_sqr, m)?)?;
    m.add_function(wrap_pyfunction!(fe_inv, m)?)?;
    m.add_function(wrap_pyfunction!(generator, m)?)?;
    m.add_function(wrap_pyfunction!(ladder_kp, m)?)?;
    m.add_function(wrap_pyfunction!(double_and_add_kp, m)?)?;
    m.add_function(wrap_pyfunction!(beam_intensity, m)?)?;
    m.add_function(wrap_pyfunction!(block_absorbed_power, m)?)?;
    m.add_function(wrap_pyfunction!(multiplier_center, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_trace, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_and_attack, m)?)?;
    m.add_function(wrap_pyfunction!(attack_file, m)?)?;
    Ok(())
}
