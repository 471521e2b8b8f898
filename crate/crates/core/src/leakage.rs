//! Power-trace synthesis: dynamic (switching) power, data-dependent static
//! power with a Gaussian-beam illumination boost, measurement noise, and
//! acquisition at 1250 samples per clock cycle.
//!
//! The laser perturbs only the static term (no induced switching): an
//! illuminated block's static current is scaled by (1 + alpha * absorbed
//! power). Static current per block is `i_static0 * (base_cells + gamma *
//! stored_weight)`, so gamma = 0 makes a block's static contribution
//! data-independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accel::{ActivityLog, Block, BlockMap, CLOCK_HZ};
use crate::trace::{Trace, TraceMeta, SAMPLES_PER_CYCLE, SAMPLE_RATE_HZ};

#[derive(Debug, Error)]
pub enum LeakageError {
    #[error("trace length mismatch: {a} vs {b} samples")]
    LengthMismatch { a: usize, b: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Axis-aligned rectangle in micrometres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectUm {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl RectUm {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        RectUm { x, y, w, h }
    }

    fn contains_rect(&self, o: &RectUm) -> bool {
        o.x >= self.x && o.y >= self.y && o.x + o.w <= self.x + self.w && o.y + o.h <= self.y + self.h
    }

    fn overlaps(&self, o: &RectUm) -> bool {
        self.x < o.x + o.w && o.x < self.x + self.w && self.y < o.y + o.h && o.y < self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }
}

/// Spatial layout of the five blocks on the die.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Floorplan {
    pub die: RectUm,
    pub blocks: BlockMap<RectUm>,
}

impl Default for Floorplan {
    /// 3000x3000 um die; the field multiplier is by far the largest block.
    fn default() -> Self {
        let mut blocks = BlockMap::from_fn(|_| RectUm::new(0.0, 0.0, 0.0, 0.0));
        blocks[Block::FieldMultiplier] = RectUm::new(200.0, 200.0, 1600.0, 1600.0);
        blocks[Block::Registers] = RectUm::new(2000.0, 200.0, 800.0, 1600.0);
        blocks[Block::FieldAdder] = RectUm::new(200.0, 2000.0, 800.0, 500.0);
        blocks[Block::Controller] = RectUm::new(1200.0, 2000.0, 600.0, 500.0);
        blocks[Block::Multiplexer] = RectUm::new(2000.0, 2000.0, 500.0, 400.0);
        Floorplan {
            die: RectUm::new(0.0, 0.0, 3000.0, 3000.0),
            blocks,
        }
    }
}

impl Floorplan {
    pub fn validate(&self) -> Result<(), LeakageError> {
        for (b, r) in self.blocks.iter() {
            if r.w <= 0.0 || r.h <= 0.0 {
                return Err(LeakageError::InvalidParam(format!("{b} has empty extent")));
            }
            if !self.die.contains_rect(r) {
                return Err(LeakageError::InvalidParam(format!("{b} outside the die")));
            }
        }
        for (i, a) in Block::ALL.iter().enumerate() {
            for b in Block::ALL.iter().skip(i + 1) {
                if self.blocks[*a].overlaps(&self.blocks[*b]) {
                    return Err(LeakageError::InvalidParam(format!("{a} overlaps {b}")));
                }
            }
        }
        Ok(())
    }
}

/// Laser settings: percentage of maximum CW output, FWHM spot diameter and
/// spot centre on the die.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserSpec {
    pub enabled: bool,
    pub power_pct: f64,
    pub fwhm_diameter_um: f64,
    pub center: (f64, f64),
}

impl LaserSpec {
    pub fn disabled() -> Self {
        LaserSpec {
            enabled: false,
            power_pct: 0.0,
            fwhm_diameter_um: 14.0,
            center: (1000.0, 1000.0),
        }
    }

    pub fn new(power_pct: f64, fwhm_diameter_um: f64, center: (f64, f64)) -> Self {
        LaserSpec {
            enabled: true,
            power_pct,
            fwhm_diameter_um,
            center,
        }
    }

    pub fn validate(&self) -> Result<(), LeakageError> {
        if !(0.0..=100.0).contains(&self.power_pct) {
            return Err(LeakageError::InvalidParam(format!(
                "laser power_pct {} outside 0..=100",
                self.power_pct
            )));
        }
        if self.fwhm_diameter_um <= 0.0 {
            return Err(LeakageError::InvalidParam(
                "laser fwhm_diameter_um must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Beam power per unit area, up to a fixed constant (Gaussian-peak proxy):
/// power_pct / d^2.
pub fn beam_intensity(spec: &LaserSpec) -> f64 {
    if !spec.enabled {
        return 0.0;
    }
    spec.power_pct / (spec.fwhm_diameter_um * spec.fwhm_diameter_um)
}

/// Quadrature grid per block rectangle.
const QUAD_GRID: usize = 64;

fn fwhm_to_sigma(d: f64) -> f64 {
    d / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
}

/// Mass of the unit-normalised 2-D Gaussian (centre, FWHM d) over a
/// rectangle, by midpoint quadrature on a 64x64 grid. The grid covers the
/// intersection of the rectangle with the beam's +-6 sigma bounding box so
/// the rule stays well-conditioned for small spots inside large blocks
/// (outside 6 sigma the mass is < 2e-8 and is treated as zero).
pub fn gaussian_mass(center: (f64, f64), fwhm: f64, rect: &RectUm) -> f64 {
    let sigma = fwhm_to_sigma(fwhm);
    let reach = 6.0 * sigma;
    let x0 = rect.x.max(center.0 - reach);
    let x1 = (rect.x + rect.w).min(center.0 + reach);
    let y0 = rect.y.max(center.1 - reach);
    let y1 = (rect.y + rect.h).min(center.1 + reach);
    if x0 >= x1 || y0 >= y1 {
        return 0.0;
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
    let dx = (x1 - x0) / QUAD_GRID as f64;
    let dy = (y1 - y0) / QUAD_GRID as f64;
    let mut sum = 0.0;
    for i in 0..QUAD_GRID {
        let x = x0 + (i as f64 + 0.5) * dx;
        let ex = x - center.0;
        for j in 0..QUAD_GRID {
            let y = y0 + (j as f64 + 0.5) * dy;
            let ey = y - center.1;
            sum += (-(ex * ex + ey * ey) / (2.0 * sigma * sigma)).exp();
        }
    }
    norm * sum * dx * dy
}

/// Beam power deposited in a block: eta * power_pct * (Gaussian mass over
/// the block rectangle). Zero when the laser is off.
pub fn absorbed_power(spec: &LaserSpec, plan: &Floorplan, b: Block, eta: f64) -> f64 {
    if !spec.enabled || spec.power_pct == 0.0 {
        return 0.0;
    }
    eta * spec.power_pct * gaussian_mass(spec.center, spec.fwhm_diameter_um, &plan.blocks[b])
}

/// Model constants for trace synthesis. All in arbitrary consistent power
/// units; these are the free calibration parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerParams {
    /// Dynamic energy per (gate-weighted) toggle.
    pub w_dyn: f64,
    /// Static current per stored bit / cell unit.
    pub i_static0: f64,
    /// Data-dependence factor of static current, per block.
    pub gamma: BlockMap<f64>,
    /// Illumination boost per unit absorbed beam power.
    pub alpha: f64,
    /// Metal-filler attenuation of the beam, 0..=1.
    pub eta: f64,
    /// Gaussian measurement noise (per sample).
    pub sigma_noise: f64,
    /// Per-run baseline jitter std.
    pub drift: f64,
    /// Relative block sizes (cell-count weights).
    pub gate_weight: BlockMap<f64>,
    /// Data-independent static cells per gate-weight unit.
    pub cells_per_weight: f64,
    /// Dynamic pulse decay constant, in samples.
    pub kernel_decay: f64,
    /// Samples after which the pulse is exactly zero (quiescent tail).
    pub kernel_support: usize,
}

impl Default for PowerParams {
    fn default() -> Self {
        let mut gamma = BlockMap::from_fn(|_| 0.25);
        // The multiplier's static current is data-independent by default:
        // its cells are the illumination target, not the leakage source.
        gamma[Block::FieldMultiplier] = 0.0;
        let mut gate_weight = BlockMap::from_fn(|_| 1.0);
        gate_weight[Block::FieldMultiplier] = 10.0;
        gate_weight[Block::FieldAdder] = 1.0;
        gate_weight[Block::Registers] = 6.0;
        gate_weight[Block::Controller] = 2.0;
        gate_weight[Block::Multiplexer] = 1.0;
        PowerParams {
            w_dyn: 1.0,
            i_static0: 0.2,
            gamma,
            alpha: 0.02,
            eta: 0.35,
            sigma_noise: 1000.0,
            drift: 0.0,
            gate_weight,
            cells_per_weight: 100.0,
            kernel_decay: 150.0,
            kernel_support: 1000,
        }
    }
}

impl PowerParams {
    pub fn validate(&self) -> Result<(), LeakageError> {
        let nonneg = [
            ("w_dyn", self.w_dyn),
            ("i_static0", self.i_static0),
            ("alpha", self.alpha),
            ("sigma_noise", self.sigma_noise),
            ("drift", self.drift),
            ("cells_per_weight", self.cells_per_weight),
            ("kernel_decay", self.kernel_decay),
        ];
        for (name, v) in nonneg {
            if v < 0.0 || !v.is_finite() {
                return Err(LeakageError::InvalidParam(format!("{name} must be >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(LeakageError::InvalidParam("eta must be in 0..=1".into()));
        }
        for (b, g) in self.gamma.iter() {
            if *g < 0.0 {
                return Err(LeakageError::InvalidParam(format!("gamma[{b}] must be >= 0")));
            }
        }
        if self.kernel_support > SAMPLES_PER_CYCLE {
            return Err(LeakageError::InvalidParam(
                "kernel_support must be <= samples per cycle".into(),
            ));
        }
        Ok(())
    }

    /// The per-cycle pulse shape over 1250 samples, peak normalised to 1 at
    /// sample 0, exactly zero from `kernel_support` on.
    pub fn kernel(&self) -> Vec<f64> {
        (0..SAMPLES_PER_CYCLE)
            .map(|s| {
                if s < self.kernel_support {
                    (-(s as f64) / self.kernel_decay).exp()
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Static current of one block given its stored weight and absorbed
    /// beam power.
    fn static_current(&self, b: Block, stored_weight: f64, absorbed: f64) -> f64 {
        let cells = self.gate_weight[b] * self.cells_per_weight;
        self.i_static0 * (cells + self.gamma[b] * stored_weight) * (1.0 + self.alpha * absorbed)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Noise stream for one cycle: counter-based so disjoint cycle ranges can be
/// synthesized in parallel with bit-identical results.
fn cycle_rng(seed: u64, cycle: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ (cycle as u64).wrapping_mul(0xa24b_aed4_963e_e407)))
}

/// Convert an activity log plus laser settings into a sampled power trace.
/// Deterministic given the seed.
pub fn synthesize_trace(
    log: &ActivityLog,
    params: &PowerParams,
    laser: &LaserSpec,
    plan: &Floorplan,
    seed: u64,
    scenario: &str,
    scalar_hex: Option<String>,
) -> Result<Trace, LeakageError> {
    params.validate()?;
    plan.validate()?;
    laser.validate()?;

    let absorbed = BlockMap::from_fn(|b| absorbed_power(laser, plan, b, params.eta));
    let kernel = params.kernel();
    let cycles = log.cycles();

    let drift_offset = if params.drift > 0.0 {
        let normal = Normal::new(0.0, params.drift).expect("validated std");
        normal.sample(&mut ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0xd217)))
    } else {
        0.0
    };

    let mut samples = vec![0f32; cycles * SAMPLES_PER_CYCLE];
    samples
        .par_chunks_mut(SAMPLES_PER_CYCLE)
        .enumerate()
        .for_each(|(c, chunk)| {
            let dyn_energy: f64 = Block::ALL
                .iter()
                .map(|&b| params.w_dyn * params.gate_weight[b] * log.toggles(c, b) as f64)
                .sum();
            let static_level: f64 = Block::ALL
                .iter()
                .map(|&b| params.static_current(b, log.stored_weight(c, b) as f64, absorbed[b]))
                .sum();
            let base = static_level + drift_offset;
            if params.sigma_noise > 0.0 {
                let mut rng = cycle_rng(seed, c);
                let normal = Normal::new(0.0, params.sigma_noise).expect("validated std");
                for (s, out) in chunk.iter_mut().enumerate() {
                    let v = dyn_energy * kernel[s] + base + normal.sample(&mut rng);
                    *out = v as f32;
                }
            } else {
                for (s, out) in chunk.iter_mut().enumerate() {
                    *out = (dyn_energy * kernel[s] + base) as f32;
                }
            }
        });

    Ok(Trace {
        sample_rate: SAMPLE_RATE_HZ,
        clock: CLOCK_HZ,
        samples,
        meta: TraceMeta {
            scenario: scenario.to_string(),
            seed,
            laser: *laser,
            scalar_hex,
        },
    })
}

/// Mean level shift of `t` against a reference trace.
pub fn dc_offset(t: &Trace, reference: &Trace) -> Result<f64, LeakageError> {
    if t.samples.len() != reference.samples.len() {
        return Err(LeakageError::LengthMismatch {
            a: t.samples.len(),
            b: reference.samples.len(),
        });
    }
    Ok(t.mean() - reference.mean())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::ActivityLog;

    #[test]
    fn intensity_matches_equal_power_per_area_settings() {
        // (13%, 27um), (59%, 58um), (100%, 75um) were chosen for equal
        // power per unit area; intensities agree within 3%.
        let specs = [
            LaserSpec::new(13.0, 27.0, (0.0, 0.0)),
            LaserSpec::new(59.0, 58.0, (0.0, 0.0)),
            LaserSpec::new(100.0, 75.0, (0.0, 0.0)),
        ];
        let vals: Vec<f64> = specs.iter().map(beam_intensity).collect();
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (vals[i] - vals[j]).abs() <= 0.03 * vals[j],
                    "{} vs {}",
                    vals[i],
                    vals[j]
                );
            }
        }
    }

    #[test]
    fn intensity_trivia() {
        let mut s = LaserSpec::new(0.0, 14.0, (0.0, 0.0));
        assert_eq!(beam_intensity(&s), 0.0);
        s.power_pct = 40.0;
        let i1 = beam_intensity(&s);
        s.fwhm_diameter_um *= 2.0;
        let i2 = beam_intensity(&s);
        assert!((i1 / i2 - 4.0).abs() < 1e-12);
        assert_eq!(beam_intensity(&LaserSpec::disabled()), 0.0);
    }

    #[test]
    fn absorbed_power_geometry() {
        let plan = Floorplan::default();
        plan.validate().unwrap();
        let eta = 0.35;
        // spot well inside the multiplier
        let spec = LaserSpec::new(80.0, 75.0, plan.blocks[Block::FieldMultiplier].center());
        let inside = absorbed_power(&spec, &plan, Block::FieldMultiplier, eta);
        let expect = eta * spec.power_pct;
        assert!(
            (inside - expect).abs() <= 0.01 * expect,
            "inside={inside} expect={expect}"
        );
        // blocks far outside 3x FWHM catch almost nothing
        for b in [Block::Registers, Block::FieldAdder, Block::Controller, Block::Multiplexer] {
            let a = absorbed_power(&spec, &plan, b, eta);
            assert!(a < 0.001 * spec.power_pct, "{b}: {a}");
        }
    }

    #[test]
    fn gaussian_mass_partition_over_die() {
        let plan = Floorplan::default();
        let center = plan.blocks[Block::FieldMultiplier].center();
        let fwhm = 75.0;
        // per-block masses plus the off-block remainder account for the
        // whole beam within 1% (quadrature consistency)
        let block_sum: f64 = Block::ALL
            .iter()
            .map(|&b| gaussian_mass(center, fwhm, &plan.blocks[b]))
            .sum();
        let die_mass = gaussian_mass(center, fwhm, &plan.die);
        assert!(die_mass > 0.999, "die mass {die_mass}");
        assert!(block_sum <= die_mass + 1e-9);
        let off_block = die_mass - block_sum;
        assert!(((block_sum + off_block) - die_mass).abs() < 1e-12);
        assert!((die_mass - 1.0).abs() < 0.01);
    }

    fn quiet_params() -> PowerParams {
        let mut p = PowerParams::default();
        p.sigma_noise = 0.0;
        p
    }

    #[test]
    fn quiet_log_gives_flat_static_trace() {
        let log = ActivityLog::quiet(54);
        let params = quiet_params();
        let t = synthesize_trace(
            &log,
            &params,
            &LaserSpec::disabled(),
            &Floorplan::default(),
            7,
            "unit",
            None,
        )
        .unwrap();
        let base: f64 = Block::ALL
            .iter()
            .map(|&b| params.i_static0 * params.gate_weight[b] * params.cells_per_weight)
            .sum();
        assert!(t.samples.iter().all(|&s| (s as f64 - base).abs() < 1e-6));
        assert!(t.mean() > 0.0);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let log = ActivityLog::quiet(108);
        let mut params = PowerParams::default();
        params.sigma_noise = 5.0;
        let plan = Floorplan::default();
        let spec = LaserSpec::new(50.0, 30.0, plan.blocks[Block::FieldMultiplier].center());
        let a = synthesize_trace(&log, &params, &spec, &plan, 99, "unit", None).unwrap();
        let b = synthesize_trace(&log, &params, &spec, &plan, 99, "unit", None).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = synthesize_trace(&log, &params, &spec, &plan, 100, "unit", None).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn laser_shifts_only_the_static_level() {
        // same seed, zero noise: trace(on) - trace(off) is constant within
        // each cycle and depends only on stored weights and absorbed power.
        let curve = crate::curve::CurveParams::b233();
        let sched = crate::accel::build_schedule();
        let k = crate::curve::Scalar::from_hex("b5c3").unwrap();
        let (_, log) = crate::accel::simulate_kp(&k, &curve.generator(), &curve, &sched).unwrap();
        let params = quiet_params();
        let plan = Floorplan::default();
        let on = LaserSpec::new(100.0, 14.0, plan.blocks[Block::FieldMultiplier].center());
        let t_on = synthesize_trace(&log, &params, &on, &plan, 3, "unit", None).unwrap();
        let t_off =
            synthesize_trace(&log, &params, &LaserSpec::disabled(), &plan, 3, "unit", None).unwrap();
        for c in 0..log.cycles() {
            let base = t_on.samples[c * 1250] as f64 - t_off.samples[c * 1250] as f64;
            assert!(base > 0.0);
            for s in 0..1250 {
                let d = t_on.samples[c * 1250 + s] as f64 - t_off.samples[c * 1250 + s] as f64;
                assert!((d - base).abs() < 0.5, "cycle {c} sample {s}: {d} vs {base}");
            }
        }
    }

    #[test]
    fn dc_offsets_increase_with_power() {
        let log = ActivityLog::quiet(216);
        let params = quiet_params();
        let plan = Floorplan::default();
        let center = plan.blocks[Block::FieldMultiplier].center();
        let reference =
            synthesize_trace(&log, &params, &LaserSpec::disabled(), &plan, 5, "ref", None).unwrap();
        let mut last = 0.0;
        for power in [3.0, 13.0, 59.0, 100.0] {
            let spec = LaserSpec::new(power, 27.0, center);
            let t = synthesize_trace(&log, &params, &spec, &plan, 5, "x", None).unwrap();
            let off = dc_offset(&t, &reference).unwrap();
            assert!(off > last, "offset {off} at power {power} not > {last}");
            last = off;
        }
        // equal power, different spot size, both inside the block: equal
        // offsets within 5%
        let t_small =
            synthesize_trace(&log, &params, &LaserSpec::new(100.0, 14.0, center), &plan, 5, "a", None)
                .unwrap();
        let t_large =
            synthesize_trace(&log, &params, &LaserSpec::new(100.0, 75.0, center), &plan, 5, "b", None)
                .unwrap();
        let o1 = dc_offset(&t_small, &reference).unwrap();
        let o2 = dc_offset(&t_large, &reference).unwrap();
        assert!((o1 - o2).abs() <= 0.05 * o1.max(o2));
    }

    #[test]
    fn dc_offset_trivia_and_errors() {
        let log = ActivityLog::quiet(54);
        let params = quiet_params();
        let plan = Floorplan::default();
        let t = synthesize_trace(&log, &params, &LaserSpec::disabled(), &plan, 1, "t", None).unwrap();
        assert_eq!(dc_offset(&t, &t).unwrap(), 0.0);
        let mut shifted = t.clone();
        for s in shifted.samples.iter_mut() {
            *s += 2.5;
        }
        assert!((dc_offset(&shifted, &t).unwrap() - 2.5).abs() < 1e-4);
        let mut short = t.clone();
        short.samples.truncate(10);
        assert!(matches!(
            dc_offset(&short, &t),
            Err(LeakageError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn kernel_shape() {
        let params = PowerParams::default();
        let k = params.kernel();
        assert_eq!(k.len(), SAMPLES_PER_CYCLE);
        assert_eq!(k[0], 1.0);
        assert!(k[1] < 1.0 && k[1] > 0.0);
        assert!(k[params.kernel_support..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn param_validation() {
        let mut p = PowerParams::default();
        p.eta = 1.5;
        assert!(p.validate().is_err());
        let mut p = PowerParams::default();
        p.sigma_noise = -1.0;
        assert!(p.validate().is_err());
        let mut plan = Floorplan::default();
        plan.blocks[Block::FieldAdder] = RectUm::new(0.0, 0.0, 5000.0, 10.0);
        assert!(plan.validate().is_err());
        assert!(LaserSpec::new(120.0, 14.0, (0.0, 0.0)).validate().is_err());
    }
}
