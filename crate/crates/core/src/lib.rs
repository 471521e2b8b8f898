//! Desk-scale model of a binary-curve scalar-multiplication accelerator,
//! a laser-illumination power-leakage model for it, and the single-trace
//! horizontal attack pipeline that consumes the synthesized traces.

pub mod accel;
pub mod attack;
pub mod curve;
pub mod field;
pub mod leakage;
pub mod trace;

pub use accel::{build_schedule, simulate_kp, ActivityLog, BitSchedule, Block, BlockMap};
pub use attack::{AttackReport, CompressedMatrix, KeyCandidate};
pub use curve::{AffinePoint, CurveParams, LdPair, Scalar};
pub use field::{BinaryField, FieldElement};
pub use leakage::{
    absorbed_power, beam_intensity, dc_offset, synthesize_trace, Floorplan, LaserSpec, PowerParams,
};
pub use trace::Trace;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
