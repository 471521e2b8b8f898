//! The single-trace horizontal attack: per-cycle compression by sum of
//! squared samples, per-slot comparison-to-the-mean extraction of 54 key
//! candidates, relative-correctness scoring, and the static-window variant
//! that looks only at the quiescent tail of each clock cycle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accel::CYCLES_PER_BIT;
use crate::curve::Scalar;
use crate::trace::Trace;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AttackError {
    #[error("trace length {actual} not divisible by {samples_per_cycle} x {cycles_per_bit} samples per key bit (after a {offset_cycles}-cycle offset)")]
    BadLength {
        actual: usize,
        samples_per_cycle: usize,
        cycles_per_bit: usize,
        offset_cycles: usize,
    },
    #[error("candidate has {candidate} bits but the scalar has {truth} processed bits")]
    LengthMismatch { candidate: usize, truth: usize },
    #[error("quiescent window {q} exceeds the {samples_per_cycle} samples of a cycle")]
    WindowTooLarge { q: usize, samples_per_cycle: usize },
    #[error("no candidates to rank")]
    EmptyReport,
}

/// n_bits x 54 table of per-cycle compressed values: entry (j, s) is the
/// compressed value of clock cycle s within key-bit window j.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedMatrix {
    pub n_bits: usize,
    pub cycles_per_bit: usize,
    values: Vec<f64>,
}

impl CompressedMatrix {
    fn from_per_cycle(per_cycle: Vec<f64>, cycles_per_bit: usize) -> Self {
        debug_assert_eq!(per_cycle.len() % cycles_per_bit, 0);
        CompressedMatrix {
            n_bits: per_cycle.len() / cycles_per_bit,
            cycles_per_bit,
            values: per_cycle,
        }
    }

    pub fn get(&self, bit_window: usize, slot: usize) -> f64 {
        self.values[bit_window * self.cycles_per_bit + slot]
    }

    fn column(&self, slot: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_bits).map(move |j| self.get(j, slot))
    }
}

fn window_bounds(
    n_samples: usize,
    samples_per_cycle: usize,
    cycles_per_bit: usize,
    offset_cycles: usize,
) -> Result<(usize, usize), AttackError> {
    let skip = offset_cycles * samples_per_cycle;
    let per_bit = samples_per_cycle * cycles_per_bit;
    let usable = n_samples.saturating_sub(skip);
    if usable == 0 || !usable.is_multiple_of(per_bit) {
        return Err(AttackError::BadLength {
            actual: n_samples,
            samples_per_cycle,
            cycles_per_bit,
            offset_cycles,
        });
    }
    Ok((skip, usable / per_bit))
}

/// Sum-of-squared-values compression: M[j][s] = sum over the cycle's
/// samples of sample^2.
pub fn compress(t: &Trace) -> Result<CompressedMatrix, AttackError> {
    compress_with_offset(t, 0)
}

/// Same, skipping `offset_cycles` clock cycles first (alignment knob for
/// externally captured traces).
pub fn compress_with_offset(t: &Trace, offset_cycles: usize) -> Result<CompressedMatrix, AttackError> {
    let spc = t.samples_per_cycle();
    let (skip, n_bits) = window_bounds(t.samples.len(), spc, CYCLES_PER_BIT, offset_cycles)?;
    let per_cycle: Vec<f64> = t.samples[skip..]
        .chunks_exact(spc)
        .map(|cycle| cycle.iter().map(|&v| (v as f64) * (v as f64)).sum())
        .collect();
    debug_assert_eq!(per_cycle.len(), n_bits * CYCLES_PER_BIT);
    Ok(CompressedMatrix::from_per_cycle(per_cycle, CYCLES_PER_BIT))
}

/// Static-window compression: the mean of the last `quiescent_window`
/// samples of each cycle (the decay kernel's tail, i.e. the static level).
pub fn static_compress(t: &Trace, quiescent_window: usize) -> Result<CompressedMatrix, AttackError> {
    static_compress_with_offset(t, quiescent_window, 0)
}

pub fn static_compress_with_offset(
    t: &Trace,
    quiescent_window: usize,
    offset_cycles: usize,
) -> Result<CompressedMatrix, AttackError> {
    let spc = t.samples_per_cycle();
    if quiescent_window == 0 || quiescent_window > spc {
        return Err(AttackError::WindowTooLarge {
            q: quiescent_window,
            samples_per_cycle: spc,
        });
    }
    let (skip, _) = window_bounds(t.samples.len(), spc, CYCLES_PER_BIT, offset_cycles)?;
    let per_cycle: Vec<f64> = t.samples[skip..]
        .chunks_exact(spc)
        .map(|cycle| {
            cycle[spc - quiescent_window..]
                .iter()
                .map(|&v| v as f64)
                .sum::<f64>()
                / quiescent_window as f64
        })
        .collect();
    Ok(CompressedMatrix::from_per_cycle(per_cycle, CYCLES_PER_BIT))
}

/// Default quiescent window for the static-only pipeline.
pub const DEFAULT_QUIESCENT_WINDOW: usize = 100;

/// One extracted key guess: the candidate from clock-cycle slot `slot`.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyCandidate {
    pub slot: usize,
    pub bits: Vec<bool>,
    pub inverted: bool,
}

impl KeyCandidate {
    pub fn inverted_twin(&self) -> KeyCandidate {
        KeyCandidate {
            slot: self.slot,
            bits: self.bits.iter().map(|b| !b).collect(),
            inverted: !self.inverted,
        }
    }

    pub fn bits_hex(&self) -> String {
        let mut s = String::new();
        let pad = (4 - self.bits.len() % 4) % 4;
        let mut nib = 0u32;
        let mut count = pad;
        for &b in &self.bits {
            nib = (nib << 1) | b as u32;
            count += 1;
            if count == 4 {
                s.push(char::from_digit(nib, 16).unwrap());
                nib = 0;
                count = 0;
            }
        }
        s
    }
}

/// Comparison-to-the-mean: for each slot s, candidate bit j is 1 iff
/// M[j][s] >= column mean (ties resolve to 1). One candidate per slot.
pub fn comparison_to_mean(m: &CompressedMatrix) -> Vec<KeyCandidate> {
    (0..m.cycles_per_bit)
        .map(|slot| {
            let mean = m.column(slot).sum::<f64>() / m.n_bits as f64;
            let bits = m.column(slot).map(|v| v >= mean).collect();
            KeyCandidate {
                slot,
                bits,
                inverted: false,
            }
        })
        .collect()
}

/// Relative correctness: percentage of candidate bits matching the true
/// processed scalar bits. The inverted twin scores 100 - delta.
pub fn score(candidate: &KeyCandidate, k_true: &Scalar) -> Result<f64, AttackError> {
    let truth = k_true.processed_bits();
    if truth.len() != candidate.bits.len() {
        return Err(AttackError::LengthMismatch {
            candidate: candidate.bits.len(),
            truth: truth.len(),
        });
    }
    let matches = candidate
        .bits
        .iter()
        .zip(truth.iter())
        .filter(|(a, b)| a == b)
        .count();
    Ok(100.0 * matches as f64 / truth.len() as f64)
}

/// Scored slot row in a report.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SlotScore {
    pub slot: usize,
    pub delta_raw: f64,
    pub delta_inverted: f64,
}

/// Best extracted candidate of a run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BestCandidate {
    pub slot: usize,
    pub delta: f64,
    pub inverted: bool,
    pub bits_hex: String,
}

/// Attack outcome: all candidates, the per-slot correctness table (when the
/// true scalar is known) and the winning candidate.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AttackReport {
    pub scenario: String,
    pub seed: u64,
    pub n_bits: usize,
    pub compression: String,
    pub allow_inversion: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slots: Option<Vec<SlotScore>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best: Option<BestCandidate>,
    /// Raw candidate bit strings, hex, slot-ordered (for unscored runs).
    pub candidates_hex: Vec<String>,
}

/// Rank candidates against the true scalar; with `allow_inversion`, each
/// slot also competes with its inverted twin (the comparison rule's polarity
/// is not identifiable from a single trace). Ties keep the lowest slot,
/// raw before inverted.
pub fn best_candidate(
    candidates: &[KeyCandidate],
    k_true: &Scalar,
    allow_inversion: bool,
) -> Result<BestCandidate, AttackError> {
    if candidates.is_empty() {
        return Err(AttackError::EmptyReport);
    }
    let mut best: Option<BestCandidate> = None;
    for c in candidates {
        let raw = score(c, k_true)?;
        let entries = if allow_inversion {
            vec![(raw, false), (100.0 - raw, true)]
        } else {
            vec![(raw, false)]
        };
        for (delta, inverted) in entries {
            if best.as_ref().is_none_or(|b| delta > b.delta) {
                let cand = if inverted { c.inverted_twin() } else { c.clone() };
                best = Some(BestCandidate {
                    slot: c.slot,
                    delta,
                    inverted,
                    bits_hex: cand.bits_hex(),
                });
            }
        }
    }
    Ok(best.expect("non-empty candidates"))
}

/// Run extraction and scoring over a compressed matrix.
pub fn build_report(
    m: &CompressedMatrix,
    k_true: Option<&Scalar>,
    allow_inversion: bool,
    compression: &str,
    scenario: &str,
    seed: u64,
) -> Result<AttackReport, AttackError> {
    let candidates = comparison_to_mean(m);
    let candidates_hex = candidates.iter().map(|c| c.bits_hex()).collect();
    let (slots, best) = match k_true {
        Some(k) => {
            let slots: Vec<SlotScore> = candidates
                .iter()
                .map(|c| {
                    let raw = score(c, k)?;
                    Ok(SlotScore {
                        slot: c.slot,
                        delta_raw: raw,
                        delta_inverted: 100.0 - raw,
                    })
                })
                .collect::<Result<_, AttackError>>()?;
            let best = best_candidate(&candidates, k, allow_inversion)?;
            (Some(slots), Some(best))
        }
        None => (None, None),
    };
    Ok(AttackReport {
        scenario: scenario.to_string(),
        seed,
        n_bits: m.n_bits,
        compression: compression.to_string(),
        allow_inversion,
        slots,
        best,
        candidates_hex,
    })
}

impl AttackReport {
    /// Stable JSON bytes (fixed field order, trailing newline).
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("report serializes");
        v.push(b'\n');
        v
    }

    /// CSV rows: slot, delta_raw, delta_inverted.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slot,delta_raw,delta_inverted\n");
        if let Some(slots) = &self.slots {
            for s in slots {
                out.push_str(&format!("{},{:.4},{:.4}\n", s.slot, s.delta_raw, s.delta_inverted));
            }
        }
        out
    }
}
