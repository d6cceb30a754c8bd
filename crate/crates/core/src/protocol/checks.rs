//! Decoy insertion and the three security checks.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::qstate::{
    bell_state, inner_product, measure_qubit, measure_single, Basis, BellLabel, Side,
    SingleQubitState, StateError, StateVector,
};

use super::CheckKind;

/// One particle of a stored pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Half {
    pub pair: usize,
    pub side: Side,
}

/// A transmitted sequence element: a payload item or an interleaved decoy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot<T> {
    Payload(T),
    Decoy(StateVector),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoyRecord {
    pub position: usize,
    pub prepared: SingleQubitState,
    pub measured: Option<SingleQubitState>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckReport {
    pub kind: CheckKind,
    pub errors: usize,
    pub total: usize,
    pub error_rate: f64,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(kind: CheckKind, errors: usize, total: usize, threshold: f64) -> Self {
        let error_rate = if total == 0 { 0.0 } else { errors as f64 / total as f64 };
        Self {
            kind,
            errors,
            total,
            error_rate,
            pass: error_rate <= threshold,
        }
    }
}

/// Interleaves `decoy_count` random decoys into `payload` at uniformly
/// drawn positions. Returns the sequence and the sender's secret records,
/// ordered by position.
pub fn insert_decoys<T, R: Rng + ?Sized>(
    payload: Vec<T>,
    decoy_count: usize,
    rng: &mut R,
) -> (Vec<Slot<T>>, Vec<DecoyRecord>) {
    let total = payload.len() + decoy_count;
    let mut positions = index::sample(rng, total, decoy_count).into_vec();
    positions.sort_unstable();
    let records: Vec<DecoyRecord> = positions
        .iter()
        .map(|&position| DecoyRecord {
            position,
            prepared: SingleQubitState::ALL[rng.gen_range(0..4)],
            measured: None,
        })
        .collect();
    let mut out = Vec::with_capacity(total);
    let mut payload = payload.into_iter();
    let mut next = records.iter().peekable();
    for pos in 0..total {
        match next.peek() {
            Some(r) if r.position == pos => {
                out.push(Slot::Decoy(r.prepared.state()));
                next.next();
            }
            _ => out.push(Slot::Payload(payload.next().expect("payload length"))),
        }
    }
    (out, records)
}

/// Payload items of a received sequence, decoys removed.
pub fn strip_decoys<T: Copy>(seq: &[Slot<T>]) -> Vec<T> {
    seq.iter()
        .filter_map(|s| match s {
            Slot::Payload(p) => Some(*p),
            Slot::Decoy(_) => None,
        })
        .collect()
}

/// Receiver measures each announced decoy in its preparation basis; an error
/// is any outcome differing from the prepared state.
pub fn decoy_check<T, R: Rng + ?Sized>(
    kind: CheckKind,
    received: &[Slot<T>],
    records: &mut [DecoyRecord],
    threshold: f64,
    rng: &mut R,
) -> Result<CheckReport, StateError> {
    let mut errors = 0;
    for rec in records.iter_mut() {
        let measured = match received.get(rec.position) {
            Some(Slot::Decoy(state)) => Some(measure_single(state, rec.prepared.basis(), rng)?),
            _ => None,
        };
        rec.measured = measured;
        if measured != Some(rec.prepared) {
            errors += 1;
        }
    }
    Ok(CheckReport::new(kind, errors, records.len(), threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorrelationSample {
    pub label: BellLabel,
    pub basis: Basis,
    pub outcome_a: SingleQubitState,
    pub outcome_b: SingleQubitState,
}

impl CorrelationSample {
    pub fn violates(&self) -> bool {
        (self.outcome_a.bit() ^ self.outcome_b.bit() == 1) != self.label.parity_flip(self.basis)
    }
}

/// Both holders measure their particle of each sampled pair in a shared
/// random basis; a violation is an outcome parity that disagrees with the
/// pair's known Bell label.
pub fn correlation_check<RB, RA, RO>(
    kind: CheckKind,
    pairs: &mut [(BellLabel, StateVector)],
    threshold: f64,
    basis_rng: &mut RB,
    a_rng: &mut RA,
    b_rng: &mut RO,
) -> Result<(CheckReport, Vec<CorrelationSample>), StateError>
where
    RB: Rng + ?Sized,
    RA: Rng + ?Sized,
    RO: Rng + ?Sized,
{
    let bases: Vec<Basis> = pairs
        .iter()
        .map(|_| Basis::ALL[basis_rng.gen_range(0..2)])
        .collect();
    let mut samples = Vec::with_capacity(pairs.len());
    for ((label, state), basis) in pairs.iter_mut().zip(bases) {
        let (outcome_a, after_a) = measure_qubit(state, Side::A, basis, a_rng)?;
        let (outcome_b, after_b) = measure_qubit(&after_a, Side::B, basis, b_rng)?;
        *state = after_b;
        samples.push(CorrelationSample {
            label: *label,
            basis,
            outcome_a,
            outcome_b,
        });
    }
    let errors = samples.iter().filter(|s| s.violates()).count();
    Ok((CheckReport::new(kind, errors, samples.len(), threshold), samples))
}

/// `δ = |⟨announced|echoed⟩|`, which is 1 for equal labels and 0 otherwise.
pub fn echo_check(announced: BellLabel, echoed: BellLabel) -> u8 {
    let overlap = inner_product(&bell_state(announced), &bell_state(echoed))
        .expect("Bell states share a dimension")
        .abs();
    u8::from(overlap > 0.5)
}
