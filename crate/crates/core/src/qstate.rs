//! Exact statevector engine for one- and two-qubit states.
//!
//! Basis index `i` of a two-qubit state is read as the binary ket `|ab⟩`
//! where `a` (the high bit) belongs to the first particle (side A) and `b`
//! to the second particle (side B).

use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};
use core::str::FromStr;

use rand::Rng;
use thiserror::Error;

pub use core::f64::consts::FRAC_1_SQRT_2;

/// Allowed drift of `Σ|amp|²` away from one.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Default tolerance for [`equal_up_to_phase`] and label recognition.
pub const DEFAULT_PHASE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("expected a {expected}-qubit state, found {found} qubit(s)")]
    QubitCount { expected: usize, found: usize },
    #[error("dimension mismatch: {left}-qubit vs {right}-qubit state")]
    DimensionMismatch { left: usize, right: usize },
    #[error("{0} amplitudes do not describe a 1- or 2-qubit state")]
    BadLength(usize),
    #[error("state is not normalized (norm squared = {0})")]
    NotNormalized(f64),
    #[error("amplitude is not finite")]
    NonFinite,
}

/// Complex probability amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Amplitude {
    pub re: f64,
    pub im: f64,
}

impl Amplitude {
    pub const ZERO: Amplitude = Amplitude::new(0.0, 0.0);
    pub const ONE: Amplitude = Amplitude::new(1.0, 0.0);

    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub const fn real(re: f64) -> Self {
        Self { re, im: 0.0 }
    }

    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn abs(self) -> f64 {
        libm::hypot(self.re, self.im)
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.re * k, self.im * k)
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl Add for Amplitude {
    type Output = Amplitude;
    fn add(self, rhs: Amplitude) -> Amplitude {
        Amplitude::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for Amplitude {
    type Output = Amplitude;
    fn sub(self, rhs: Amplitude) -> Amplitude {
        Amplitude::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Mul for Amplitude {
    type Output = Amplitude;
    fn mul(self, rhs: Amplitude) -> Amplitude {
        Amplitude::new(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
        )
    }
}

impl Neg for Amplitude {
    type Output = Amplitude;
    fn neg(self) -> Amplitude {
        Amplitude::new(-self.re, -self.im)
    }
}

/// Which particle of a pair an operation touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    /// Z eigenbasis {|0⟩, |1⟩}.
    Computational,
    /// X eigenbasis {|+⟩, |−⟩}.
    Diagonal,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Computational, Basis::Diagonal];

    pub fn symbol(self) -> &'static str {
        match self {
            Basis::Computational => "Z",
            Basis::Diagonal => "X",
        }
    }
}

/// The four Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [
        BellLabel::PhiPlus,
        BellLabel::PhiMinus,
        BellLabel::PsiPlus,
        BellLabel::PsiMinus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Greek-letter form, e.g. `φ+`.
    pub fn symbol(self) -> &'static str {
        match self {
            BellLabel::PhiPlus => "φ+",
            BellLabel::PhiMinus => "φ-",
            BellLabel::PsiPlus => "ψ+",
            BellLabel::PsiMinus => "ψ-",
        }
    }

    /// ASCII form used in transcripts, reports and CSV files.
    pub fn name(self) -> &'static str {
        match self {
            BellLabel::PhiPlus => "phi+",
            BellLabel::PhiMinus => "phi-",
            BellLabel::PsiPlus => "psi+",
            BellLabel::PsiMinus => "psi-",
        }
    }

    /// Parity of the two outcomes when both particles are measured in
    /// `basis`: `false` for equal outcomes, `true` for opposite ones.
    pub fn parity_flip(self, basis: Basis) -> bool {
        match (self, basis) {
            (BellLabel::PhiPlus, _) => false,
            (BellLabel::PhiMinus, Basis::Computational) => false,
            (BellLabel::PhiMinus, Basis::Diagonal) => true,
            (BellLabel::PsiPlus, Basis::Computational) => true,
            (BellLabel::PsiPlus, Basis::Diagonal) => false,
            (BellLabel::PsiMinus, _) => true,
        }
    }
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown Bell label `{0}` (expected phi+, phi-, psi+ or psi-)")]
pub struct ParseLabelError(pub alloc::string::String);

impl FromStr for BellLabel {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().trim_start_matches('|').trim_end_matches('⟩');
        let label = match t {
            "phi+" | "φ+" | "PhiPlus" => BellLabel::PhiPlus,
            "phi-" | "φ-" | "φ−" | "PhiMinus" => BellLabel::PhiMinus,
            "psi+" | "ψ+" | "Ψ+" | "PsiPlus" => BellLabel::PsiPlus,
            "psi-" | "ψ-" | "ψ−" | "Ψ-" | "PsiMinus" => BellLabel::PsiMinus,
            _ => return Err(ParseLabelError(s.into())),
        };
        Ok(label)
    }
}

/// Single-qubit encoding operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliOp {
    I,
    Z,
    X,
    /// `iσy`, fixed as `[[0, 1], [-1, 0]]`.
    IY,
}

impl PauliOp {
    pub const ALL: [PauliOp; 4] = [PauliOp::I, PauliOp::Z, PauliOp::X, PauliOp::IY];

    pub fn matrix(self) -> [[Amplitude; 2]; 2] {
        let (o, l) = (Amplitude::ZERO, Amplitude::ONE);
        match self {
            PauliOp::I => [[l, o], [o, l]],
            PauliOp::Z => [[l, o], [o, -l]],
            PauliOp::X => [[o, l], [l, o]],
            PauliOp::IY => [[o, l], [-l, o]],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PauliOp::I => "I",
            PauliOp::Z => "Z",
            PauliOp::X => "X",
            PauliOp::IY => "iY",
        }
    }
}

impl fmt::Display for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The four decoy preparations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SingleQubitState {
    Zero,
    One,
    Plus,
    Minus,
}

impl SingleQubitState {
    pub const ALL: [SingleQubitState; 4] = [
        SingleQubitState::Zero,
        SingleQubitState::One,
        SingleQubitState::Plus,
        SingleQubitState::Minus,
    ];

    pub fn basis(self) -> Basis {
        match self {
            SingleQubitState::Zero | SingleQubitState::One => Basis::Computational,
            SingleQubitState::Plus | SingleQubitState::Minus => Basis::Diagonal,
        }
    }

    /// Outcome bit within its basis: 0 for |0⟩ and |+⟩, 1 for |1⟩ and |−⟩.
    pub fn bit(self) -> u8 {
        match self {
            SingleQubitState::Zero | SingleQubitState::Plus => 0,
            SingleQubitState::One | SingleQubitState::Minus => 1,
        }
    }

    pub fn from_basis_bit(basis: Basis, bit: u8) -> Self {
        match (basis, bit & 1) {
            (Basis::Computational, 0) => SingleQubitState::Zero,
            (Basis::Computational, _) => SingleQubitState::One,
            (Basis::Diagonal, 0) => SingleQubitState::Plus,
            (Basis::Diagonal, _) => SingleQubitState::Minus,
        }
    }

    /// The orthogonal state in the same basis.
    pub fn flip(self) -> Self {
        Self::from_basis_bit(self.basis(), self.bit() ^ 1)
    }

    pub fn amplitudes(self) -> [Amplitude; 2] {
        let h = FRAC_1_SQRT_2;
        match self {
            SingleQubitState::Zero => [Amplitude::ONE, Amplitude::ZERO],
            SingleQubitState::One => [Amplitude::ZERO, Amplitude::ONE],
            SingleQubitState::Plus => [Amplitude::real(h), Amplitude::real(h)],
            SingleQubitState::Minus => [Amplitude::real(h), Amplitude::real(-h)],
        }
    }

    pub fn state(self) -> StateVector {
        let [a0, a1] = self.amplitudes();
        StateVector::from_parts(1, [a0, a1, Amplitude::ZERO, Amplitude::ZERO])
    }

    pub fn name(self) -> &'static str {
        match self {
            SingleQubitState::Zero => "0",
            SingleQubitState::One => "1",
            SingleQubitState::Plus => "+",
            SingleQubitState::Minus => "-",
        }
    }
}

impl fmt::Display for SingleQubitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Normalized state of one or two qubits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: [Amplitude; 4],
}

impl StateVector {
    pub(crate) fn from_parts(num_qubits: usize, amps: [Amplitude; 4]) -> Self {
        Self { num_qubits, amps }
    }

    /// Builds a state from `2` or `4` amplitudes, rejecting unnormalized input.
    pub fn from_amplitudes(amps: &[Amplitude]) -> Result<Self, StateError> {
        let num_qubits = match amps.len() {
            2 => 1,
            4 => 2,
            n => return Err(StateError::BadLength(n)),
        };
        if amps.iter().any(|a| !a.is_finite()) {
            return Err(StateError::NonFinite);
        }
        let mut buf = [Amplitude::ZERO; 4];
        buf[..amps.len()].copy_from_slice(amps);
        let state = Self::from_parts(num_qubits, buf);
        let n = state.norm_sqr();
        if libm::fabs(n - 1.0) > NORM_TOLERANCE {
            return Err(StateError::NotNormalized(n));
        }
        Ok(state)
    }

    pub fn from_real(amps: &[f64]) -> Result<Self, StateError> {
        let mut buf = [Amplitude::ZERO; 4];
        if amps.len() > 4 {
            return Err(StateError::BadLength(amps.len()));
        }
        for (dst, &re) in buf.iter_mut().zip(amps) {
            *dst = Amplitude::real(re);
        }
        Self::from_amplitudes(&buf[..amps.len()])
    }

    /// Computational basis ket `|index⟩`.
    pub fn basis_state(num_qubits: usize, index: usize) -> Result<Self, StateError> {
        if !(1..=2).contains(&num_qubits) {
            return Err(StateError::BadLength(1 << num_qubits.min(8)));
        }
        if index >= 1 << num_qubits {
            return Err(StateError::BadLength(index));
        }
        let mut amps = [Amplitude::ZERO; 4];
        amps[index] = Amplitude::ONE;
        Ok(Self::from_parts(num_qubits, amps))
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps[..1 << self.num_qubits]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes().iter().map(|a| a.norm_sqr()).sum()
    }

    /// Multiplies every amplitude by `phase` (expected to have unit modulus).
    pub fn with_global_phase(&self, phase: Amplitude) -> Self {
        let mut out = *self;
        for a in out.amps.iter_mut() {
            *a = *a * phase;
        }
        out
    }

    /// Phase-rotated copy whose first nonzero amplitude is real and positive.
    /// Display only; equality goes through [`equal_up_to_phase`].
    pub fn canonical(&self) -> Self {
        match self.amplitudes().iter().find(|a| a.abs() > 1e-12) {
            Some(lead) => {
                let r = lead.abs();
                self.with_global_phase(Amplitude::new(lead.re / r, -lead.im / r))
            }
            None => *self,
        }
    }

    fn expect_qubits(&self, expected: usize) -> Result<(), StateError> {
        if self.num_qubits != expected {
            return Err(StateError::QubitCount {
                expected,
                found: self.num_qubits,
            });
        }
        Ok(())
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.canonical();
        let mut first = true;
        for (i, a) in c.amplitudes().iter().enumerate() {
            if a.abs() < 1e-12 {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            if libm::fabs(a.im) < 1e-12 {
                write!(f, "{:.4}", a.re)?;
            } else {
                write!(f, "({:.4}{:+.4}i)", a.re, a.im)?;
            }
            if self.num_qubits == 2 {
                write!(f, "|{}{}⟩", i >> 1, i & 1)?;
            } else {
                write!(f, "|{}⟩", i)?;
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

pub fn bell_state(label: BellLabel) -> StateVector {
    let h = Amplitude::real(FRAC_1_SQRT_2);
    let o = Amplitude::ZERO;
    let amps = match label {
        BellLabel::PhiPlus => [h, o, o, h],
        BellLabel::PhiMinus => [h, o, o, -h],
        BellLabel::PsiPlus => [o, h, h, o],
        BellLabel::PsiMinus => [o, h, -h, o],
    };
    StateVector::from_parts(2, amps)
}

/// `(U⊗I)|ψ⟩` for side A, `(I⊗U)|ψ⟩` for side B.
pub fn apply_pauli(state: &StateVector, op: PauliOp, side: Side) -> Result<StateVector, StateError> {
    state.expect_qubits(2)?;
    let u = op.matrix();
    let src = &state.amps;
    let mut out = [Amplitude::ZERO; 4];
    for a in 0..2 {
        for b in 0..2 {
            let mut acc = Amplitude::ZERO;
            for k in 0..2 {
                acc = match side {
                    Side::A => acc + u[a][k] * src[(k << 1) | b],
                    Side::B => acc + u[b][k] * src[(a << 1) | k],
                };
            }
            out[(a << 1) | b] = acc;
        }
    }
    Ok(StateVector::from_parts(2, out))
}

/// `U|ψ⟩` on a single qubit.
pub fn apply_pauli_single(state: &StateVector, op: PauliOp) -> Result<StateVector, StateError> {
    state.expect_qubits(1)?;
    let u = op.matrix();
    let s = &state.amps;
    let mut out = [Amplitude::ZERO; 4];
    out[0] = u[0][0] * s[0] + u[0][1] * s[1];
    out[1] = u[1][0] * s[0] + u[1][1] * s[1];
    Ok(StateVector::from_parts(1, out))
}

/// Hermitian inner product `⟨s1|s2⟩`.
pub fn inner_product(s1: &StateVector, s2: &StateVector) -> Result<Amplitude, StateError> {
    if s1.num_qubits != s2.num_qubits {
        return Err(StateError::DimensionMismatch {
            left: s1.num_qubits,
            right: s2.num_qubits,
        });
    }
    Ok(s1
        .amplitudes()
        .iter()
        .zip(s2.amplitudes())
        .fold(Amplitude::ZERO, |acc, (a, b)| acc + a.conj() * *b))
}

/// True iff `|⟨s1|s2⟩| ≥ 1 − tol`.
pub fn equal_up_to_phase(s1: &StateVector, s2: &StateVector, tol: f64) -> Result<bool, StateError> {
    Ok(inner_product(s1, s2)?.abs() >= 1.0 - tol)
}

/// `|⟨L|ψ⟩|²` for each label in [`BellLabel::ALL`] order.
pub fn bell_probabilities(state: &StateVector) -> Result<[f64; 4], StateError> {
    state.expect_qubits(2)?;
    let mut probs = [0.0; 4];
    for (p, label) in probs.iter_mut().zip(BellLabel::ALL) {
        *p = inner_product(&bell_state(label), state)?.norm_sqr();
    }
    Ok(probs)
}

/// The Bell label `state` equals up to global phase, if any.
pub fn bell_label_of(state: &StateVector, tol: f64) -> Result<Option<BellLabel>, StateError> {
    state.expect_qubits(2)?;
    for label in BellLabel::ALL {
        if equal_up_to_phase(&bell_state(label), state, tol)? {
            return Ok(Some(label));
        }
    }
    Ok(None)
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Projective Bell-basis measurement. Returns the sampled label and the
/// probability with which it was drawn.
pub fn bell_measure<R: Rng + ?Sized>(
    state: &StateVector,
    rng: &mut R,
) -> Result<(BellLabel, f64), StateError> {
    let probs = bell_probabilities(state)?;
    let total: f64 = probs.iter().sum();
    let i = sample_index(&probs, rng);
    Ok((BellLabel::ALL[i], probs[i] / total))
}

/// Projective single-qubit measurement in `basis`.
pub fn measure_single<R: Rng + ?Sized>(
    state: &StateVector,
    basis: Basis,
    rng: &mut R,
) -> Result<SingleQubitState, StateError> {
    state.expect_qubits(1)?;
    let outcomes = [
        SingleQubitState::from_basis_bit(basis, 0),
        SingleQubitState::from_basis_bit(basis, 1),
    ];
    let mut probs = [0.0; 2];
    for (p, o) in probs.iter_mut().zip(outcomes) {
        *p = inner_product(&o.state(), state)?.norm_sqr();
    }
    Ok(outcomes[sample_index(&probs, rng)])
}

/// Measures one particle of a pair in `basis` and returns the outcome with
/// the collapsed joint state.
pub fn measure_qubit<R: Rng + ?Sized>(
    state: &StateVector,
    side: Side,
    basis: Basis,
    rng: &mut R,
) -> Result<(SingleQubitState, StateVector), StateError> {
    state.expect_qubits(2)?;
    let branches = [0u8, 1].map(|bit| {
        let outcome = SingleQubitState::from_basis_bit(basis, bit);
        (outcome, project_qubit(state, side, outcome))
    });
    let probs = [branches[0].1.norm_sqr(), branches[1].1.norm_sqr()];
    let (outcome, unnormalized) = branches[sample_index(&probs, rng)];
    let norm = libm::sqrt(unnormalized.norm_sqr());
    let mut post = unnormalized;
    for a in post.amps.iter_mut() {
        *a = a.scale(1.0 / norm);
    }
    Ok((outcome, post))
}

/// `(|s⟩⟨s| ⊗ I)|ψ⟩` or `(I ⊗ |s⟩⟨s|)|ψ⟩`, unnormalized.
fn project_qubit(state: &StateVector, side: Side, onto: SingleQubitState) -> StateVector {
    let s = onto.amplitudes();
    let src = &state.amps;
    let mut out = [Amplitude::ZERO; 4];
    match side {
        Side::A => {
            for b in 0..2 {
                let rest = s[0].conj() * src[b] + s[1].conj() * src[2 | b];
                for a in 0..2 {
                    out[(a << 1) | b] = s[a] * rest;
                }
            }
        }
        Side::B => {
            for a in 0..2 {
                let rest = s[0].conj() * src[a << 1] + s[1].conj() * src[(a << 1) | 1];
                for b in 0..2 {
                    out[(a << 1) | b] = s[b] * rest;
                }
            }
        }
    }
    StateVector::from_parts(2, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const H: f64 = FRAC_1_SQRT_2;

    fn close(a: f64, b: f64) -> bool {
        libm::fabs(a - b) < 1e-12
    }

    #[test]
    fn bell_states_match_definitions() {
        let phi_plus = StateVector::from_real(&[H, 0.0, 0.0, H]).unwrap();
        let psi_minus = StateVector::from_real(&[0.0, H, -H, 0.0]).unwrap();
        assert_eq!(bell_state(BellLabel::PhiPlus), phi_plus);
        assert_eq!(bell_state(BellLabel::PsiMinus), psi_minus);
        for l in BellLabel::ALL {
            for m in BellLabel::ALL {
                let ip = inner_product(&bell_state(l), &bell_state(m)).unwrap();
                let expected = if l == m { 1.0 } else { 0.0 };
                assert!(close(ip.abs(), expected), "{l} {m}");
            }
        }
    }

    #[test]
    fn x_on_a_turns_phi_plus_into_psi_plus() {
        let out = apply_pauli(&bell_state(BellLabel::PhiPlus), PauliOp::X, Side::A).unwrap();
        let expected = StateVector::from_real(&[0.0, H, H, 0.0]).unwrap();
        assert_eq!(out, expected);
        assert!(equal_up_to_phase(&out, &bell_state(BellLabel::PsiPlus), 1e-9).unwrap());
    }

    #[test]
    fn identity_leaves_state_alone() {
        let s = StateVector::from_real(&[0.6, 0.0, 0.0, 0.8]).unwrap();
        assert_eq!(apply_pauli(&s, PauliOp::I, Side::A).unwrap(), s);
        assert_eq!(apply_pauli(&s, PauliOp::I, Side::B).unwrap(), s);
    }

    #[test]
    fn iy_on_b_of_phi_plus_is_minus_psi_minus() {
        // I⊗iY: |00⟩ → −|01⟩, |11⟩ → |10⟩
        let out = apply_pauli(&bell_state(BellLabel::PhiPlus), PauliOp::IY, Side::B).unwrap();
        let expected = StateVector::from_real(&[0.0, -H, H, 0.0]).unwrap();
        assert_eq!(out, expected);
        let ip = inner_product(&bell_state(BellLabel::PsiMinus), &out).unwrap();
        assert!(close(ip.re, -1.0));
    }

    #[test]
    fn iy_on_a_of_phi_plus_is_psi_minus_up_to_sign() {
        let out = apply_pauli(&bell_state(BellLabel::PhiPlus), PauliOp::IY, Side::A).unwrap();
        assert!(equal_up_to_phase(&out, &bell_state(BellLabel::PsiMinus), 1e-9).unwrap());
    }

    #[test]
    fn pauli_squares() {
        let zero = SingleQubitState::Zero.state();
        let plus = SingleQubitState::Plus.state();
        for s in [zero, plus] {
            for op in [PauliOp::Z, PauliOp::X] {
                let twice = apply_pauli_single(&apply_pauli_single(&s, op).unwrap(), op).unwrap();
                assert_eq!(twice, s);
            }
            let twice =
                apply_pauli_single(&apply_pauli_single(&s, PauliOp::IY).unwrap(), PauliOp::IY).unwrap();
            assert_eq!(twice, s.with_global_phase(-Amplitude::ONE));
        }
        assert_eq!(
            apply_pauli_single(&zero, PauliOp::IY).unwrap(),
            SingleQubitState::One.state().with_global_phase(-Amplitude::ONE)
        );
    }

    #[test]
    fn pauli_matrices_are_unitary() {
        for op in PauliOp::ALL {
            let u = op.matrix();
            for i in 0..2 {
                for j in 0..2 {
                    let dot = u[0][i].conj() * u[0][j] + u[1][i].conj() * u[1][j];
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!(close(dot.re, expected) && close(dot.im, 0.0));
                }
            }
        }
    }

    #[test]
    fn apply_pauli_rejects_single_qubit() {
        let err = apply_pauli(&SingleQubitState::Zero.state(), PauliOp::X, Side::A).unwrap_err();
        assert_eq!(err, StateError::QubitCount { expected: 2, found: 1 });
    }

    #[test]
    fn bell_measure_is_deterministic_on_eigenstates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (label, p) = bell_measure(&bell_state(BellLabel::PsiPlus), &mut rng).unwrap();
        assert_eq!(label, BellLabel::PsiPlus);
        assert!(close(p, 1.0));
        let s = apply_pauli(&bell_state(BellLabel::PhiPlus), PauliOp::Z, Side::B).unwrap();
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(bell_measure(&s, &mut rng).unwrap().0, BellLabel::PhiMinus);
        }
    }

    #[test]
    fn bell_measure_of_00_splits_between_phi_states() {
        // |00⟩ = (|φ+⟩ + |φ−⟩)/√2
        let s = StateVector::basis_state(2, 0).unwrap();
        let probs = bell_probabilities(&s).unwrap();
        assert!(close(probs[0], 0.5) && close(probs[1], 0.5));
        assert!(close(probs[2], 0.0) && close(probs[3], 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts = [0usize; 4];
        for _ in 0..4000 {
            let (l, p) = bell_measure(&s, &mut rng).unwrap();
            assert!(close(p, 0.5));
            counts[l.index()] += 1;
        }
        assert_eq!(counts[2] + counts[3], 0);
        assert!((1800..2200).contains(&counts[0]), "{counts:?}");
    }

    #[test]
    fn single_qubit_measurements() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            assert_eq!(
                measure_single(&SingleQubitState::Plus.state(), Basis::Diagonal, &mut rng).unwrap(),
                SingleQubitState::Plus
            );
            assert_eq!(
                measure_single(&SingleQubitState::One.state(), Basis::Computational, &mut rng).unwrap(),
                SingleQubitState::One
            );
        }
        let mut plus = 0;
        for _ in 0..4000 {
            match measure_single(&SingleQubitState::Zero.state(), Basis::Diagonal, &mut rng).unwrap() {
                SingleQubitState::Plus => plus += 1,
                SingleQubitState::Minus => {}
                other => panic!("outcome {other} outside the diagonal basis"),
            }
        }
        assert!((1800..2200).contains(&plus), "{plus}");
        // |⟨+|0⟩|² = 1/2
        let ip = inner_product(&SingleQubitState::Zero.state(), &SingleQubitState::Plus.state()).unwrap();
        assert!(close(ip.re, H));
    }

    #[test]
    fn phase_comparison() {
        let psi_minus = bell_state(BellLabel::PsiMinus);
        let flipped = psi_minus.with_global_phase(-Amplitude::ONE);
        assert!(equal_up_to_phase(&psi_minus, &flipped, 1e-9).unwrap());
        assert!(!equal_up_to_phase(&bell_state(BellLabel::PhiPlus), &bell_state(BellLabel::PhiMinus), 1e-9).unwrap());
        let one = SingleQubitState::Zero.state();
        assert_eq!(
            equal_up_to_phase(&one, &psi_minus, 1e-9).unwrap_err(),
            StateError::DimensionMismatch { left: 1, right: 2 }
        );
        assert!(inner_product(&psi_minus, &one).is_err());
    }

    #[test]
    fn inner_products() {
        let phi_minus = bell_state(BellLabel::PhiMinus);
        assert!(close(inner_product(&phi_minus, &phi_minus).unwrap().re, 1.0));
        let ip = inner_product(&bell_state(BellLabel::PhiPlus), &bell_state(BellLabel::PsiPlus)).unwrap();
        assert!(close(ip.abs(), 0.0));
    }

    #[test]
    fn z_measurement_of_entangled_qubit_collapses_to_product() {
        let phi = bell_state(BellLabel::PhiPlus);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (outcome, post) = measure_qubit(&phi, Side::A, Basis::Computational, &mut rng).unwrap();
            let expected = match outcome {
                SingleQubitState::Zero => StateVector::basis_state(2, 0b00).unwrap(),
                SingleQubitState::One => StateVector::basis_state(2, 0b11).unwrap(),
                other => panic!("unexpected {other}"),
            };
            assert!(equal_up_to_phase(&post, &expected, 1e-12).unwrap());
        }
    }

    #[test]
    fn canonical_phase_and_display() {
        let s = bell_state(BellLabel::PsiMinus).with_global_phase(-Amplitude::ONE);
        let c = s.canonical();
        assert!(c.amplitudes()[1].re > 0.0);
        assert_eq!(alloc::format!("{s}"), "0.7071|01⟩ + -0.7071|10⟩");
    }

    #[test]
    fn constructor_validation() {
        assert!(matches!(StateVector::from_real(&[1.0, 1.0]), Err(StateError::NotNormalized(_))));
        assert_eq!(StateVector::from_real(&[1.0, 0.0, 0.0]), Err(StateError::BadLength(3)));
        assert_eq!(StateVector::from_real(&[f64::NAN, 0.0]), Err(StateError::NonFinite));
    }

    #[test]
    fn label_parsing() {
        for l in BellLabel::ALL {
            assert_eq!(l.name().parse::<BellLabel>().unwrap(), l);
            assert_eq!(l.symbol().parse::<BellLabel>().unwrap(), l);
        }
        assert!("chi+".parse::<BellLabel>().is_err());
    }
}
