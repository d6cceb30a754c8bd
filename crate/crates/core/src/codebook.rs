//! Encoding and decoding tables.
//!
//! Every table here is computed from the state engine (apply the operator,
//! read off the resulting label), never hard-coded. The printed reference
//! copies used for conformance checks live in [`crate::reference`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::qstate::{
    apply_pauli, bell_label_of, bell_state, inner_product, Amplitude, BellLabel, PauliOp, Side,
    StateError, StateVector, DEFAULT_PHASE_TOLERANCE, FRAC_1_SQRT_2, NORM_TOLERANCE,
};

/// Default tolerance for [`classify_generalized`].
pub const CLASSIFICATION_TOLERANCE: f64 = 1e-9;

/// Row order of the controlled-protocol decode table.
pub const TABLE1_ROWS: [BellLabel; 4] = [
    BellLabel::PhiPlus,
    BellLabel::PsiPlus,
    BellLabel::PsiMinus,
    BellLabel::PhiMinus,
];

/// Message column order shared by the controlled-protocol tables.
pub const MESSAGE_COLUMNS: [TwoBitMessage; 4] = [
    TwoBitMessage::M00,
    TwoBitMessage::M10,
    TwoBitMessage::M11,
    TwoBitMessage::M01,
];

/// Row order of the generalized-state table.
pub const TABLE2_ROWS: [GeneralizedLabel; 4] = [
    GeneralizedLabel::OmegaPlus,
    GeneralizedLabel::ChiPlus,
    GeneralizedLabel::ChiMinus,
    GeneralizedLabel::OmegaMinus,
];

/// Initial-state column order of the controller-independent table.
pub const TABLE3_COLUMNS: [BellLabel; 4] = BellLabel::ALL;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodebookError {
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    AlphaOutOfRange(f64),
    #[error("alpha^2 + beta^2 = {0}, expected 1")]
    NotNormalized(f64),
    #[error("beta must be non-negative, got {0}")]
    NegativeBeta(f64),
    #[error(transparent)]
    State(#[from] StateError),
}

/// A two-bit secret message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TwoBitMessage(u8);

impl TwoBitMessage {
    pub const M00: TwoBitMessage = TwoBitMessage(0b00);
    pub const M01: TwoBitMessage = TwoBitMessage(0b01);
    pub const M10: TwoBitMessage = TwoBitMessage(0b10);
    pub const M11: TwoBitMessage = TwoBitMessage(0b11);

    /// Numeric order 00, 01, 10, 11.
    pub const ALL: [TwoBitMessage; 4] = [Self::M00, Self::M01, Self::M10, Self::M11];

    pub fn new(bits: u8) -> Option<Self> {
        (bits < 4).then_some(Self(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }
}

impl fmt::Display for TwoBitMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02b}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid two-bit message `{0}` (expected 00, 01, 10 or 11)")]
pub struct ParseMessageError(pub String);

impl FromStr for TwoBitMessage {
    type Err = ParseMessageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "00" => Ok(Self::M00),
            "01" => Ok(Self::M01),
            "10" => Ok(Self::M10),
            "11" => Ok(Self::M11),
            _ => Err(ParseMessageError(s.into())),
        }
    }
}

pub fn message_to_op(msg: TwoBitMessage) -> PauliOp {
    match msg.0 {
        0b00 => PauliOp::I,
        0b01 => PauliOp::Z,
        0b10 => PauliOp::X,
        _ => PauliOp::IY,
    }
}

pub fn op_to_message(op: PauliOp) -> TwoBitMessage {
    match op {
        PauliOp::I => TwoBitMessage::M00,
        PauliOp::Z => TwoBitMessage::M01,
        PauliOp::X => TwoBitMessage::M10,
        PauliOp::IY => TwoBitMessage::M11,
    }
}

/// Label of `bell_state(initial)` after `msg` is encoded on `side`.
pub fn encode_label(initial: BellLabel, msg: TwoBitMessage, side: Side) -> BellLabel {
    let encoded = apply_pauli(&bell_state(initial), message_to_op(msg), side)
        .expect("Bell states are two-qubit");
    bell_label_of(&encoded, DEFAULT_PHASE_TOLERANCE)
        .expect("Pauli operators permute the Bell basis")
        .expect("Pauli operators permute the Bell basis")
}

/// Recovers the partner's message from the announced initial state and the
/// Bell measurement result.
pub fn chang_decode(initial: BellLabel, measured: BellLabel) -> TwoBitMessage {
    TwoBitMessage::ALL
        .into_iter()
        .find(|&m| encode_label(initial, m, Side::A) == measured)
        .expect("every (initial, measured) pair decodes")
}

/// Initial state a receiver must prepare so that `msg` maps it onto the
/// announced label `announced`.
pub fn ci_select_initial(announced: BellLabel, msg: TwoBitMessage) -> BellLabel {
    BellLabel::ALL
        .into_iter()
        .find(|&b| encode_label(b, msg, Side::A) == announced)
        .expect("each Pauli acts as a permutation of Bell labels")
}

/// Message that maps `initial` onto `announced`.
pub fn ci_decode(announced: BellLabel, initial: BellLabel) -> TwoBitMessage {
    TwoBitMessage::ALL
        .into_iter()
        .find(|&m| encode_label(initial, m, Side::A) == announced)
        .expect("every (announced, initial) pair decodes")
}

/// Dense rectangular table with keyed rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookTable<R, C, E> {
    rows: Vec<R>,
    cols: Vec<C>,
    cells: Vec<E>,
}

impl<R: PartialEq, C: PartialEq, E> CodebookTable<R, C, E> {
    pub fn build(rows: &[R], cols: &[C], mut f: impl FnMut(&R, &C) -> E) -> Self
    where
        R: Clone,
        C: Clone,
    {
        let mut cells = Vec::with_capacity(rows.len() * cols.len());
        for r in rows {
            for c in cols {
                cells.push(f(r, c));
            }
        }
        Self {
            rows: rows.to_vec(),
            cols: cols.to_vec(),
            cells,
        }
    }

    pub fn row_keys(&self) -> &[R] {
        &self.rows
    }

    pub fn col_keys(&self) -> &[C] {
        &self.cols
    }

    pub fn cell(&self, row: usize, col: usize) -> &E {
        &self.cells[row * self.cols.len() + col]
    }

    pub fn get(&self, row: &R, col: &C) -> Option<&E> {
        let r = self.rows.iter().position(|k| k == row)?;
        let c = self.cols.iter().position(|k| k == col)?;
        Some(self.cell(r, c))
    }

    pub fn row(&self, row: usize) -> &[E] {
        let w = self.cols.len();
        &self.cells[row * w..(row + 1) * w]
    }

    pub fn cells(&self) -> &[E] {
        &self.cells
    }
}

pub type Table1 = CodebookTable<BellLabel, TwoBitMessage, BellLabel>;
pub type Table2 = CodebookTable<GeneralizedLabel, TwoBitMessage, Table2Cell>;
pub type Table3 = CodebookTable<TwoBitMessage, BellLabel, BellLabel>;

/// Initial state × message → measured label, computed from the operators.
pub fn build_table1() -> Table1 {
    CodebookTable::build(&TABLE1_ROWS, &MESSAGE_COLUMNS, |&is, &msg| {
        encode_label(is, msg, Side::A)
    })
}

/// Message × initial state → announced label, computed with the encoding on
/// `side`.
pub fn build_table3_for(side: Side) -> Table3 {
    CodebookTable::build(&TwoBitMessage::ALL, &TABLE3_COLUMNS, |&msg, &is| {
        encode_label(is, msg, side)
    })
}

pub fn build_table3() -> Table3 {
    build_table3_for(Side::A)
}

/// Amplitude pair of the non-maximally entangled family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedParams {
    alpha: f64,
    beta: f64,
}

impl GeneralizedParams {
    /// `beta = sqrt(1 − alpha²)`; requires `0 < alpha < 1`.
    pub fn new(alpha: f64) -> Result<Self, CodebookError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CodebookError::AlphaOutOfRange(alpha));
        }
        Ok(Self {
            alpha,
            beta: libm::sqrt(1.0 - alpha * alpha),
        })
    }

    pub fn from_pair(alpha: f64, beta: f64) -> Result<Self, CodebookError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CodebookError::AlphaOutOfRange(alpha));
        }
        if beta.is_nan() || beta < 0.0 {
            return Err(CodebookError::NegativeBeta(beta));
        }
        let n = alpha * alpha + beta * beta;
        if libm::fabs(n - 1.0) > NORM_TOLERANCE {
            return Err(CodebookError::NotNormalized(n));
        }
        Ok(Self { alpha, beta })
    }

    /// `alpha = beta = 1/√2`.
    pub fn maximal() -> Self {
        Self {
            alpha: FRAC_1_SQRT_2,
            beta: FRAC_1_SQRT_2,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GeneralizedLabel {
    OmegaPlus,
    OmegaMinus,
    ChiPlus,
    ChiMinus,
}

impl GeneralizedLabel {
    pub const ALL: [GeneralizedLabel; 4] = [
        GeneralizedLabel::OmegaPlus,
        GeneralizedLabel::OmegaMinus,
        GeneralizedLabel::ChiPlus,
        GeneralizedLabel::ChiMinus,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            GeneralizedLabel::OmegaPlus => "ω+",
            GeneralizedLabel::OmegaMinus => "ω-",
            GeneralizedLabel::ChiPlus => "χ+",
            GeneralizedLabel::ChiMinus => "χ-",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GeneralizedLabel::OmegaPlus => "omega+",
            GeneralizedLabel::OmegaMinus => "omega-",
            GeneralizedLabel::ChiPlus => "chi+",
            GeneralizedLabel::ChiMinus => "chi-",
        }
    }

    /// The Bell label this state becomes at `alpha = beta`.
    pub fn bell_counterpart(self) -> BellLabel {
        match self {
            GeneralizedLabel::OmegaPlus => BellLabel::PhiPlus,
            GeneralizedLabel::OmegaMinus => BellLabel::PhiMinus,
            GeneralizedLabel::ChiPlus => BellLabel::PsiPlus,
            GeneralizedLabel::ChiMinus => BellLabel::PsiMinus,
        }
    }
}

impl fmt::Display for GeneralizedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `ω± = α|00⟩ ± β|11⟩`, `χ± = α|01⟩ ± β|10⟩`.
pub fn generalized_state(label: GeneralizedLabel, params: &GeneralizedParams) -> StateVector {
    let (a, b) = (params.alpha, params.beta);
    let amps = match label {
        GeneralizedLabel::OmegaPlus => [a, 0.0, 0.0, b],
        GeneralizedLabel::OmegaMinus => [a, 0.0, 0.0, -b],
        GeneralizedLabel::ChiPlus => [0.0, a, b, 0.0],
        GeneralizedLabel::ChiMinus => [0.0, a, -b, 0.0],
    };
    StateVector::from_parts(2, amps.map(Amplitude::real))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn prefix(self) -> &'static str {
        match self {
            Sign::Plus => "",
            Sign::Minus => "-",
        }
    }
}

/// Result of matching a state against the generalized family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub matched: Option<(Sign, GeneralizedLabel)>,
    /// `1 − max |⟨label|ψ⟩|` over the four labels.
    pub residual: f64,
}

impl Classification {
    pub fn label(&self) -> Option<GeneralizedLabel> {
        self.matched.map(|(_, l)| l)
    }
}

pub fn classify_generalized(
    state: &StateVector,
    params: &GeneralizedParams,
    tol: f64,
) -> Result<Classification, StateError> {
    if state.num_qubits() != 2 {
        return Err(StateError::QubitCount {
            expected: 2,
            found: state.num_qubits(),
        });
    }
    let mut best: Option<(GeneralizedLabel, Amplitude)> = None;
    for label in GeneralizedLabel::ALL {
        let ip = inner_product(&generalized_state(label, params), state)?;
        if best.is_none_or(|(_, b)| ip.abs() > b.abs()) {
            best = Some((label, ip));
        }
    }
    let (label, ip) = best.expect("four candidates");
    let residual = 1.0 - ip.abs();
    let matched = (residual <= tol).then(|| {
        let sign = if ip.re >= 0.0 { Sign::Plus } else { Sign::Minus };
        (sign, label)
    });
    Ok(Classification { matched, residual })
}

/// One cell of the generalized-state table. `side_b` is the encoding seen
/// in Alice's measurement result (Bob encodes his particle); `side_a` is the
/// mirrored encoding on Alice's particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table2Cell {
    pub side_b: Classification,
    pub side_a: Classification,
    pub side_b_state: StateVector,
    pub side_a_state: StateVector,
}

pub fn build_table2(params: &GeneralizedParams) -> Table2 {
    build_table2_with_tol(params, CLASSIFICATION_TOLERANCE)
}

pub fn build_table2_with_tol(params: &GeneralizedParams, tol: f64) -> Table2 {
    CodebookTable::build(&TABLE2_ROWS, &MESSAGE_COLUMNS, |&row, &msg| {
        let initial = generalized_state(row, params);
        let op = message_to_op(msg);
        let side_b_state = apply_pauli(&initial, op, Side::B).expect("two-qubit state");
        let side_a_state = apply_pauli(&initial, op, Side::A).expect("two-qubit state");
        Table2Cell {
            side_b: classify_generalized(&side_b_state, params, tol).expect("two-qubit state"),
            side_a: classify_generalized(&side_a_state, params, tol).expect("two-qubit state"),
            side_b_state,
            side_a_state,
        }
    })
}

/// Symbolic rendering of a classified state: `-|χ-⟩` when it matches a
/// family member, otherwise a ket expansion in α and β such as
/// `-α|10⟩ + β|01⟩`. Falls back to decimals when a coefficient is neither.
pub fn symbolic(class: &Classification, state: &StateVector, params: &GeneralizedParams) -> String {
    if let Some((sign, label)) = class.matched {
        return format!("{}|{}⟩", sign.prefix(), label.symbol());
    }
    let mut alpha_terms = Vec::new();
    let mut beta_terms = Vec::new();
    let mut other_terms = Vec::new();
    for (i, amp) in state.amplitudes().iter().enumerate() {
        if amp.abs() < 1e-12 {
            continue;
        }
        let negative = amp.re < 0.0;
        let ket = format!("|{}{}⟩", i >> 1, i & 1);
        let mag = amp.abs();
        if libm::fabs(mag - params.alpha) < 1e-9 {
            alpha_terms.push((negative, format!("α{ket}")));
        } else if libm::fabs(mag - params.beta) < 1e-9 {
            beta_terms.push((negative, format!("β{ket}")));
        } else {
            other_terms.push((negative, format!("{mag:.6}{ket}")));
        }
    }
    let mut out = String::new();
    for (k, (negative, term)) in alpha_terms
        .into_iter()
        .chain(beta_terms)
        .chain(other_terms)
        .enumerate()
    {
        match (k, negative) {
            (0, true) => out.push('-'),
            (0, false) => {}
            (_, true) => out.push_str(" - "),
            (_, false) => out.push_str(" + "),
        }
        out.push_str(&term);
    }
    out
}

/// Whether both encoding sides classify every (initial state, message) cell
/// to the same family member, ignoring sign.
pub fn executable(params: &GeneralizedParams, tol: f64) -> bool {
    build_table2_with_tol(params, tol).cells().iter().all(|c| {
        matches!((c.side_a.label(), c.side_b.label()), (Some(a), Some(b)) if a == b)
    })
}

/// Largest classification residual over both sides of every cell.
pub fn worst_residual(params: &GeneralizedParams) -> f64 {
    build_table2(params)
        .cells()
        .iter()
        .flat_map(|c| [c.side_a.residual, c.side_b.residual])
        .fold(0.0, f64::max)
}

/// Grid points at which the protocol is executable.
pub fn executability_sweep(grid: &[f64], tol: f64) -> Result<Vec<f64>, CodebookError> {
    let mut out = Vec::new();
    for &alpha in grid {
        let params = GeneralizedParams::new(alpha)?;
        if executable(&params, tol) {
            out.push(alpha);
        }
    }
    Ok(out)
}
