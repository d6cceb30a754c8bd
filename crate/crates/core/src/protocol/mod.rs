//! Party state machines for the controlled (three-party) protocol and the
//! controller-independent (two-party) protocol.
//!
//! Message routing in the controlled protocol: of the `n` message pairs, the
//! first `n/2` carry Alice's messages (she encodes her particle and sends it
//! to Bob, who Bell-measures the whole pair) and the last `n/2` carry Bob's
//! messages in the opposite direction.

mod checks;
mod transcript;

pub use checks::{
    correlation_check, decoy_check, echo_check, insert_decoys, strip_decoys, CheckReport,
    CorrelationSample, DecoyRecord, Half, Slot,
};
pub use transcript::{Actor, Event, EventKind, Transcript, Visibility};

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::adversary::{intercept_pair_half, intercept_resend, BasisPolicy, LiePolicy, Links};
use crate::codebook::{chang_decode, ci_decode, ci_select_initial, message_to_op, TwoBitMessage};
use crate::qstate::{
    apply_pauli, bell_label_of, bell_measure, bell_state, BellLabel, PauliOp, Side, StateError,
    StateVector, DEFAULT_PHASE_TOLERANCE,
};
use crate::streams::{stream, Stream};

pub const DEFAULT_ERROR_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    /// Three-party protocol where Charlie controls the initial states.
    Chang,
    /// Two-party protocol where each communicant picks its own initial state.
    ControllerIndependent,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Chang => "chang",
            Protocol::ControllerIndependent => "ci",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    CharlieToAlice,
    CharlieToBob,
    AliceToBob,
    BobToAlice,
}

impl Link {
    pub const ALL: [Link; 4] = [
        Link::CharlieToAlice,
        Link::CharlieToBob,
        Link::AliceToBob,
        Link::BobToAlice,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Link::CharlieToAlice => "charlie-alice",
            Link::CharlieToBob => "charlie-bob",
            Link::AliceToBob => "alice-bob",
            Link::BobToAlice => "bob-alice",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    AliceToBob,
    BobToAlice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckKind {
    /// Alice with Charlie, before Bob's particles leave Charlie.
    First,
    /// Alice with Bob, after both sequences arrived.
    Second,
    DecoyAliceToBob,
    DecoyBobToAlice,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::First => "first",
            CheckKind::Second => "second",
            CheckKind::DecoyAliceToBob => "decoy-alice-bob",
            CheckKind::DecoyBobToAlice => "decoy-bob-alice",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AbortReason {
    FirstCheckFailed,
    SecondCheckFailed,
    DecoyCheckFailed,
    EchoMismatch,
}

impl AbortReason {
    pub fn name(self) -> &'static str {
        match self {
            AbortReason::FirstCheckFailed => "first-check-failed",
            AbortReason::SecondCheckFailed => "second-check-failed",
            AbortReason::DecoyCheckFailed => "decoy-check-failed",
            AbortReason::EchoMismatch => "echo-mismatch",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("n must be a positive even number of message pairs, got {0}")]
    PairCount(usize),
    #[error("threshold must lie in [0, 1], got {0}")]
    Threshold(f64),
}

impl ConfigError {
    /// Name of the offending configuration field.
    pub fn field(&self) -> &'static str {
        match self {
            ConfigError::PairCount(_) => "n",
            ConfigError::Threshold(_) => "threshold",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{party} supplied {found} messages, expected {expected}")]
    MessageCount {
        party: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{found} initial states supplied, expected n + l + d = {expected}")]
    InitialStateCount { expected: usize, found: usize },
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionConfig {
    /// Message-carrying pairs, split evenly between the two directions.
    pub n: usize,
    /// Pairs sacrificed in the first security check.
    pub l: usize,
    /// Pairs sacrificed in the second security check.
    pub d: usize,
    /// Decoys per transmitted sequence.
    pub decoy_count: usize,
    pub error_threshold: f64,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            n: 2,
            l: 4,
            d: 4,
            decoy_count: 8,
            error_threshold: DEFAULT_ERROR_THRESHOLD,
            seed: 0,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 || !self.n.is_multiple_of(2) {
            return Err(ConfigError::PairCount(self.n));
        }
        if !(0.0..=1.0).contains(&self.error_threshold) {
            return Err(ConfigError::Threshold(self.error_threshold));
        }
        Ok(())
    }

    pub fn total_pairs(&self) -> usize {
        self.n + self.l + self.d
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControllerBehavior {
    Honest,
    Lying(LiePolicy),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eavesdropper {
    pub policy: BasisPolicy,
    pub links: Links,
}

/// Everything between the honest parties: quantum links, the controller and
/// the classical echo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub eavesdropper: Option<Eavesdropper>,
    pub controller: ControllerBehavior,
    /// Replaces the label Bob echoes back in the two-party protocol.
    pub forged_echo: Option<BellLabel>,
}

impl ChannelModel {
    pub const IDEAL: ChannelModel = ChannelModel {
        eavesdropper: None,
        controller: ControllerBehavior::Honest,
        forged_echo: None,
    };

    fn tap(&self, link: Link) -> Option<BasisPolicy> {
        self.eavesdropper
            .filter(|e| e.links.contains(link))
            .map(|e| e.policy)
    }
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self::IDEAL
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRecord {
    pub index: usize,
    pub initial_label: BellLabel,
    /// `None` for pairs consumed by a correlation check.
    pub direction: Option<Direction>,
    pub joint_state: StateVector,
    pub applied_op: Option<PauliOp>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub protocol: Protocol,
    pub aborted: Option<AbortReason>,
    /// Bob's messages as recovered by Alice.
    pub decoded_by_alice: Vec<TwoBitMessage>,
    /// Alice's messages as recovered by Bob.
    pub decoded_by_bob: Vec<TwoBitMessage>,
    pub checks: Vec<CheckReport>,
    pub pairs: Vec<PairRecord>,
    /// Particles the eavesdropper measured.
    pub intercepted: usize,
    pub transcript: Transcript,
}

impl SessionOutcome {
    pub fn is_aborted(&self) -> bool {
        self.aborted.is_some()
    }

    pub fn check(&self, kind: CheckKind) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.kind == kind)
    }

    /// Bell-measurement results logged by `actor`, in logging order.
    pub fn measured_by(&self, actor: Actor) -> Vec<BellLabel> {
        self.transcript
            .events()
            .iter()
            .filter(|e| e.actor == actor)
            .filter_map(|e| match e.kind {
                EventKind::BellMeasure { label, .. } => Some(label),
                _ => None,
            })
            .collect()
    }

    /// Label Alice announced in the two-party protocol.
    pub fn announced_result(&self) -> Option<BellLabel> {
        self.transcript.events().iter().find_map(|e| match e.kind {
            EventKind::AnnounceResult { label } => Some(label),
            _ => None,
        })
    }

    pub fn echo_delta(&self) -> Option<u8> {
        self.transcript.events().iter().find_map(|e| match e.kind {
            EventKind::EchoCheck { delta } => Some(delta),
            _ => None,
        })
    }

    pub fn bob_initial(&self) -> Option<BellLabel> {
        self.transcript.events().iter().find_map(|e| match e.kind {
            EventKind::SelectInitial { label } => Some(label),
            _ => None,
        })
    }
}

struct Session {
    cfg: SessionConfig,
    protocol: Protocol,
    transcript: Transcript,
    checks: Vec<CheckReport>,
    intercepted: usize,
}

impl Session {
    fn new(cfg: SessionConfig, protocol: Protocol) -> Self {
        Self {
            cfg,
            protocol,
            transcript: Transcript::new(),
            checks: Vec::new(),
            intercepted: 0,
        }
    }

    fn log(&mut self, step: u8, actor: Actor, kind: EventKind) {
        self.transcript.push(step, actor, kind);
    }

    fn finish(
        mut self,
        aborted: Option<AbortReason>,
        step: u8,
        actor: Actor,
        pairs: Vec<PairRecord>,
        decoded: (Vec<TwoBitMessage>, Vec<TwoBitMessage>),
    ) -> SessionOutcome {
        let (decoded_by_alice, decoded_by_bob) = match aborted {
            Some(reason) => {
                self.log(step, actor, EventKind::Abort { reason });
                (Vec::new(), Vec::new())
            }
            None => decoded,
        };
        SessionOutcome {
            protocol: self.protocol,
            aborted,
            decoded_by_alice,
            decoded_by_bob,
            checks: self.checks,
            pairs,
            intercepted: self.intercepted,
            transcript: self.transcript,
        }
    }

    /// Sends `seq` over `link`, letting a tapping eavesdropper measure and
    /// resend every particle, decoys included.
    #[allow(clippy::too_many_arguments)]
    fn transmit<R: Rng>(
        &mut self,
        step: u8,
        from: Actor,
        link: Link,
        seq: &mut [Slot<Half>],
        states: &mut [StateVector],
        channel: &ChannelModel,
        eve: &mut R,
    ) -> Result<(), StateError> {
        self.log(step, from, EventKind::Transmit { link, items: seq.len() });
        let Some(policy) = channel.tap(link) else {
            return Ok(());
        };
        for slot in seq.iter_mut() {
            match slot {
                Slot::Payload(h) => {
                    let (post, _) = intercept_pair_half(&states[h.pair], h.side, policy, eve)?;
                    states[h.pair] = post;
                }
                Slot::Decoy(s) => {
                    *s = intercept_resend(s, policy, eve)?.0;
                }
            }
            self.intercepted += 1;
        }
        Ok(())
    }

    /// Sender announces positions and bases, receiver measures and
    /// announces outcomes, sender publishes the error rate.
    #[allow(clippy::too_many_arguments)]
    fn run_decoy_check<R: Rng>(
        &mut self,
        step: u8,
        kind: CheckKind,
        sender: Actor,
        receiver: Actor,
        received: &[Slot<Half>],
        records: &mut [DecoyRecord],
        receiver_rng: &mut R,
    ) -> Result<bool, StateError> {
        if !records.is_empty() {
            self.log(
                step,
                sender,
                EventKind::DecoyAnnounce {
                    check: kind,
                    positions: records.iter().map(|r| r.position).collect(),
                    bases: records.iter().map(|r| r.prepared.basis()).collect(),
                },
            );
        }
        let report = decoy_check(kind, received, records, self.cfg.error_threshold, receiver_rng)?;
        if !records.is_empty() {
            self.log(
                step,
                receiver,
                EventKind::DecoyOutcomes {
                    check: kind,
                    outcomes: records
                        .iter()
                        .map(|r| r.measured.unwrap_or(r.prepared.flip()))
                        .collect(),
                },
            );
            self.log(
                step,
                sender,
                EventKind::CheckResult {
                    check: kind,
                    errors: report.errors,
                    total: report.total,
                    pass: report.pass,
                },
            );
        }
        self.checks.push(report);
        Ok(report.pass)
    }
}

fn sequence_of(pairs: &[usize], side: Side) -> Vec<Half> {
    pairs.iter().map(|&pair| Half { pair, side }).collect()
}

/// Runs the controlled protocol end to end.
///
/// `is_choices` gives Charlie's initial state for each of the `n + l + d`
/// pairs; `msgs_alice` and `msgs_bob` hold `n/2` messages each.
pub fn run_chang_session(
    cfg: &SessionConfig,
    msgs_alice: &[TwoBitMessage],
    msgs_bob: &[TwoBitMessage],
    is_choices: &[BellLabel],
    channel: &ChannelModel,
) -> Result<SessionOutcome, SessionError> {
    cfg.validate()?;
    let half = cfg.n / 2;
    for (party, msgs) in [("alice", msgs_alice), ("bob", msgs_bob)] {
        if msgs.len() != half {
            return Err(SessionError::MessageCount {
                party,
                expected: half,
                found: msgs.len(),
            });
        }
    }
    let total = cfg.total_pairs();
    if is_choices.len() != total {
        return Err(SessionError::InitialStateCount {
            expected: total,
            found: is_choices.len(),
        });
    }

    let mut sampling = stream(cfg.seed, Stream::CheckSampling);
    let mut basis_rng = stream(cfg.seed, Stream::CheckBasis);
    let mut alice_rng = stream(cfg.seed, Stream::AliceMeasure);
    let mut bob_rng = stream(cfg.seed, Stream::BobMeasure);
    let mut charlie_rng = stream(cfg.seed, Stream::CharlieMeasure);
    let mut alice_decoys = stream(cfg.seed, Stream::AliceDecoys);
    let mut bob_decoys = stream(cfg.seed, Stream::BobDecoys);
    let mut eve = stream(cfg.seed, Stream::Eavesdropper);
    let mut controller_rng = stream(cfg.seed, Stream::Controller);

    let mut s = Session::new(*cfg, Protocol::Chang);
    let mut states: Vec<StateVector> = is_choices.iter().map(|&l| bell_state(l)).collect();
    let mut records: Vec<PairRecord> = is_choices
        .iter()
        .enumerate()
        .map(|(index, &initial_label)| PairRecord {
            index,
            initial_label,
            direction: None,
            joint_state: bell_state(initial_label),
            applied_op: None,
        })
        .collect();
    let snapshot = |records: &mut Vec<PairRecord>, states: &[StateVector]| {
        for (r, st) in records.iter_mut().zip(states) {
            r.joint_state = *st;
        }
    };

    // Step 1: Charlie prepares all pairs and sends the A particles to Alice.
    s.log(
        1,
        Actor::Charlie,
        EventKind::PreparePairs {
            first: 0,
            labels: is_choices.to_vec(),
        },
    );
    let all: Vec<usize> = (0..total).collect();
    let mut seq_a: Vec<Slot<Half>> = sequence_of(&all, Side::A).into_iter().map(Slot::Payload).collect();
    s.transmit(1, Actor::Charlie, Link::CharlieToAlice, &mut seq_a, &mut states, channel, &mut eve)?;

    // Step 2: Alice confirms and runs the first check with Charlie.
    s.log(2, Actor::Alice, EventKind::Confirm);
    let mut first: Vec<usize> = index::sample(&mut sampling, total, cfg.l).into_vec();
    first.sort_unstable();
    let passed = run_correlation(
        &mut s,
        2,
        CheckKind::First,
        (Actor::Charlie, Actor::Alice, Actor::Charlie),
        &first,
        is_choices,
        &mut states,
        (&mut basis_rng, &mut alice_rng, &mut charlie_rng),
    )?;
    if !passed {
        snapshot(&mut records, &states);
        return Ok(s.finish(Some(AbortReason::FirstCheckFailed), 2, Actor::Alice, records, Default::default()));
    }

    // Step 3: Charlie sends the surviving B particles to Bob; second check.
    let remaining: Vec<usize> = all.iter().copied().filter(|i| first.binary_search(i).is_err()).collect();
    let mut seq_b: Vec<Slot<Half>> = sequence_of(&remaining, Side::B).into_iter().map(Slot::Payload).collect();
    s.transmit(3, Actor::Charlie, Link::CharlieToBob, &mut seq_b, &mut states, channel, &mut eve)?;
    s.log(3, Actor::Bob, EventKind::Confirm);
    let mut second: Vec<usize> = index::sample(&mut sampling, remaining.len(), cfg.d)
        .into_iter()
        .map(|k| remaining[k])
        .collect();
    second.sort_unstable();
    let passed = run_correlation(
        &mut s,
        3,
        CheckKind::Second,
        (Actor::Alice, Actor::Bob, Actor::Alice),
        &second,
        is_choices,
        &mut states,
        (&mut basis_rng, &mut alice_rng, &mut bob_rng),
    )?;
    if !passed {
        snapshot(&mut records, &states);
        return Ok(s.finish(Some(AbortReason::SecondCheckFailed), 3, Actor::Alice, records, Default::default()));
    }

    // Step 4: encode, interleave decoys, exchange, check decoys.
    let message_pairs: Vec<usize> = remaining
        .iter()
        .copied()
        .filter(|i| second.binary_search(i).is_err())
        .collect();
    let (alice_pairs, bob_pairs) = message_pairs.split_at(half);
    for (p, msg) in alice_pairs.iter().zip(msgs_alice) {
        let op = message_to_op(*msg);
        states[*p] = apply_pauli(&states[*p], op, Side::A)?;
        records[*p].direction = Some(Direction::AliceToBob);
        records[*p].applied_op = Some(op);
    }
    s.log(
        4,
        Actor::Alice,
        EventKind::Encode {
            pairs: alice_pairs.to_vec(),
            ops: msgs_alice.iter().map(|m| message_to_op(*m)).collect(),
        },
    );
    for (p, msg) in bob_pairs.iter().zip(msgs_bob) {
        let op = message_to_op(*msg);
        states[*p] = apply_pauli(&states[*p], op, Side::B)?;
        records[*p].direction = Some(Direction::BobToAlice);
        records[*p].applied_op = Some(op);
    }
    s.log(
        4,
        Actor::Bob,
        EventKind::Encode {
            pairs: bob_pairs.to_vec(),
            ops: msgs_bob.iter().map(|m| message_to_op(*m)).collect(),
        },
    );

    let (mut out_a, mut recs_a) = insert_decoys(sequence_of(alice_pairs, Side::A), cfg.decoy_count, &mut alice_decoys);
    log_decoy_insert(&mut s, 4, Actor::Alice, CheckKind::DecoyAliceToBob, &recs_a);
    let (mut out_b, mut recs_b) = insert_decoys(sequence_of(bob_pairs, Side::B), cfg.decoy_count, &mut bob_decoys);
    log_decoy_insert(&mut s, 4, Actor::Bob, CheckKind::DecoyBobToAlice, &recs_b);
    s.transmit(4, Actor::Alice, Link::AliceToBob, &mut out_a, &mut states, channel, &mut eve)?;
    s.transmit(4, Actor::Bob, Link::BobToAlice, &mut out_b, &mut states, channel, &mut eve)?;
    let ok_a = s.run_decoy_check(4, CheckKind::DecoyAliceToBob, Actor::Alice, Actor::Bob, &out_a, &mut recs_a, &mut bob_rng)?;
    let ok_b = s.run_decoy_check(4, CheckKind::DecoyBobToAlice, Actor::Bob, Actor::Alice, &out_b, &mut recs_b, &mut alice_rng)?;
    snapshot(&mut records, &states);
    if !(ok_a && ok_b) {
        return Ok(s.finish(Some(AbortReason::DecoyCheckFailed), 4, Actor::Alice, records, Default::default()));
    }

    // Step 5: Bell measurements, Charlie's announcement, decoding.
    let mut mr_b = Vec::with_capacity(half);
    for &h in strip_decoys(&out_a).iter() {
        let (label, _) = bell_measure(&states[h.pair], &mut bob_rng)?;
        s.log(5, Actor::Bob, EventKind::BellMeasure { pair: h.pair, label });
        mr_b.push(label);
    }
    let mut mr_a = Vec::with_capacity(half);
    for &h in strip_decoys(&out_b).iter() {
        let (label, _) = bell_measure(&states[h.pair], &mut alice_rng)?;
        s.log(5, Actor::Alice, EventKind::BellMeasure { pair: h.pair, label });
        mr_a.push(label);
    }
    let announced: Vec<BellLabel> = message_pairs
        .iter()
        .map(|&p| match channel.controller {
            ControllerBehavior::Honest => is_choices[p],
            ControllerBehavior::Lying(policy) => policy.lie(is_choices[p], &mut controller_rng),
        })
        .collect();
    s.log(
        5,
        Actor::Charlie,
        EventKind::AnnounceInitial {
            pairs: message_pairs.clone(),
            labels: announced.clone(),
        },
    );
    let (ann_a, ann_b) = announced.split_at(half);
    let mut by_bob = Vec::with_capacity(half);
    for ((&p, &is), &mr) in alice_pairs.iter().zip(ann_a).zip(&mr_b) {
        let message = chang_decode(is, mr);
        s.log(5, Actor::Bob, EventKind::Decode { pair: p, message });
        by_bob.push(message);
    }
    let mut by_alice = Vec::with_capacity(half);
    for ((&p, &is), &mr) in bob_pairs.iter().zip(ann_b).zip(&mr_a) {
        let message = chang_decode(is, mr);
        s.log(5, Actor::Alice, EventKind::Decode { pair: p, message });
        by_alice.push(message);
    }
    Ok(s.finish(None, 5, Actor::Alice, records, (by_alice, by_bob)))
}

fn log_decoy_insert(s: &mut Session, step: u8, actor: Actor, check: CheckKind, recs: &[DecoyRecord]) {
    if recs.is_empty() {
        return;
    }
    s.log(
        step,
        actor,
        EventKind::DecoyInsert {
            check,
            positions: recs.iter().map(|r| r.position).collect(),
            states: recs.iter().map(|r| r.prepared).collect(),
        },
    );
}

/// Correlation check on `sample`; `roles` is (basis announcer, party
/// announcing outcomes, evaluator). The Alice-side holder always measures
/// with the first measurement stream.
#[allow(clippy::too_many_arguments)]
fn run_correlation<R1: Rng, R2: Rng, R3: Rng>(
    s: &mut Session,
    step: u8,
    kind: CheckKind,
    roles: (Actor, Actor, Actor),
    sample: &[usize],
    is_choices: &[BellLabel],
    states: &mut [StateVector],
    rngs: (&mut R1, &mut R2, &mut R3),
) -> Result<bool, StateError> {
    let (announcer, reporter, evaluator) = roles;
    let threshold = s.cfg.error_threshold;
    if sample.is_empty() {
        s.checks.push(CheckReport::new(kind, 0, 0, threshold));
        return Ok(true);
    }
    s.log(step, announcer, EventKind::CheckSample { check: kind, positions: sample.to_vec() });
    if kind == CheckKind::Second {
        // Only Charlie knows the initial states; he reveals the sacrificed ones.
        s.log(
            step,
            Actor::Charlie,
            EventKind::CheckLabels {
                check: kind,
                labels: sample.iter().map(|&p| is_choices[p]).collect(),
            },
        );
    }
    let mut pairs: Vec<(BellLabel, StateVector)> = sample.iter().map(|&p| (is_choices[p], states[p])).collect();
    let (report, samples) = correlation_check(kind, &mut pairs, threshold, rngs.0, rngs.1, rngs.2)?;
    for (&p, (_, st)) in sample.iter().zip(&pairs) {
        states[p] = *st;
    }
    s.log(
        step,
        announcer,
        EventKind::CheckBases {
            check: kind,
            bases: samples.iter().map(|c| c.basis).collect(),
        },
    );
    s.log(
        step,
        reporter,
        EventKind::CheckOutcomes {
            check: kind,
            bits: samples.iter().map(|c| c.outcome_a.bit()).collect(),
        },
    );
    s.log(
        step,
        evaluator,
        EventKind::CheckResult {
            check: kind,
            errors: report.errors,
            total: report.total,
            pass: report.pass,
        },
    );
    s.checks.push(report);
    Ok(report.pass)
}

/// Runs the controller-independent protocol for one message per party.
pub fn run_ci_session(
    cfg: &SessionConfig,
    msg_alice: TwoBitMessage,
    msg_bob: TwoBitMessage,
    is_alice: BellLabel,
    channel: &ChannelModel,
) -> Result<SessionOutcome, SessionError> {
    cfg.validate()?;
    let mut alice_rng = stream(cfg.seed, Stream::AliceMeasure);
    let mut bob_rng = stream(cfg.seed, Stream::BobMeasure);
    let mut alice_decoys = stream(cfg.seed, Stream::AliceDecoys);
    let mut bob_decoys = stream(cfg.seed, Stream::BobDecoys);
    let mut eve = stream(cfg.seed, Stream::Eavesdropper);
    let mut s = Session::new(*cfg, Protocol::ControllerIndependent);

    // Step 1: Alice encodes her message on a copy of her pair and announces
    // the resulting label.
    let op_a = message_to_op(msg_alice);
    s.log(1, Actor::Alice, EventKind::PreparePairs { first: 0, labels: alloc::vec![is_alice] });
    let encoded = apply_pauli(&bell_state(is_alice), op_a, Side::A)?;
    let announced = bell_label_of(&encoded, DEFAULT_PHASE_TOLERANCE)?
        .expect("Pauli operators permute the Bell basis");
    s.log(1, Actor::Alice, EventKind::Encode { pairs: alloc::vec![0], ops: alloc::vec![op_a] });
    s.log(1, Actor::Alice, EventKind::AnnounceResult { label: announced });

    // Step 2: Bob picks his initial state from the announced label and his
    // message, then echoes the label.
    let is_bob = ci_select_initial(announced, msg_bob);
    s.log(2, Actor::Bob, EventKind::SelectInitial { label: is_bob });
    s.log(2, Actor::Bob, EventKind::PreparePairs { first: 1, labels: alloc::vec![is_bob] });
    let echoed = channel.forged_echo.unwrap_or(announced);
    s.log(2, Actor::Bob, EventKind::Echo { label: echoed });

    let mut records = alloc::vec![
        PairRecord {
            index: 0,
            initial_label: is_alice,
            direction: Some(Direction::AliceToBob),
            joint_state: bell_state(is_alice),
            applied_op: None,
        },
        PairRecord {
            index: 1,
            initial_label: is_bob,
            direction: Some(Direction::BobToAlice),
            joint_state: bell_state(is_bob),
            applied_op: None,
        },
    ];

    // Step 3: echo check.
    let delta = echo_check(announced, echoed);
    s.log(3, Actor::Alice, EventKind::EchoCheck { delta });
    if delta != 1 {
        return Ok(s.finish(Some(AbortReason::EchoMismatch), 3, Actor::Alice, records, Default::default()));
    }

    // Step 4: exchange the unencoded pairs with decoys, check, measure, decode.
    let mut states = [bell_state(is_alice), bell_state(is_bob)];
    let pair_halves = |pair| alloc::vec![Half { pair, side: Side::A }, Half { pair, side: Side::B }];
    let (mut out_a, mut recs_a) = insert_decoys(pair_halves(0), cfg.decoy_count, &mut alice_decoys);
    log_decoy_insert(&mut s, 4, Actor::Alice, CheckKind::DecoyAliceToBob, &recs_a);
    let (mut out_b, mut recs_b) = insert_decoys(pair_halves(1), cfg.decoy_count, &mut bob_decoys);
    log_decoy_insert(&mut s, 4, Actor::Bob, CheckKind::DecoyBobToAlice, &recs_b);
    s.transmit(4, Actor::Alice, Link::AliceToBob, &mut out_a, &mut states, channel, &mut eve)?;
    s.transmit(4, Actor::Bob, Link::BobToAlice, &mut out_b, &mut states, channel, &mut eve)?;
    let ok_a = s.run_decoy_check(4, CheckKind::DecoyAliceToBob, Actor::Alice, Actor::Bob, &out_a, &mut recs_a, &mut bob_rng)?;
    let ok_b = s.run_decoy_check(4, CheckKind::DecoyBobToAlice, Actor::Bob, Actor::Alice, &out_b, &mut recs_b, &mut alice_rng)?;
    for (r, st) in records.iter_mut().zip(states) {
        r.joint_state = st;
    }
    if !(ok_a && ok_b) {
        return Ok(s.finish(Some(AbortReason::DecoyCheckFailed), 4, Actor::Alice, records, Default::default()));
    }
    let (measured_a, _) = bell_measure(&states[0], &mut bob_rng)?;
    s.log(4, Actor::Bob, EventKind::BellMeasure { pair: 0, label: measured_a });
    let (measured_b, _) = bell_measure(&states[1], &mut alice_rng)?;
    s.log(4, Actor::Alice, EventKind::BellMeasure { pair: 1, label: measured_b });
    let by_alice = ci_decode(announced, measured_b);
    s.log(4, Actor::Alice, EventKind::Decode { pair: 1, message: by_alice });
    let by_bob = ci_decode(announced, measured_a);
    s.log(4, Actor::Bob, EventKind::Decode { pair: 0, message: by_bob });
    Ok(s.finish(None, 4, Actor::Alice, records, (alloc::vec![by_alice], alloc::vec![by_bob])))
}

/// Repeats the decode step using nothing but logged events: each party's own
/// Bell measurements plus the public announcements. Returns
/// `(decoded_by_alice, decoded_by_bob)`; both empty for aborted sessions.
pub fn decode_from_transcript(
    protocol: Protocol,
    transcript: &Transcript,
) -> (Vec<TwoBitMessage>, Vec<TwoBitMessage>) {
    if transcript.aborted().is_some() {
        return (Vec::new(), Vec::new());
    }
    let measured = |actor: Actor| -> Vec<(usize, BellLabel)> {
        transcript
            .events()
            .iter()
            .filter(|e| e.actor == actor)
            .filter_map(|e| match e.kind {
                EventKind::BellMeasure { pair, label } => Some((pair, label)),
                _ => None,
            })
            .collect()
    };
    match protocol {
        Protocol::Chang => {
            let mut initial = BTreeMap::new();
            for e in transcript.events() {
                if let EventKind::AnnounceInitial { pairs, labels } = &e.kind {
                    initial.extend(pairs.iter().copied().zip(labels.iter().copied()));
                }
            }
            let decode = |actor| {
                measured(actor)
                    .into_iter()
                    .filter_map(|(p, mr)| initial.get(&p).map(|&is| chang_decode(is, mr)))
                    .collect()
            };
            (decode(Actor::Alice), decode(Actor::Bob))
        }
        Protocol::ControllerIndependent => {
            let announced = transcript.events().iter().find_map(|e| match e.kind {
                EventKind::AnnounceResult { label } => Some(label),
                _ => None,
            });
            let Some(announced) = announced else {
                return (Vec::new(), Vec::new());
            };
            let decode = |actor| {
                measured(actor)
                    .into_iter()
                    .map(|(_, label)| ci_decode(announced, label))
                    .collect()
            };
            (decode(Actor::Alice), decode(Actor::Bob))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::TwoBitMessage as M;

    fn ideal(n: usize, l: usize, d: usize, decoys: usize, seed: u64) -> SessionConfig {
        SessionConfig {
            n,
            l,
            d,
            decoy_count: decoys,
            error_threshold: 0.0,
            seed,
        }
    }

    #[test]
    fn worked_controlled_example() {
        let cfg = ideal(2, 0, 0, 4, 11);
        let out = run_chang_session(
            &cfg,
            &[M::M10],
            &[M::M01],
            &[BellLabel::PhiPlus, BellLabel::PhiPlus],
            &ChannelModel::IDEAL,
        )
        .unwrap();
        assert!(!out.is_aborted());
        assert_eq!(out.measured_by(Actor::Alice), [BellLabel::PhiMinus]);
        assert_eq!(out.measured_by(Actor::Bob), [BellLabel::PsiPlus]);
        assert_eq!(out.decoded_by_alice, [M::M01]);
        assert_eq!(out.decoded_by_bob, [M::M10]);
    }

    #[test]
    fn all_zero_messages_measure_the_initial_states() {
        let is = [BellLabel::PsiMinus, BellLabel::PhiMinus, BellLabel::PsiPlus, BellLabel::PhiPlus];
        let out = run_chang_session(&ideal(4, 0, 0, 2, 3), &[M::M00; 2], &[M::M00; 2], &is, &ChannelModel::IDEAL).unwrap();
        assert_eq!(out.measured_by(Actor::Bob), [is[0], is[1]]);
        assert_eq!(out.measured_by(Actor::Alice), [is[2], is[3]]);
        assert_eq!(out.decoded_by_alice, [M::M00; 2]);
    }

    #[test]
    fn checks_pass_on_ideal_channel_with_sacrificed_pairs() {
        let cfg = ideal(6, 5, 7, 6, 42);
        let is: Vec<BellLabel> = (0..cfg.total_pairs()).map(|i| BellLabel::ALL[(i * 7) % 4]).collect();
        let ma = [M::M11, M::M01, M::M10];
        let mb = [M::M00, M::M10, M::M11];
        let out = run_chang_session(&cfg, &ma, &mb, &is, &ChannelModel::IDEAL).unwrap();
        assert!(!out.is_aborted());
        assert_eq!(out.decoded_by_bob, ma);
        assert_eq!(out.decoded_by_alice, mb);
        assert_eq!(out.checks.len(), 4);
        assert!(out.checks.iter().all(|c| c.error_rate == 0.0));
        let dirs: Vec<_> = out.pairs.iter().filter_map(|p| p.direction).collect();
        assert_eq!(dirs.iter().filter(|d| **d == Direction::AliceToBob).count(), 3);
        assert_eq!(dirs.iter().filter(|d| **d == Direction::BobToAlice).count(), 3);
    }

    #[test]
    fn input_validation() {
        let cfg = ideal(3, 0, 0, 0, 0);
        assert_eq!(cfg.validate(), Err(ConfigError::PairCount(3)));
        let cfg = ideal(2, 0, 0, 0, 0);
        let err = run_chang_session(&cfg, &[], &[M::M00], &[BellLabel::PhiPlus; 2], &ChannelModel::IDEAL).unwrap_err();
        assert!(matches!(err, SessionError::MessageCount { party: "alice", .. }));
        let err = run_chang_session(&cfg, &[M::M00], &[M::M00], &[BellLabel::PhiPlus; 3], &ChannelModel::IDEAL).unwrap_err();
        assert_eq!(err, SessionError::InitialStateCount { expected: 2, found: 3 });
        let mut bad = cfg;
        bad.error_threshold = 1.5;
        assert_eq!(bad.validate().unwrap_err().field(), "threshold");
    }

    #[test]
    fn worked_two_party_example() {
        let out = run_ci_session(&ideal(2, 0, 0, 4, 5), M::M01, M::M11, BellLabel::PhiPlus, &ChannelModel::IDEAL).unwrap();
        assert_eq!(out.announced_result(), Some(BellLabel::PhiMinus));
        assert_eq!(out.bob_initial(), Some(BellLabel::PsiPlus));
        assert_eq!(out.echo_delta(), Some(1));
        assert_eq!(out.decoded_by_alice, [M::M11]);
        assert_eq!(out.decoded_by_bob, [M::M01]);
    }

    #[test]
    fn forged_echo_aborts() {
        let channel = ChannelModel {
            forged_echo: Some(BellLabel::PsiPlus),
            ..ChannelModel::IDEAL
        };
        let out = run_ci_session(&ideal(2, 0, 0, 4, 5), M::M01, M::M11, BellLabel::PhiPlus, &channel).unwrap();
        assert_eq!(out.aborted, Some(AbortReason::EchoMismatch));
        assert_eq!(out.echo_delta(), Some(0));
        assert!(out.decoded_by_alice.is_empty() && out.decoded_by_bob.is_empty());
        assert_eq!(out.transcript.events().last().unwrap().kind, EventKind::Abort { reason: AbortReason::EchoMismatch });
    }

    #[test]
    fn transcripts_are_reproducible_and_sufficient() {
        let cfg = ideal(4, 3, 3, 5, 99);
        let is: Vec<BellLabel> = (0..10).map(|i| BellLabel::ALL[i % 4]).collect();
        let run = || run_chang_session(&cfg, &[M::M10, M::M11], &[M::M01, M::M00], &is, &ChannelModel::IDEAL).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.transcript.to_text(), b.transcript.to_text());
        let (by_alice, by_bob) = decode_from_transcript(Protocol::Chang, &a.transcript);
        assert_eq!(by_alice, a.decoded_by_alice);
        assert_eq!(by_bob, a.decoded_by_bob);

        let other = run_chang_session(&cfg.with_seed(100), &[M::M10, M::M11], &[M::M01, M::M00], &is, &ChannelModel::IDEAL).unwrap();
        assert_ne!(a.transcript.to_text(), other.transcript.to_text());
    }

    #[test]
    fn transcript_lines_have_stable_fields() {
        let out = run_ci_session(&ideal(2, 0, 0, 1, 1), M::M01, M::M11, BellLabel::PhiPlus, &ChannelModel::IDEAL).unwrap();
        let text = out.transcript.to_text();
        let first = text.lines().next().unwrap();
        assert_eq!(first, "step=1 actor=alice vis=private event=prepare first=0 labels=phi+");
        assert!(text.contains("step=1 actor=alice vis=public event=announce-result label=phi-\n"));
        assert!(text.contains("step=3 actor=alice vis=public event=echo-check delta=1\n"));
        let public = out.transcript.public_view();
        assert!(public.events().iter().all(|e| e.kind.visibility() == Visibility::Public));
    }
}
