//! Attack models and security statistics.
//!
//! Intercept-and-resend is modelled as a projective measurement in Eve's
//! chosen basis followed by resending the post-measurement eigenstate. The
//! exact detection probabilities are enumerated over rational transition
//! probabilities; the Monte Carlo estimates go through the same state
//! engine and check routines the sessions use.

use alloc::vec::Vec;

use num_rational::Ratio;
use rand::Rng;
use thiserror::Error;

use crate::codebook::{ci_select_initial, encode_label, TwoBitMessage};
use crate::protocol::{
    correlation_check, decoy_check, insert_decoys, run_chang_session, run_ci_session, Actor,
    ChannelModel, CheckKind, ControllerBehavior, Eavesdropper, EventKind, Link, Protocol,
    SessionConfig, SessionError, SessionOutcome, Slot, Transcript,
};
use crate::qstate::{
    bell_state, measure_qubit, measure_single, Basis, BellLabel, Side, SingleQubitState,
    StateError, StateVector,
};
use crate::streams::{stream, trial_seed, Stream};

/// Exact probability.
pub type Probability = Ratio<u64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("exact detection probability is defined only for intercept-and-resend attacks")]
    NotInterception,
    #[error("at least one trial is required")]
    NoTrials,
    #[error("message index {index} out of range ({available} available)")]
    TargetOutOfRange { index: usize, available: usize },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisPolicy {
    /// Fair coin between the computational and diagonal bases.
    UniformZX,
    AlwaysZ,
    AlwaysX,
}

impl BasisPolicy {
    pub fn choose<R: Rng + ?Sized>(self, rng: &mut R) -> Basis {
        match self {
            BasisPolicy::UniformZX => Basis::ALL[rng.gen_range(0..2)],
            BasisPolicy::AlwaysZ => Basis::Computational,
            BasisPolicy::AlwaysX => Basis::Diagonal,
        }
    }

    /// Probability with which each basis is chosen.
    pub fn weights(self) -> [(Basis, Probability); 2] {
        let (half, one, zero) = (Ratio::new(1, 2), Ratio::from_integer(1), Ratio::from_integer(0));
        match self {
            BasisPolicy::UniformZX => [(Basis::Computational, half), (Basis::Diagonal, half)],
            BasisPolicy::AlwaysZ => [(Basis::Computational, one), (Basis::Diagonal, zero)],
            BasisPolicy::AlwaysX => [(Basis::Computational, zero), (Basis::Diagonal, one)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BasisPolicy::UniformZX => "uniform-zx",
            BasisPolicy::AlwaysZ => "always-z",
            BasisPolicy::AlwaysX => "always-x",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LiePolicy {
    /// A uniformly chosen label different from the true one.
    UniformWrong,
    Fixed(BellLabel),
}

impl LiePolicy {
    pub fn lie<R: Rng + ?Sized>(self, truth: BellLabel, rng: &mut R) -> BellLabel {
        match self {
            LiePolicy::Fixed(label) => label,
            LiePolicy::UniformWrong => {
                let wrong: Vec<BellLabel> = BellLabel::ALL.into_iter().filter(|&l| l != truth).collect();
                wrong[rng.gen_range(0..wrong.len())]
            }
        }
    }
}

/// Set of tapped links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Links(u8);

impl Links {
    pub const NONE: Links = Links(0);
    pub const ALL: Links = Links(0b1111);
    pub const ALICE_TO_BOB: Links = Links::only(Link::AliceToBob);

    pub const fn only(link: Link) -> Links {
        Links(Self::bit(link))
    }

    const fn bit(link: Link) -> u8 {
        match link {
            Link::CharlieToAlice => 1,
            Link::CharlieToBob => 2,
            Link::AliceToBob => 4,
            Link::BobToAlice => 8,
        }
    }

    pub fn with(self, link: Link) -> Links {
        Links(self.0 | Self::bit(link))
    }

    pub fn contains(self, link: Link) -> bool {
        self.0 & Self::bit(link) != 0
    }

    pub fn iter(self) -> impl Iterator<Item = Link> {
        Link::ALL.into_iter().filter(move |&l| self.contains(l))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackModel {
    None,
    InterceptResend { policy: BasisPolicy, links: Links },
    MaliciousController(LiePolicy),
    /// Reads the classical channel only.
    PassiveListener,
}

impl AttackModel {
    pub fn intercept(policy: BasisPolicy) -> Self {
        AttackModel::InterceptResend {
            policy,
            links: Links::ALICE_TO_BOB,
        }
    }

    pub fn channel(&self) -> ChannelModel {
        match *self {
            AttackModel::None | AttackModel::PassiveListener => ChannelModel::IDEAL,
            AttackModel::InterceptResend { policy, links } => ChannelModel {
                eavesdropper: Some(Eavesdropper { policy, links }),
                ..ChannelModel::IDEAL
            },
            AttackModel::MaliciousController(lie) => ChannelModel {
                controller: ControllerBehavior::Lying(lie),
                ..ChannelModel::IDEAL
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttackModel::None => "none",
            AttackModel::InterceptResend { .. } => "intercept-resend",
            AttackModel::MaliciousController(_) => "malicious-controller",
            AttackModel::PassiveListener => "passive-listener",
        }
    }
}

/// What Eve learned from one interception.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EveRecord {
    pub basis: Basis,
    pub outcome: SingleQubitState,
}

/// Measures a lone qubit in a basis drawn from `policy` and resends the
/// resulting eigenstate.
pub fn intercept_resend<R: Rng + ?Sized>(
    qubit: &StateVector,
    policy: BasisPolicy,
    rng: &mut R,
) -> Result<(StateVector, EveRecord), StateError> {
    let basis = policy.choose(rng);
    let outcome = measure_single(qubit, basis, rng)?;
    Ok((outcome.state(), EveRecord { basis, outcome }))
}

/// Same attack on one particle of an entangled pair; the joint state
/// collapses accordingly.
pub fn intercept_pair_half<R: Rng + ?Sized>(
    pair: &StateVector,
    side: Side,
    policy: BasisPolicy,
    rng: &mut R,
) -> Result<(StateVector, EveRecord), StateError> {
    let basis = policy.choose(rng);
    let (outcome, post) = measure_qubit(pair, side, basis, rng)?;
    Ok((post, EveRecord { basis, outcome }))
}

/// `|⟨outcome|prepared⟩|²` for eigenstates of the two bases: 1 or 0 within
/// a basis, 1/2 across bases.
pub fn transition(prepared: SingleQubitState, outcome: SingleQubitState) -> Probability {
    if prepared.basis() != outcome.basis() {
        Ratio::new(1, 2)
    } else if prepared == outcome {
        Ratio::from_integer(1)
    } else {
        Ratio::from_integer(0)
    }
}

fn outcomes(basis: Basis) -> [SingleQubitState; 2] {
    [
        SingleQubitState::from_basis_bit(basis, 0),
        SingleQubitState::from_basis_bit(basis, 1),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckContext {
    DecoyCheck,
    CorrelationCheck,
}

/// Exact per-item error probability that an intercept-and-resend attack
/// induces in a check. For the correlation check Eve taps one particle.
pub fn detection_probability_exact(
    attack: &AttackModel,
    context: CheckContext,
) -> Result<Probability, AdversaryError> {
    let AttackModel::InterceptResend { policy, .. } = *attack else {
        return Err(AdversaryError::NotInterception);
    };
    Ok(match context {
        CheckContext::DecoyCheck => decoy_error_exact(policy),
        CheckContext::CorrelationCheck => correlation_error_exact(policy, true, false),
    })
}

/// Enumerates decoy state × Eve basis × Eve outcome × receiver outcome.
pub fn decoy_error_exact(policy: BasisPolicy) -> Probability {
    let quarter = Ratio::new(1, 4);
    let mut p = Ratio::from_integer(0);
    for decoy in SingleQubitState::ALL {
        for (eve_basis, w) in policy.weights() {
            for eve in outcomes(eve_basis) {
                let reach = quarter * w * transition(decoy, eve);
                for received in outcomes(decoy.basis()) {
                    if received != decoy {
                        p += reach * transition(eve, received);
                    }
                }
            }
        }
    }
    p
}

/// Enumerates Bell label × shared check basis × Eve's basis and outcome on
/// each tapped particle × both holders' outcomes.
pub fn correlation_error_exact(policy: BasisPolicy, tap_a: bool, tap_b: bool) -> Probability {
    let zero = Ratio::from_integer(0);
    let one = Ratio::from_integer(1);
    let half = Ratio::new(1, 2);
    let quarter = Ratio::new(1, 4);
    let untapped = [(Basis::Computational, one), (Basis::Diagonal, zero)];
    let mut p = zero;
    for label in BellLabel::ALL {
        for check in Basis::ALL {
            let a_choices = if tap_a { policy.weights() } else { untapped };
            for (ea, wa) in a_choices {
                if wa == zero {
                    continue;
                }
                let b_choices = if tap_b { policy.weights() } else { untapped };
                for (eb, wb) in b_choices {
                    if wb == zero {
                        continue;
                    }
                    let weight = quarter * half * wa * wb;
                    p += weight * correlation_violation(label, check, tap_a.then_some(ea), tap_b.then_some(eb));
                }
            }
        }
    }
    p
}

/// Violation probability for a pair `label` checked in `check`, after Eve
/// measured particle A in `eve_a` and/or particle B in `eve_b`.
fn correlation_violation(label: BellLabel, check: Basis, eve_a: Option<Basis>, eve_b: Option<Basis>) -> Probability {
    let zero = Ratio::from_integer(0);
    let half = Ratio::new(1, 2);
    // The first measurement on a Bell pair, in any basis, gives a uniform
    // outcome and leaves the partner in the correlated eigenstate.
    let first_basis = eve_a.or(eve_b).unwrap_or(check);
    let mut p = zero;
    for bit in [0u8, 1] {
        let first = SingleQubitState::from_basis_bit(first_basis, bit);
        let partner = SingleQubitState::from_basis_bit(first_basis, bit ^ u8::from(label.parity_flip(first_basis)));
        // (state of A, distribution of B) after Eve is done
        let (a_state, b_states): (SingleQubitState, Vec<(SingleQubitState, Probability)>) = match (eve_a, eve_b) {
            (Some(_), Some(eb)) => (first, outcomes(eb).iter().map(|&o| (o, transition(partner, o))).collect()),
            (Some(_), None) => (first, alloc::vec![(partner, Ratio::from_integer(1))]),
            (None, Some(_)) => (partner, alloc::vec![(first, Ratio::from_integer(1))]),
            (None, None) => (first, alloc::vec![(partner, Ratio::from_integer(1))]),
        };
        for (b_state, wb) in b_states {
            for ra in outcomes(check) {
                for rb in outcomes(check) {
                    let opposite = ra.bit() ^ rb.bit() == 1;
                    if opposite != label.parity_flip(check) {
                        p += half * wb * transition(a_state, ra) * transition(b_state, rb);
                    }
                }
            }
        }
    }
    p
}

/// Per-item error rate measured by running `trials` items through the
/// protocol's own check routines with Eve in the channel.
pub fn detection_probability_monte_carlo(
    attack: &AttackModel,
    context: CheckContext,
    trials: usize,
    seed: u64,
) -> Result<f64, AdversaryError> {
    let AttackModel::InterceptResend { policy, .. } = *attack else {
        return Err(AdversaryError::NotInterception);
    };
    if trials == 0 {
        return Err(AdversaryError::NoTrials);
    }
    let mut eve = stream(seed, Stream::Eavesdropper);
    let rate = match context {
        CheckContext::DecoyCheck => {
            let mut sender = stream(seed, Stream::AliceDecoys);
            let mut receiver = stream(seed, Stream::BobMeasure);
            let (mut seq, mut records) = insert_decoys(Vec::<()>::new(), trials, &mut sender);
            for slot in seq.iter_mut() {
                if let Slot::Decoy(s) = slot {
                    *s = intercept_resend(s, policy, &mut eve)?.0;
                }
            }
            decoy_check(CheckKind::DecoyAliceToBob, &seq, &mut records, 1.0, &mut receiver)?.error_rate
        }
        CheckContext::CorrelationCheck => {
            let mut labels = stream(seed, Stream::Workload);
            let mut pairs = Vec::with_capacity(trials);
            for _ in 0..trials {
                let label = BellLabel::ALL[labels.gen_range(0..4)];
                let (post, _) = intercept_pair_half(&bell_state(label), Side::A, policy, &mut eve)?;
                pairs.push((label, post));
            }
            let (report, _) = correlation_check(
                CheckKind::Second,
                &mut pairs,
                1.0,
                &mut stream(seed, Stream::CheckBasis),
                &mut stream(seed, Stream::AliceMeasure),
                &mut stream(seed, Stream::BobMeasure),
            )?;
            report.error_rate
        }
    };
    Ok(rate)
}

/// `P(errors/k ≤ threshold)` for `k` independent items each failing with
/// probability `p`.
fn pass_probability(k: usize, p: f64, threshold: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    let mut binom = 1.0;
    for e in 0..=k {
        if e > 0 {
            binom = binom * (k - e + 1) as f64 / e as f64;
        }
        if e as f64 / k as f64 <= threshold {
            total += binom * libm::pow(p, e as f64) * libm::pow(1.0 - p, (k - e) as f64);
        }
    }
    total
}

fn ratio_f64(r: Probability) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Exact probability that a whole session aborts under an intercept-and-
/// resend attack, combining every check on the tapped links. `None` for
/// attacks that are not interceptions.
pub fn session_detection_exact(cfg: &SessionConfig, protocol: Protocol, attack: &AttackModel) -> Option<f64> {
    let AttackModel::InterceptResend { policy, links } = *attack else {
        return None;
    };
    let decoy = ratio_f64(decoy_error_exact(policy));
    let t = cfg.error_threshold;
    let mut pass = 1.0;
    if protocol == Protocol::Chang {
        let to_alice = links.contains(Link::CharlieToAlice);
        let to_bob = links.contains(Link::CharlieToBob);
        let first = if to_alice { ratio_f64(correlation_error_exact(policy, true, false)) } else { 0.0 };
        let second = if to_alice || to_bob {
            ratio_f64(correlation_error_exact(policy, to_alice, to_bob))
        } else {
            0.0
        };
        pass *= pass_probability(cfg.l, first, t) * pass_probability(cfg.d, second, t);
    }
    for link in [Link::AliceToBob, Link::BobToAlice] {
        if links.contains(link) {
            pass *= pass_probability(cfg.decoy_count, decoy, t);
        }
    }
    Some(1.0 - pass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub aborted: bool,
    /// Some decoded message differs from the one sent.
    pub message_error: bool,
}

/// One Monte Carlo trial with uniformly random secrets. Secrets and session
/// randomness both derive from `(cfg.seed, index)` only.
pub fn run_trial(
    cfg: &SessionConfig,
    protocol: Protocol,
    attack: &AttackModel,
    index: u64,
) -> Result<TrialOutcome, AdversaryError> {
    let seed = trial_seed(cfg.seed, index);
    let trial_cfg = cfg.with_seed(seed);
    let mut secrets = stream(seed, Stream::Workload);
    let channel = attack.channel();
    let mut msg = || TwoBitMessage::ALL[secrets.gen_range(0..4)];
    let (out, sent_a, sent_b): (SessionOutcome, Vec<TwoBitMessage>, Vec<TwoBitMessage>) = match protocol {
        Protocol::Chang => {
            let half = cfg.n / 2;
            let ma: Vec<_> = (0..half).map(|_| msg()).collect();
            let mb: Vec<_> = (0..half).map(|_| msg()).collect();
            let is: Vec<_> = (0..cfg.total_pairs())
                .map(|_| BellLabel::ALL[secrets.gen_range(0..4)])
                .collect();
            (run_chang_session(&trial_cfg, &ma, &mb, &is, &channel)?, ma, mb)
        }
        Protocol::ControllerIndependent => {
            let (ma, mb) = (msg(), msg());
            let is = BellLabel::ALL[secrets.gen_range(0..4)];
            (run_ci_session(&trial_cfg, ma, mb, is, &channel)?, alloc::vec![ma], alloc::vec![mb])
        }
    };
    Ok(TrialOutcome {
        aborted: out.is_aborted(),
        message_error: !out.is_aborted() && (out.decoded_by_bob != sent_a || out.decoded_by_alice != sent_b),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackStats {
    pub trials: usize,
    pub detected: usize,
    pub completed_with_errors: usize,
    /// Fraction of sessions that aborted.
    pub detection_rate: f64,
    /// Fraction of all sessions that completed yet delivered a wrong message.
    pub undetected_message_compromise_rate: f64,
    /// Fraction of completed sessions that delivered a wrong message.
    pub message_error_rate: f64,
}

impl AttackStats {
    /// Order-independent aggregation.
    pub fn from_trials(trials: &[TrialOutcome]) -> Self {
        let n = trials.len();
        let detected = trials.iter().filter(|t| t.aborted).count();
        let wrong = trials.iter().filter(|t| t.message_error).count();
        let completed = n - detected;
        let frac = |k: usize, of: usize| if of == 0 { 0.0 } else { k as f64 / of as f64 };
        Self {
            trials: n,
            detected,
            completed_with_errors: wrong,
            detection_rate: frac(detected, n),
            undetected_message_compromise_rate: frac(wrong, n),
            message_error_rate: frac(wrong, completed),
        }
    }
}

/// Monte Carlo over `trials` independent sessions.
pub fn run_attacked_session(
    cfg: &SessionConfig,
    protocol: Protocol,
    attack: &AttackModel,
    trials: usize,
) -> Result<AttackStats, AdversaryError> {
    if trials == 0 {
        return Err(AdversaryError::NoTrials);
    }
    let outcomes = (0..trials as u64)
        .map(|i| run_trial(cfg, protocol, attack, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AttackStats::from_trials(&outcomes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControllerCase {
    pub truth: BellLabel,
    pub announced: BellLabel,
    pub message: TwoBitMessage,
    pub decoded_by_bob: TwoBitMessage,
    pub decoded_by_alice: TwoBitMessage,
}

impl ControllerCase {
    pub fn wrong(&self) -> bool {
        self.decoded_by_bob != self.message && self.decoded_by_alice != self.message
    }
}

/// Runs one ideal two-pair controlled session for every (true initial state,
/// different announced state, message) combination, both parties sending
/// the same message.
pub fn malicious_controller_grid(seed: u64) -> Result<Vec<ControllerCase>, AdversaryError> {
    let cfg = SessionConfig {
        n: 2,
        l: 0,
        d: 0,
        decoy_count: 4,
        error_threshold: 0.0,
        seed,
    };
    let mut cases = Vec::with_capacity(48);
    for truth in BellLabel::ALL {
        for announced in BellLabel::ALL.into_iter().filter(|&l| l != truth) {
            for message in TwoBitMessage::ALL {
                let channel = AttackModel::MaliciousController(LiePolicy::Fixed(announced)).channel();
                let out = run_chang_session(&cfg, &[message], &[message], &[truth, truth], &channel)?;
                cases.push(ControllerCase {
                    truth,
                    announced,
                    message,
                    decoded_by_bob: out.decoded_by_bob[0],
                    decoded_by_alice: out.decoded_by_alice[0],
                });
            }
        }
    }
    Ok(cases)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    AliceMsg,
    BobMsg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageReport {
    /// Indexed like [`TwoBitMessage::ALL`].
    pub posterior: [f64; 4],
    pub entropy_bits: f64,
}

impl LeakageReport {
    fn from_weights(weights: [Probability; 4]) -> Self {
        let total: Probability = weights.iter().copied().sum();
        let posterior = weights.map(|w| ratio_f64(w / total));
        let entropy_bits = -posterior
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * libm::log2(p))
            .sum::<f64>();
        Self {
            posterior,
            entropy_bits: entropy_bits + 0.0,
        }
    }
}

/// Exact posterior over the `index`-th message of `target`, given whatever
/// events `view` contains (a public view for an outsider, or a party's own
/// view). Priors are uniform over initial states and messages.
pub fn leakage_posterior(
    protocol: Protocol,
    view: &Transcript,
    target: Target,
    index: usize,
) -> Result<LeakageReport, AdversaryError> {
    let uniform = Ratio::new(1, 16);
    let mut weights = [Ratio::from_integer(0); 4];
    match protocol {
        Protocol::Chang => {
            // Message pairs are announced in order: Alice's first, then Bob's.
            let announcement = view.events().iter().find_map(|e| match &e.kind {
                EventKind::AnnounceInitial { pairs, labels } => Some((pairs.clone(), labels.clone())),
                _ => None,
            });
            let (pair, announced) = match announcement {
                Some((pairs, labels)) => {
                    let half = pairs.len() / 2;
                    let k = match target {
                        Target::AliceMsg => index,
                        Target::BobMsg => half + index,
                    };
                    if index >= half {
                        return Err(AdversaryError::TargetOutOfRange { index, available: half });
                    }
                    (Some(pairs[k]), Some(labels[k]))
                }
                None => (None, None),
            };
            let receiver = match target {
                Target::AliceMsg => Actor::Bob,
                Target::BobMsg => Actor::Alice,
            };
            let measured = pair.and_then(|p| {
                view.events().iter().find_map(|e| match e.kind {
                    EventKind::BellMeasure { pair, label } if pair == p && e.actor == receiver => Some(label),
                    _ => None,
                })
            });
            let side = match target {
                Target::AliceMsg => Side::A,
                Target::BobMsg => Side::B,
            };
            for is in BellLabel::ALL {
                for (m, msg) in TwoBitMessage::ALL.into_iter().enumerate() {
                    let consistent = announced.is_none_or(|a| a == is)
                        && measured.is_none_or(|mr| encode_label(is, msg, side) == mr);
                    if consistent {
                        weights[m] += uniform;
                    }
                }
            }
        }
        Protocol::ControllerIndependent => {
            if index > 0 {
                return Err(AdversaryError::TargetOutOfRange { index, available: 1 });
            }
            let announced = view.events().iter().find_map(|e| match e.kind {
                EventKind::AnnounceResult { label } => Some(label),
                _ => None,
            });
            let (owner_pair, measurer) = match target {
                Target::AliceMsg => (0, Actor::Bob),
                Target::BobMsg => (1, Actor::Alice),
            };
            let measured = view.events().iter().find_map(|e| match e.kind {
                EventKind::BellMeasure { pair, label } if pair == owner_pair && e.actor == measurer => Some(label),
                _ => None,
            });
            for is in BellLabel::ALL {
                for (m, msg) in TwoBitMessage::ALL.into_iter().enumerate() {
                    let consistent = match target {
                        Target::AliceMsg => announced.is_none_or(|a| encode_label(is, msg, Side::A) == a),
                        Target::BobMsg => announced.is_none_or(|a| ci_select_initial(a, msg) == is),
                    } && measured.is_none_or(|l| l == is);
                    if consistent {
                        weights[m] += uniform;
                    }
                }
            }
        }
    }
    Ok(LeakageReport::from_weights(weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::equal_up_to_phase;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(n: u64, d: u64) -> Probability {
        Ratio::new(n, d)
    }

    #[test]
    fn transition_table_matches_amplitudes() {
        for a in SingleQubitState::ALL {
            for b in SingleQubitState::ALL {
                let ip = crate::qstate::inner_product(&b.state(), &a.state()).unwrap().norm_sqr();
                assert!((ip - ratio_f64(transition(a, b))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigenstate_survives_matching_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let (sent, rec) = intercept_resend(&SingleQubitState::Zero.state(), BasisPolicy::AlwaysZ, &mut rng).unwrap();
            assert_eq!(rec.outcome, SingleQubitState::Zero);
            assert_eq!(sent, SingleQubitState::Zero.state());
        }
    }

    #[test]
    fn plus_measured_in_z_is_resent_as_basis_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut zeros = 0;
        for _ in 0..2000 {
            let (sent, rec) = intercept_resend(&SingleQubitState::Plus.state(), BasisPolicy::AlwaysZ, &mut rng).unwrap();
            assert_eq!(rec.basis, Basis::Computational);
            assert_eq!(sent, rec.outcome.state());
            zeros += usize::from(rec.outcome == SingleQubitState::Zero);
        }
        assert!((900..1100).contains(&zeros));
        // receiver's diagonal check then errs with |⟨−|0⟩|² = 1/2
        assert_eq!(transition(SingleQubitState::Zero, SingleQubitState::Minus), q(1, 2));
    }

    #[test]
    fn intercepted_pair_collapses_to_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (post, rec) =
            intercept_pair_half(&bell_state(BellLabel::PhiPlus), Side::A, BasisPolicy::AlwaysZ, &mut rng).unwrap();
        let idx = if rec.outcome == SingleQubitState::Zero { 0b00 } else { 0b11 };
        assert!(equal_up_to_phase(&post, &StateVector::basis_state(2, idx).unwrap(), 1e-12).unwrap());
    }

    #[test]
    fn exact_probabilities() {
        let uniform = AttackModel::intercept(BasisPolicy::UniformZX);
        assert_eq!(detection_probability_exact(&uniform, CheckContext::DecoyCheck).unwrap(), q(1, 4));
        assert_eq!(detection_probability_exact(&uniform, CheckContext::CorrelationCheck).unwrap(), q(1, 4));
        let z = AttackModel::intercept(BasisPolicy::AlwaysZ);
        assert_eq!(detection_probability_exact(&z, CheckContext::DecoyCheck).unwrap(), q(1, 4));
        assert_eq!(detection_probability_exact(&z, CheckContext::CorrelationCheck).unwrap(), q(1, 4));
        assert_eq!(
            detection_probability_exact(&AttackModel::PassiveListener, CheckContext::DecoyCheck),
            Err(AdversaryError::NotInterception)
        );
        assert_eq!(correlation_error_exact(BasisPolicy::UniformZX, false, false), q(0, 1));
        assert_eq!(correlation_error_exact(BasisPolicy::UniformZX, false, true), q(1, 4));
        // both particles measured independently: 1/2·1/2·1/2 + 1/2·1/2
        assert_eq!(correlation_error_exact(BasisPolicy::UniformZX, true, true), q(3, 8));
    }

    #[test]
    fn monte_carlo_agrees_with_enumeration() {
        let trials = 100_000;
        for policy in [BasisPolicy::UniformZX, BasisPolicy::AlwaysZ, BasisPolicy::AlwaysX] {
            let attack = AttackModel::intercept(policy);
            for ctx in [CheckContext::DecoyCheck, CheckContext::CorrelationCheck] {
                let p = ratio_f64(detection_probability_exact(&attack, ctx).unwrap());
                let est = detection_probability_monte_carlo(&attack, ctx, trials, 17).unwrap();
                let bound = 4.0 * libm::sqrt(p * (1.0 - p) / trials as f64);
                assert!((est - p).abs() <= bound, "{policy:?} {ctx:?}: {est} vs {p}");
            }
        }
    }

    #[test]
    fn pass_probability_bounds() {
        assert!((pass_probability(20, 0.25, 0.0) - libm::pow(0.75, 20.0)).abs() < 1e-15);
        assert_eq!(pass_probability(0, 0.25, 0.0), 1.0);
        assert!((pass_probability(5, 0.3, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_attack_is_never_detected() {
        let cfg = SessionConfig { error_threshold: 0.0, ..SessionConfig::default() };
        for protocol in [Protocol::Chang, Protocol::ControllerIndependent] {
            let stats = run_attacked_session(&cfg, protocol, &AttackModel::None, 200).unwrap();
            assert_eq!(stats.detection_rate, 0.0);
            assert_eq!(stats.message_error_rate, 0.0);
        }
    }

    #[test]
    fn lying_controller_always_corrupts() {
        let cfg = SessionConfig { error_threshold: 0.0, ..SessionConfig::default() };
        let stats = run_attacked_session(&cfg, Protocol::Chang, &AttackModel::MaliciousController(LiePolicy::UniformWrong), 300).unwrap();
        assert_eq!(stats.detection_rate, 0.0);
        assert_eq!(stats.message_error_rate, 1.0);
        let grid = malicious_controller_grid(3).unwrap();
        assert_eq!(grid.len(), 48);
        assert!(grid.iter().all(ControllerCase::wrong));
    }

    #[test]
    fn uniform_lie_never_tells_the_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for truth in BellLabel::ALL {
            for _ in 0..50 {
                assert_ne!(LiePolicy::UniformWrong.lie(truth, &mut rng), truth);
            }
        }
    }

    #[test]
    fn links() {
        let l = Links::ALICE_TO_BOB.with(Link::BobToAlice);
        assert!(l.contains(Link::BobToAlice) && !l.contains(Link::CharlieToBob));
        assert_eq!(l.iter().count(), 2);
        assert_eq!(Links::ALL.iter().count(), 4);
        assert_eq!(Links::NONE.iter().count(), 0);
    }
}
