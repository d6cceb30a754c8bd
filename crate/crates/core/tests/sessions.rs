use bqdc_core::adversary::{
    leakage_posterior, run_attacked_session, session_detection_exact, AttackModel, BasisPolicy, Links,
    Target,
};
use bqdc_core::codebook::TwoBitMessage as M;
use bqdc_core::protocol::{
    decode_from_transcript, run_chang_session, run_ci_session, Actor, ChannelModel, Protocol, SessionConfig,
};
use bqdc_core::qstate::BellLabel;

fn ideal(n: usize, seed: u64) -> SessionConfig {
    SessionConfig {
        n,
        l: 0,
        d: 0,
        decoy_count: 4,
        error_threshold: 0.0,
        seed,
    }
}

#[test]
fn controlled_protocol_exhaustive() {
    let mut runs = 0;
    for is in BellLabel::ALL {
        for ma in M::ALL {
            for mb in M::ALL {
                let out = run_chang_session(&ideal(2, runs), &[ma], &[mb], &[is, is], &ChannelModel::IDEAL).unwrap();
                assert!(!out.is_aborted());
                assert_eq!((out.decoded_by_bob[0], out.decoded_by_alice[0]), (ma, mb));
                runs += 1;
            }
        }
    }
    assert_eq!(runs, 64);
}

#[test]
fn two_party_protocol_exhaustive() {
    let mut runs = 0;
    for is in BellLabel::ALL {
        for ma in M::ALL {
            for mb in M::ALL {
                let out = run_ci_session(&ideal(2, runs), ma, mb, is, &ChannelModel::IDEAL).unwrap();
                assert_eq!(out.echo_delta(), Some(1));
                assert_eq!((out.decoded_by_bob[0], out.decoded_by_alice[0]), (ma, mb));
                runs += 1;
            }
        }
    }
    assert_eq!(runs, 64);
}

#[test]
fn outsider_learns_nothing() {
    let cfg = SessionConfig { n: 4, ..ideal(4, 0) };
    for seed in 0..8 {
        let is: Vec<BellLabel> = (0..4).map(|i| BellLabel::ALL[(i + seed) % 4]).collect();
        let out = run_chang_session(&cfg.with_seed(seed as u64), &[M::M10, M::M11], &[M::M01, M::M00], &is, &ChannelModel::IDEAL).unwrap();
        for target in [Target::AliceMsg, Target::BobMsg] {
            for index in 0..2 {
                let rep = leakage_posterior(Protocol::Chang, &out.transcript.public_view(), target, index).unwrap();
                assert_eq!(rep.posterior, [0.25; 4]);
                assert_eq!(rep.entropy_bits, 2.0);
            }
        }
        let out = run_ci_session(&ideal(2, seed as u64), M::M01, M::M11, is[0], &ChannelModel::IDEAL).unwrap();
        for target in [Target::AliceMsg, Target::BobMsg] {
            let rep = leakage_posterior(Protocol::ControllerIndependent, &out.transcript.public_view(), target, 0).unwrap();
            assert_eq!(rep.entropy_bits, 2.0);
        }
    }
}

#[test]
fn partner_decodes_only_after_announcement() {
    let out = run_chang_session(&ideal(2, 1), &[M::M10], &[M::M01], &[BellLabel::PhiPlus; 2], &ChannelModel::IDEAL).unwrap();
    let bob = out.transcript.view_of(Actor::Bob);
    let before = leakage_posterior(Protocol::Chang, &bob.before_step(5), Target::AliceMsg, 0).unwrap();
    assert_eq!(before.entropy_bits, 2.0);
    // the measurement alone is consistent with every message
    let measured_only: bqdc_core::protocol::Transcript = {
        let mut t = bqdc_core::protocol::Transcript::new();
        for e in bob.events().iter().filter(|e| !matches!(e.kind, bqdc_core::protocol::EventKind::AnnounceInitial { .. })) {
            t.push(e.step, e.actor, e.kind.clone());
        }
        t
    };
    assert_eq!(leakage_posterior(Protocol::Chang, &measured_only, Target::AliceMsg, 0).unwrap().entropy_bits, 2.0);
    let after = leakage_posterior(Protocol::Chang, &bob, Target::AliceMsg, 0).unwrap();
    assert_eq!(after.entropy_bits, 0.0);
    assert_eq!(after.posterior[M::M10.bits() as usize], 1.0);
}

#[test]
fn transcript_alone_reproduces_decoding() {
    for seed in 0..5 {
        let out = run_ci_session(&ideal(2, seed), M::M10, M::M01, BellLabel::PsiMinus, &ChannelModel::IDEAL).unwrap();
        let (a, b) = decode_from_transcript(Protocol::ControllerIndependent, &out.transcript);
        assert_eq!((a, b), (out.decoded_by_alice.clone(), out.decoded_by_bob.clone()));
    }
}

#[test]
fn exact_session_detection_matches_monte_carlo_on_every_link() {
    let cfg = SessionConfig {
        n: 2,
        l: 4,
        d: 4,
        decoy_count: 6,
        error_threshold: 0.2,
        seed: 77,
    };
    let trials = 4000;
    for (protocol, links) in [
        (Protocol::Chang, Links::ALL),
        (Protocol::Chang, Links::only(bqdc_core::protocol::Link::CharlieToBob)),
        (Protocol::ControllerIndependent, Links::ALL),
    ] {
        let attack = AttackModel::InterceptResend {
            policy: BasisPolicy::UniformZX,
            links,
        };
        let p = session_detection_exact(&cfg, protocol, &attack).unwrap();
        let stats = run_attacked_session(&cfg, protocol, &attack, trials).unwrap();
        let bound = 4.0 * (p * (1.0 - p) / trials as f64).sqrt() + 1e-3;
        assert!((stats.detection_rate - p).abs() <= bound, "{protocol:?}: {} vs {p}", stats.detection_rate);
    }
}

#[test]
fn passive_listener_changes_nothing() {
    let cfg = SessionConfig::default();
    let base = run_attacked_session(&cfg, Protocol::Chang, &AttackModel::None, 50).unwrap();
    let listen = run_attacked_session(&cfg, Protocol::Chang, &AttackModel::PassiveListener, 50).unwrap();
    assert_eq!(base, listen);
    assert_eq!(listen.detection_rate, 0.0);
}
