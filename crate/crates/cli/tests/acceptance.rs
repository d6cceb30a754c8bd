//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use bqdc_core::adversary::{
    decoy_error_exact, detection_probability_exact, leakage_posterior, malicious_controller_grid,
    run_attacked_session, AttackModel, BasisPolicy, CheckContext, Target,
};
use bqdc_core::codebook::{
    build_table1, build_table2, build_table3_for, executability_sweep, symbolic, GeneralizedParams,
    TwoBitMessage as M, MESSAGE_COLUMNS,
};
use bqdc_core::protocol::{run_chang_session, run_ci_session, Actor, ChannelModel, Protocol, SessionConfig};
use bqdc_core::qstate::{BellLabel, Side, FRAC_1_SQRT_2};
use bqdc_core::reference::{verify_table1, verify_table2_side_b, verify_table3};
use num_rational::Ratio;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Duration);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn table1() -> Check {
    let v = verify_table1(&build_table1());
    ensure(v.passed() && v.checked == 16, format!("{:?}", v.mismatches))?;
    Ok(format!("{}/{} cells", v.matched(), v.checked))
}

fn table3() -> Check {
    let alice = build_table3_for(Side::A);
    let bob = build_table3_for(Side::B);
    let v = verify_table3(&alice);
    ensure(v.passed() && v.checked == 16, format!("{:?}", v.mismatches))?;
    ensure(alice == bob, "communicants' tables differ")?;
    Ok(format!("{}/{} cells, both communicants identical", v.matched(), v.checked))
}

fn table2() -> Check {
    let maximal = GeneralizedParams::maximal();
    let v = verify_table2_side_b(&build_table2(&maximal), &maximal);
    ensure(v.passed() && v.checked == 16, format!("side-B mismatches: {:?}", v.mismatches))?;
    let t = build_table2(&maximal);
    let minus = t
        .cells()
        .iter()
        .filter(|c| symbolic(&c.side_b, &c.side_b_state, &maximal).starts_with('-'))
        .count();

    let params = GeneralizedParams::new(0.6).unwrap();
    let t = build_table2(&params);
    let expected = 1.0 - 2.0 * 0.6 * 0.8;
    let mut unmatched = 0;
    for (r, _) in t.row_keys().iter().enumerate() {
        for (c, m) in MESSAGE_COLUMNS.iter().enumerate() {
            let cell = t.cell(r, c);
            if *m == M::M10 || *m == M::M11 {
                ensure(cell.side_a.matched.is_none(), format!("side-A ({r},{m}) classified"))?;
                ensure(
                    (cell.side_a.residual - expected).abs() <= 1e-12,
                    format!("residual {} at ({r},{m})", cell.side_a.residual),
                )?;
                unmatched += 1;
            }
        }
    }
    ensure(unmatched == 8, format!("{unmatched} unmatched side-A cells"))?;
    Ok(format!("16/16 side-B cells ({minus} minus signs), 8/8 side-A cells unclassifiable at alpha=0.6, residual {expected:.12}"))
}

fn executability() -> Check {
    let mut grid: Vec<f64> = (1..100).map(|k| 0.01 * k as f64).collect();
    grid.push(FRAC_1_SQRT_2);
    let exec = executability_sweep(&grid, 1e-9).map_err(|e| e.to_string())?;
    ensure(exec == [FRAC_1_SQRT_2], format!("executable points {exec:?}"))?;
    Ok(format!("1 of {} grid points executable: {:.12}", grid.len(), exec[0]))
}

fn ideal(seed: u64) -> SessionConfig {
    SessionConfig {
        n: 2,
        l: 0,
        d: 0,
        decoy_count: 4,
        error_threshold: 0.0,
        seed,
    }
}

fn chang_end_to_end() -> Check {
    let ex = run_chang_session(&ideal(0), &[M::M10], &[M::M01], &[BellLabel::PhiPlus; 2], &ChannelModel::IDEAL)
        .map_err(|e| e.to_string())?;
    ensure(ex.measured_by(Actor::Alice) == [BellLabel::PhiMinus], "MR_A != phi-")?;
    ensure(ex.measured_by(Actor::Bob) == [BellLabel::PsiPlus], "MR_B != psi+")?;
    ensure(ex.decoded_by_alice == [M::M01] && ex.decoded_by_bob == [M::M10], "worked example decodes wrongly")?;
    let (mut ok, mut aborts, mut runs) = (0, 0, 0);
    for is in BellLabel::ALL {
        for ma in M::ALL {
            for mb in M::ALL {
                let out = run_chang_session(&ideal(runs), &[ma], &[mb], &[is; 2], &ChannelModel::IDEAL)
                    .map_err(|e| e.to_string())?;
                aborts += usize::from(out.is_aborted());
                ok += usize::from(out.decoded_by_bob == [ma] && out.decoded_by_alice == [mb]);
                runs += 1;
            }
        }
    }
    ensure(ok == 64 && aborts == 0, format!("{ok}/64 correct, {aborts} aborts"))?;
    Ok(format!("worked example reproduced, {ok}/{runs} correct, {aborts} aborts"))
}

fn ci_end_to_end() -> Check {
    let ex = run_ci_session(&ideal(0), M::M01, M::M11, BellLabel::PhiPlus, &ChannelModel::IDEAL)
        .map_err(|e| e.to_string())?;
    ensure(ex.announced_result() == Some(BellLabel::PhiMinus), "A' != phi-")?;
    ensure(ex.bob_initial() == Some(BellLabel::PsiPlus), "is_bob != psi+")?;
    ensure(ex.decoded_by_alice == [M::M11] && ex.decoded_by_bob == [M::M01], "worked example decodes wrongly")?;
    let (mut ok, mut delta_one, mut runs) = (0, 0, 0);
    for is in BellLabel::ALL {
        for ma in M::ALL {
            for mb in M::ALL {
                let out = run_ci_session(&ideal(runs), ma, mb, is, &ChannelModel::IDEAL).map_err(|e| e.to_string())?;
                delta_one += usize::from(out.echo_delta() == Some(1));
                ok += usize::from(!out.is_aborted() && out.decoded_by_bob == [ma] && out.decoded_by_alice == [mb]);
                runs += 1;
            }
        }
    }
    ensure(ok == 64 && delta_one == 64, format!("{ok}/64 correct, delta=1 in {delta_one}"))?;
    Ok(format!("worked example reproduced, {ok}/{runs} correct, delta=1 in {delta_one}"))
}

fn intercept_resend() -> Check {
    let attack = AttackModel::intercept(BasisPolicy::UniformZX);
    let p = detection_probability_exact(&attack, CheckContext::DecoyCheck).map_err(|e| e.to_string())?;
    ensure(p == Ratio::new(1, 4) && decoy_error_exact(BasisPolicy::UniformZX) == p, format!("per-decoy {p}"))?;
    let cfg = SessionConfig {
        n: 2,
        l: 0,
        d: 0,
        decoy_count: 20,
        error_threshold: 0.0,
        seed: 2024,
    };
    let stats = run_attacked_session(&cfg, Protocol::Chang, &attack, 10_000).map_err(|e| e.to_string())?;
    let target = 1.0 - 0.75f64.powi(20);
    let diff = (stats.detection_rate - target).abs();
    ensure(diff <= 0.005, format!("rate {:.5} vs {target:.5}", stats.detection_rate))?;
    Ok(format!(
        "per-decoy {p}, session rate {:.5} vs {target:.5} (|diff| {diff:.5})",
        stats.detection_rate
    ))
}

fn malicious_controller() -> Check {
    let grid = malicious_controller_grid(0).map_err(|e| e.to_string())?;
    let wrong = grid.iter().filter(|c| c.wrong()).count();
    ensure(grid.len() == 48 && wrong == 48, format!("{wrong}/{} wrong", grid.len()))?;
    Ok(format!("{wrong}/{} combinations decode wrongly", grid.len()))
}

fn leakage() -> Check {
    let mut reports = 0;
    for is in BellLabel::ALL {
        for ma in M::ALL {
            for mb in M::ALL {
                let chang = run_chang_session(&ideal(1), &[ma], &[mb], &[is; 2], &ChannelModel::IDEAL).map_err(|e| e.to_string())?;
                let ci = run_ci_session(&ideal(1), ma, mb, is, &ChannelModel::IDEAL).map_err(|e| e.to_string())?;
                for (protocol, out) in [(Protocol::Chang, chang), (Protocol::ControllerIndependent, ci)] {
                    for target in [Target::AliceMsg, Target::BobMsg] {
                        let rep = leakage_posterior(protocol, &out.transcript.public_view(), target, 0)
                            .map_err(|e| e.to_string())?;
                        ensure(
                            rep.posterior == [0.25; 4] && rep.entropy_bits == 2.0,
                            format!("{protocol:?} {target:?}: {:?}", rep.posterior),
                        )?;
                        reports += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{reports} outsider posteriors uniform, entropy 2.000000 bits"))
}

fn run_cli(args: &[&str], dir: &Path) -> Result<(Vec<u8>, Vec<u8>), String> {
    let transcript = dir.join("t.txt");
    let out = Command::new(env!("CARGO_BIN_EXE_bqdc"))
        .args(args)
        .args(if args[0] == "session" {
            vec!["--transcript".to_string(), transcript.display().to_string()]
        } else {
            vec![]
        })
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), format!("{args:?} exited {:?}", out.status.code()))?;
    let t = std::fs::read(&transcript).unwrap_or_default();
    Ok((out.stdout, t))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let commands: [&[&str]; 6] = [
        &["tables", "--verify"],
        &["session", "--protocol", "chang", "--seed", "5", "--n", "4"],
        &["session", "--protocol", "ci", "--seed", "5", "--attack", "intercept"],
        &["sweep", "--alpha-grid", "0.5:0.9:0.05"],
        &["attack", "--attack", "intercept", "--trials", "300", "--seed", "9"],
        &["attack", "--attack", "listener", "--protocol", "ci", "--trials", "50"],
    ];
    for args in commands {
        let first = run_cli(args, dir.path())?;
        let second = run_cli(args, dir.path())?;
        ensure(first == second, format!("{args:?} differs between runs"))?;
        if args[0] == "session" {
            ensure(!first.1.is_empty(), "empty transcript")?;
        }
    }
    Ok(format!("{} subcommand invocations byte-identical across reruns", commands.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("Table 1 conformance", table1, Duration::from_millis(1)),
        ("Table 3 conformance", table3, Duration::from_millis(1)),
        ("Table 2 conformance", table2, Duration::from_millis(10)),
        ("executability sweep", executability, Duration::from_millis(100)),
        ("controlled protocol end to end", chang_end_to_end, Duration::from_secs(1)),
        ("controller-independent protocol end to end", ci_end_to_end, Duration::from_secs(1)),
        ("intercept-and-resend detection", intercept_resend, Duration::from_secs(10)),
        ("malicious controller", malicious_controller, Duration::from_millis(100)),
        ("outsider leakage", leakage, Duration::from_secs(1)),
        ("determinism", determinism, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (status, detail) = match result {
            Ok(d) if elapsed <= *budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over budget {budget:?}")),
            Err(e) => ("FAIL", e),
        };
        failed += usize::from(status == "FAIL");
        println!("criterion {:>2} {status} {name}: {detail} [{elapsed:.2?}]", i + 1);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
