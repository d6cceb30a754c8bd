//! The four subcommands. Each returns its report text plus any files to
//! write; the binary only does the I/O.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use bqdc_core::adversary::{
    correlation_error_exact, decoy_error_exact, leakage_posterior, malicious_controller_grid, run_trial,
    session_detection_exact, AdversaryError, AttackModel, AttackStats, LeakageReport, Target,
};
use bqdc_core::codebook::{executable, worst_residual, CodebookError, GeneralizedParams, TwoBitMessage};
use bqdc_core::protocol::{
    run_chang_session, run_ci_session, Actor, ChannelModel, Protocol, SessionError, SessionOutcome,
};
use bqdc_core::qstate::BellLabel;
use bqdc_core::reference::{verify_all, verify_table2_side_a, Verification};
use bqdc_core::streams::{stream, Stream};

use crate::config::{AttackKind, ConfigError, OutputFormat, RunConfig};
use crate::report::{wald_radius, Report};
use crate::tables::Tables;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
}

/// What a command produced. `status` is 0 on success and 1 when a
/// verification failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub text: String,
    pub files: Vec<(PathBuf, String)>,
    pub status: u8,
}

fn ok(text: String) -> Output {
    Output {
        text,
        files: Vec::new(),
        status: 0,
    }
}

fn echo_config(r: &mut Report, cfg: &RunConfig) {
    for (k, v) in cfg.echo() {
        r.put(format!("config.{k}"), v);
    }
}

fn params_for(cfg: &RunConfig) -> Result<GeneralizedParams, CodebookError> {
    if cfg.alpha == bqdc_core::qstate::FRAC_1_SQRT_2 {
        Ok(GeneralizedParams::maximal())
    } else {
        GeneralizedParams::new(cfg.alpha)
    }
}

fn verification_lines(v: &Verification, what: &str, out: &mut String) {
    for m in &v.mismatches {
        out.push_str(&format!(
            "mismatch table={} row={} column={} expected={} found={}\n",
            m.table, m.row, m.column, m.expected, m.found
        ));
    }
    out.push_str(&format!("{}/{} {what} match\n", v.matched(), v.checked));
}

/// Regenerates the three tables. With `out_dir`, each table goes to its
/// own file; otherwise all three are concatenated into the output text.
pub fn cmd_tables(cfg: &RunConfig, verify: bool, out_dir: Option<&Path>) -> Result<Output, CommandError> {
    let params = params_for(cfg)?;
    let tables = Tables::build(params);
    let ext = cfg.format.name();
    let bodies = match cfg.format {
        OutputFormat::Text => [tables.table1_text(), tables.table2_text(), tables.table3_text()],
        OutputFormat::Csv => [tables.table1_csv(), tables.table2_csv(), tables.table3_csv()],
    };
    let mut out = ok(String::new());
    match out_dir {
        Some(dir) => {
            for (i, body) in bodies.into_iter().enumerate() {
                let path = dir.join(format!("table{}.{ext}", i + 1));
                out.text.push_str(&format!("wrote {}\n", path.display()));
                out.files.push((path, body));
            }
        }
        None => {
            for (i, body) in bodies.iter().enumerate() {
                if i > 0 {
                    out.text.push('\n');
                }
                if cfg.format == OutputFormat::Csv {
                    out.text.push_str(&format!("# table{}\n", i + 1));
                }
                out.text.push_str(body);
            }
        }
    }
    if verify {
        if !out.text.is_empty() {
            out.text.push('\n');
        }
        let v = verify_all(&params);
        verification_lines(&v, "entries", &mut out.text);
        let mut passed = v.passed();
        if params.alpha() != params.beta() {
            let side_a = verify_table2_side_a(&tables.t2, &params);
            verification_lines(&side_a, "parenthetical entries", &mut out.text);
            passed &= side_a.passed();
        }
        out.status = u8::from(!passed);
    }
    Ok(out)
}

/// Session inputs, drawn from the workload stream where not supplied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inputs {
    pub msgs_alice: Vec<TwoBitMessage>,
    pub msgs_bob: Vec<TwoBitMessage>,
    pub initial: Vec<BellLabel>,
}

pub fn session_inputs(cfg: &RunConfig) -> Result<Inputs, ConfigError> {
    let mut rng = stream(cfg.session.seed, Stream::Workload);
    let (per_party, states) = match cfg.protocol {
        Protocol::Chang => (cfg.session.n / 2, cfg.session.total_pairs()),
        Protocol::ControllerIndependent => (1, 1),
    };
    let mut messages = |field: &str, given: &Option<Vec<TwoBitMessage>>| match given {
        Some(v) if v.len() == per_party => Ok(v.clone()),
        Some(v) => Err(ConfigError::Invalid {
            field: field.to_string(),
            reason: format!("{} messages given, expected {per_party}", v.len()),
        }),
        None => Ok((0..per_party).map(|_| TwoBitMessage::ALL[rng.gen_range(0..4)]).collect()),
    };
    let msgs_alice = messages("msg_alice", &cfg.msg_alice)?;
    let msgs_bob = messages("msg_bob", &cfg.msg_bob)?;
    let initial = match &cfg.initial {
        Some(v) if v.len() == states => v.clone(),
        Some(v) if v.len() == 1 => vec![v[0]; states],
        Some(v) => {
            return Err(ConfigError::Invalid {
                field: "initial".into(),
                reason: format!("{} initial states given, expected 1 or {states}", v.len()),
            })
        }
        None => (0..states).map(|_| BellLabel::ALL[rng.gen_range(0..4)]).collect(),
    };
    Ok(Inputs {
        msgs_alice,
        msgs_bob,
        initial,
    })
}

pub fn run_session(cfg: &RunConfig, inputs: &Inputs, channel: &ChannelModel) -> Result<SessionOutcome, SessionError> {
    match cfg.protocol {
        Protocol::Chang => run_chang_session(&cfg.session, &inputs.msgs_alice, &inputs.msgs_bob, &inputs.initial, channel),
        Protocol::ControllerIndependent => run_ci_session(
            &cfg.session,
            inputs.msgs_alice[0],
            inputs.msgs_bob[0],
            inputs.initial[0],
            channel,
        ),
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    if items.is_empty() {
        "-".into()
    } else {
        items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
    }
}

/// Runs one session under the configured attack and reports it step by
/// step. The transcript text is written to `transcript` when given.
pub fn cmd_session(cfg: &RunConfig, transcript: Option<&Path>) -> Result<Output, CommandError> {
    let inputs = session_inputs(cfg)?;
    let mut channel = cfg.attack_model().channel();
    channel.forged_echo = cfg.forge_echo;
    let out = run_session(cfg, &inputs, &channel)?;

    let mut r = Report::new("session");
    echo_config(&mut r, cfg);
    r.put("attack.model", cfg.attack_model().name());
    r.put("input.msg_alice", join(&inputs.msgs_alice));
    r.put("input.msg_bob", join(&inputs.msgs_bob));
    r.put("input.initial", join(&inputs.initial));
    r.put("result.aborted", out.aborted.map_or("false", |a| a.name()));
    for c in &out.checks {
        r.put(
            format!("check.{}", c.kind.name()),
            format!("errors={} total={} rate={:.6} pass={}", c.errors, c.total, c.error_rate, c.pass),
        );
    }
    r.put("result.intercepted", out.intercepted);
    r.put("result.mr_alice", join(&out.measured_by(Actor::Alice)));
    r.put("result.mr_bob", join(&out.measured_by(Actor::Bob)));
    if cfg.protocol == Protocol::ControllerIndependent {
        r.put("result.announced", out.announced_result().map_or("-".into(), |l| l.to_string()));
        r.put("result.bob_initial", out.bob_initial().map_or("-".into(), |l| l.to_string()));
        r.put("result.echo_delta", out.echo_delta().map_or("-".into(), |d| d.to_string()));
    }
    r.put("result.decoded_by_alice", join(&out.decoded_by_alice));
    r.put("result.decoded_by_bob", join(&out.decoded_by_bob));
    let delivered = !out.is_aborted() && out.decoded_by_alice == inputs.msgs_bob && out.decoded_by_bob == inputs.msgs_alice;
    r.put("result.delivered", delivered);
    r.put("transcript.events", out.transcript.len());
    r.put("transcript.file", transcript.map_or("-".into(), |p| p.display().to_string()));
    let lines: Vec<Vec<String>> = out.transcript.events().iter().map(|e| vec![e.to_string()]).collect();
    r.table("narrative", &["event"], lines);

    let mut output = ok(r.render(cfg.format));
    if let Some(path) = transcript {
        output.files.push((path.to_path_buf(), out.transcript.to_text()));
    }
    Ok(output)
}

/// Executability over the α grid.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Output, CommandError> {
    let grid = cfg.grid();
    let points = grid
        .par_iter()
        .map(|&alpha| {
            let params = GeneralizedParams::new(alpha)?;
            Ok((alpha, params.beta(), worst_residual(&params), executable(&params, cfg.tol)))
        })
        .collect::<Result<Vec<_>, CodebookError>>()?;
    let exec: Vec<String> = points
        .iter()
        .filter(|p| p.3)
        .map(|p| format!("{:.12}", p.0))
        .collect();

    let mut r = Report::new("sweep");
    echo_config(&mut r, cfg);
    r.put("sweep.points", points.len());
    r.put("sweep.executable_count", exec.len());
    r.put("sweep.executable", if exec.is_empty() { "-".into() } else { exec.join(",") });
    let rows = points
        .iter()
        .map(|&(alpha, beta, residual, ok)| {
            vec![
                format!("{alpha:.12}"),
                format!("{beta:.12}"),
                format!("{:.12}", residual.max(0.0)),
                format!("{:.12}", (1.0 - 2.0 * alpha * beta).max(0.0)),
                ok.to_string(),
            ]
        })
        .collect();
    r.table("point", &["alpha", "beta", "residual", "one_minus_2ab", "executable"], rows);
    Ok(ok(r.render(cfg.format)))
}

fn monte_carlo(cfg: &RunConfig, attack: &AttackModel) -> Result<AttackStats, AdversaryError> {
    let outcomes = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| run_trial(&cfg.session, cfg.protocol, attack, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AttackStats::from_trials(&outcomes))
}

fn leakage_rows(protocol: Protocol, out: &SessionOutcome) -> Result<Vec<(String, usize, &'static str, LeakageReport)>, AdversaryError> {
    let per_party = out.decoded_by_alice.len().max(out.decoded_by_bob.len()).max(1);
    let mut rows = Vec::new();
    for (target, name, partner) in [(Target::AliceMsg, "alice", Actor::Bob), (Target::BobMsg, "bob", Actor::Alice)] {
        for index in 0..per_party {
            let outsider = leakage_posterior(protocol, &out.transcript.public_view(), target, index)?;
            rows.push((name.to_string(), index, "outsider", outsider));
            let view = out.transcript.view_of(partner);
            rows.push((name.to_string(), index, "partner", leakage_posterior(protocol, &view, target, index)?));
        }
    }
    Ok(rows)
}

/// Monte Carlo attack campaign plus the exact figures that apply to the
/// chosen attack.
pub fn cmd_attack(cfg: &RunConfig) -> Result<Output, CommandError> {
    let attack = cfg.attack_model();
    let mut r = Report::new("attack");
    echo_config(&mut r, cfg);
    r.put("attack.model", attack.name());

    if let AttackModel::InterceptResend { policy, links } = attack {
        let decoy = decoy_error_exact(policy);
        let corr = correlation_error_exact(policy, true, false);
        r.put("exact.decoy_error", decoy);
        r.put("exact.correlation_error", corr);
        r.put("exact.correlation_error_both_halves", correlation_error_exact(policy, true, true));
        let session = session_detection_exact(&cfg.session, cfg.protocol, &AttackModel::InterceptResend { policy, links });
        r.put_f64("exact.session_detection", session.unwrap_or(0.0));
    }

    let stats = monte_carlo(cfg, &attack)?;
    r.put("mc.trials", stats.trials);
    r.put("mc.detected", stats.detected);
    r.put_f64("mc.detection_rate", stats.detection_rate);
    r.put_f64("mc.detection_radius95", wald_radius(stats.detection_rate, stats.trials));
    r.put_f64("mc.undetected_message_compromise_rate", stats.undetected_message_compromise_rate);
    r.put_f64("mc.message_error_rate", stats.message_error_rate);

    match cfg.attack {
        AttackKind::MaliciousController => {
            r.put("controller.involved", cfg.protocol == Protocol::Chang);
            let grid = malicious_controller_grid(cfg.session.seed)?;
            let wrong = grid.iter().filter(|c| c.wrong()).count();
            r.put("grid.cases", grid.len());
            r.put("grid.wrong", wrong);
            r.put_f64("grid.error_rate", wrong as f64 / grid.len() as f64);
        }
        AttackKind::Listener => {
            let inputs = session_inputs(cfg)?;
            let out = run_session(cfg, &inputs, &ChannelModel::IDEAL)?;
            let rows = leakage_rows(cfg.protocol, &out)?;
            let outsider_min = rows
                .iter()
                .filter(|row| row.2 == "outsider")
                .map(|row| row.3.entropy_bits)
                .fold(f64::INFINITY, f64::min);
            r.put_f64("leakage.outsider_min_entropy_bits", outsider_min);
            let table = rows
                .into_iter()
                .map(|(target, index, observer, rep)| {
                    let mut row = vec![target, index.to_string(), observer.to_string()];
                    row.extend(rep.posterior.iter().map(|p| format!("{p:.6}")));
                    row.push(format!("{:.6}", rep.entropy_bits));
                    row
                })
                .collect();
            r.table("leakage", &["target", "index", "observer", "p00", "p01", "p10", "p11", "entropy_bits"], table);
        }
        AttackKind::None | AttackKind::Intercept => {}
    }
    Ok(ok(r.render(cfg.format)))
}
