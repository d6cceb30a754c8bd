use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bqdc_cli::commands::{cmd_attack, cmd_session, cmd_sweep, cmd_tables, CommandError, Output};
use bqdc_cli::config::{ConfigError, RunConfig, Settings};

/// Simulator for controlled and controller-independent bidirectional
/// quantum direct communication.
#[derive(Debug, Parser)]
#[command(name = "bqdc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Optional key=value file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// chang or ci
    #[arg(long, global = true)]
    protocol: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Message-carrying pairs (even).
    #[arg(long, global = true)]
    n: Option<String>,
    /// Pairs sacrificed in the first check.
    #[arg(long, global = true)]
    l: Option<String>,
    /// Pairs sacrificed in the second check.
    #[arg(long, global = true)]
    d: Option<String>,
    /// Decoys per transmitted sequence.
    #[arg(long, global = true)]
    decoys: Option<String>,
    /// Highest tolerated error rate in [0, 1].
    #[arg(long, global = true)]
    threshold: Option<String>,
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// start:stop:step
    #[arg(long, global = true)]
    alpha_grid: Option<String>,
    /// none, intercept, malicious-controller or listener
    #[arg(long, global = true)]
    attack: Option<String>,
    #[arg(long, global = true)]
    trials: Option<String>,
    /// text or csv
    #[arg(long, global = true)]
    format: Option<String>,
    /// Report file (tables: output directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Regenerate the three codebook tables.
    Tables {
        /// Compare against the published tables.
        #[arg(long)]
        verify: bool,
    },
    /// Run one session and report it step by step.
    Session {
        /// Alice's messages, comma separated (e.g. 10 or 10,01).
        #[arg(long)]
        msg_alice: Option<String>,
        #[arg(long)]
        msg_bob: Option<String>,
        /// Initial Bell states (phi+, phi-, psi+, psi-); one value is repeated.
        #[arg(long)]
        initial: Option<String>,
        /// Replace the label Bob echoes (two-party protocol).
        #[arg(long)]
        forge_echo: Option<String>,
        /// Eavesdropper basis policy: uniform-zx, always-z or always-x.
        #[arg(long)]
        basis: Option<String>,
        /// Tapped links, comma separated, or "all".
        #[arg(long)]
        links: Option<String>,
        /// Write the transcript here.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Executability over a grid of alpha values.
    Sweep {
        #[arg(long)]
        tol: Option<String>,
    },
    /// Monte Carlo attack campaign with exact reference values.
    Attack {
        #[arg(long)]
        basis: Option<String>,
        #[arg(long)]
        links: Option<String>,
    },
}

fn settings(cli: &Cli) -> Result<Settings, ConfigError> {
    let base = match &cli.common.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let c = &cli.common;
    let mut flags = Settings::default();
    let mut pairs: Vec<(&str, &Option<String>)> = vec![
        ("protocol", &c.protocol),
        ("seed", &c.seed),
        ("n", &c.n),
        ("l", &c.l),
        ("d", &c.d),
        ("decoys", &c.decoys),
        ("threshold", &c.threshold),
        ("alpha", &c.alpha),
        ("alpha_grid", &c.alpha_grid),
        ("attack", &c.attack),
        ("trials", &c.trials),
        ("format", &c.format),
    ];
    match &cli.command {
        Command::Tables { .. } => {}
        Command::Session {
            msg_alice,
            msg_bob,
            initial,
            forge_echo,
            basis,
            links,
            ..
        } => pairs.extend([
            ("msg_alice", msg_alice),
            ("msg_bob", msg_bob),
            ("initial", initial),
            ("forge_echo", forge_echo),
            ("basis", basis),
            ("links", links),
        ]),
        Command::Sweep { tol } => pairs.push(("tol", tol)),
        Command::Attack { basis, links } => pairs.extend([("basis", basis), ("links", links)]),
    }
    for (key, value) in pairs {
        if let Some(v) = value {
            flags.set(key, v)?;
        }
    }
    Ok(base.merged(flags))
}

fn run(cli: &Cli) -> Result<Output, CommandError> {
    let cfg = RunConfig::from_settings(&settings(cli)?)?;
    match &cli.command {
        Command::Tables { verify } => cmd_tables(&cfg, *verify, cli.common.out.as_deref()),
        Command::Session { transcript, .. } => cmd_session(&cfg, transcript.as_deref()),
        Command::Sweep { .. } => cmd_sweep(&cfg),
        Command::Attack { .. } => cmd_attack(&cfg),
    }
}

fn write(path: &Path, body: &str) -> Result<(), String> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| format!("{}: {e}", parent.display()))?;
    }
    fs::write(path, body).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let is_tables = matches!(cli.command, Command::Tables { .. });
    let mut files = output.files;
    let mut text = output.text;
    if let (Some(out), false) = (&cli.common.out, is_tables) {
        files.push((out.clone(), std::mem::take(&mut text)));
    }
    for (path, body) in &files {
        if let Err(e) = write(path, body) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    print!("{text}");
    ExitCode::from(output.status)
}
