//! Run configuration: an optional `key=value` file overridden by flags.
//!
//! Both sources are merged as raw strings first and parsed in one place, so
//! every diagnostic names the offending field the same way.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use bqdc_core::adversary::{AttackModel, BasisPolicy, LiePolicy, Links};
use bqdc_core::codebook::{TwoBitMessage, CLASSIFICATION_TOLERANCE};
use bqdc_core::protocol::{Link, Protocol, SessionConfig};
use bqdc_core::qstate::{BellLabel, FRAC_1_SQRT_2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("config file {path}, line {line}: expected key=value")]
    Syntax { path: PathBuf, line: usize },
    #[error("config file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    fn invalid(field: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// Field name for validation errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

/// Keys accepted in a config file and as flag overrides. Hyphens and
/// underscores are interchangeable.
pub const KEYS: [&str; 19] = [
    "protocol", "seed", "n", "l", "d", "decoys", "threshold", "alpha", "alpha_grid", "tol",
    "attack", "basis", "links", "trials", "format", "msg_alice", "msg_bob", "initial",
    "forge_echo",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Csv,
}

impl OutputFormat {
    pub fn name(self) -> &'static str {
        match self {
            OutputFormat::Text => "text",
            OutputFormat::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    None,
    Intercept,
    MaliciousController,
    Listener,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::Intercept => "intercept",
            AttackKind::MaliciousController => "malicious-controller",
            AttackKind::Listener => "listener",
        }
    }
}

/// Raw settings in the order they were supplied, keyed by normalized name.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                path: path.to_path_buf(),
                line: i + 1,
            })?;
            s.set(k, v.trim())?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = normalize(key);
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::invalid(&key, "unknown key"));
        }
        self.values.insert(key, value.to_string());
        Ok(())
    }

    /// Applies `overrides` on top of `self`.
    pub fn merged(mut self, overrides: Settings) -> Self {
        self.values.extend(overrides.values);
        self
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e: T::Err| ConfigError::invalid(key, format!("cannot parse {v:?}: {e}"))),
        }
    }
}

/// `start:stop:step`, inclusive of `stop` up to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl AlphaGrid {
    pub fn parse(spec: &str) -> Result<Self, ConfigError> {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(ConfigError::invalid("alpha_grid", "expected start:stop:step"));
        };
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| ConfigError::invalid("alpha_grid", format!("not a number: {s:?}")))
        };
        let grid = AlphaGrid {
            start: num(start)?,
            stop: num(stop)?,
            step: num(step)?,
        };
        if grid.step <= 0.0 || grid.step.is_nan() || grid.stop < grid.start {
            return Err(ConfigError::invalid("alpha_grid", "need step > 0 and stop >= start"));
        }
        if !(grid.start > 0.0 && grid.stop < 1.0) {
            return Err(ConfigError::invalid("alpha_grid", "values must lie in (0, 1)"));
        }
        Ok(grid)
    }

    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| self.start + k as f64 * self.step).collect()
    }
}

/// α ∈ {0.01, 0.02, …, 0.99} plus 1/√2, sorted.
pub fn default_alpha_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (1..100).map(|k| k as f64 / 100.0).collect();
    grid.push(FRAC_1_SQRT_2);
    grid.sort_by(f64::total_cmp);
    grid
}

/// Fully validated configuration shared by all subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub session: SessionConfig,
    pub alpha: f64,
    pub alpha_grid: Option<AlphaGrid>,
    pub tol: f64,
    pub attack: AttackKind,
    pub basis: BasisPolicy,
    pub links: Links,
    pub trials: usize,
    pub format: OutputFormat,
    pub msg_alice: Option<Vec<TwoBitMessage>>,
    pub msg_bob: Option<Vec<TwoBitMessage>>,
    pub initial: Option<Vec<BellLabel>>,
    pub forge_echo: Option<BellLabel>,
}

fn parse_list<T: std::str::FromStr>(field: &str, v: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(|item| {
            item.trim()
                .parse()
                .map_err(|e: T::Err| ConfigError::invalid(field, e.to_string()))
        })
        .collect()
}

fn parse_links(v: &str) -> Result<Links, ConfigError> {
    if v == "all" {
        return Ok(Links::ALL);
    }
    let mut links = Links::NONE;
    for name in v.split(',').map(str::trim) {
        let link = Link::ALL
            .into_iter()
            .find(|l| l.name() == name)
            .ok_or_else(|| ConfigError::invalid("links", format!("unknown link {name:?}")))?;
        links = links.with(link);
    }
    Ok(links)
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self, ConfigError> {
        let defaults = SessionConfig::default();
        let protocol = match s.get("protocol").unwrap_or("chang") {
            "chang" => Protocol::Chang,
            "ci" => Protocol::ControllerIndependent,
            other => return Err(ConfigError::invalid("protocol", format!("expected chang or ci, got {other:?}"))),
        };
        let session = SessionConfig {
            n: s.parse_or("n", defaults.n)?,
            l: s.parse_or("l", defaults.l)?,
            d: s.parse_or("d", defaults.d)?,
            decoy_count: s.parse_or("decoys", defaults.decoy_count)?,
            error_threshold: s.parse_or("threshold", defaults.error_threshold)?,
            seed: s.parse_or("seed", defaults.seed)?,
        };
        if let Err(e) = session.validate() {
            return Err(ConfigError::invalid(e.field(), e.to_string()));
        }
        let alpha: f64 = s.parse_or("alpha", FRAC_1_SQRT_2)?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ConfigError::invalid("alpha", "must lie in (0, 1)"));
        }
        let tol: f64 = s.parse_or("tol", CLASSIFICATION_TOLERANCE)?;
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(ConfigError::invalid("tol", "must be a finite non-negative number"));
        }
        let attack = match s.get("attack").unwrap_or("none") {
            "none" => AttackKind::None,
            "intercept" => AttackKind::Intercept,
            "malicious-controller" => AttackKind::MaliciousController,
            "listener" => AttackKind::Listener,
            other => {
                return Err(ConfigError::invalid(
                    "attack",
                    format!("expected none, intercept, malicious-controller or listener, got {other:?}"),
                ))
            }
        };
        let basis = match s.get("basis").unwrap_or("uniform-zx") {
            "uniform-zx" => BasisPolicy::UniformZX,
            "always-z" => BasisPolicy::AlwaysZ,
            "always-x" => BasisPolicy::AlwaysX,
            other => return Err(ConfigError::invalid("basis", format!("unknown policy {other:?}"))),
        };
        let links = s.get("links").map(parse_links).transpose()?.unwrap_or(Links::ALICE_TO_BOB);
        let trials: usize = s.parse_or("trials", 1000)?;
        if trials == 0 {
            return Err(ConfigError::invalid("trials", "must be at least 1"));
        }
        let format = match s.get("format").unwrap_or("text") {
            "text" => OutputFormat::Text,
            "csv" => OutputFormat::Csv,
            other => return Err(ConfigError::invalid("format", format!("expected text or csv, got {other:?}"))),
        };
        Ok(RunConfig {
            protocol,
            session,
            alpha,
            alpha_grid: s.get("alpha_grid").map(AlphaGrid::parse).transpose()?,
            tol,
            attack,
            basis,
            links,
            trials,
            format,
            msg_alice: s.get("msg_alice").map(|v| parse_list("msg_alice", v)).transpose()?,
            msg_bob: s.get("msg_bob").map(|v| parse_list("msg_bob", v)).transpose()?,
            initial: s.get("initial").map(|v| parse_list("initial", v)).transpose()?,
            forge_echo: s
                .get("forge_echo")
                .map(|v| v.parse().map_err(|e: bqdc_core::qstate::ParseLabelError| ConfigError::invalid("forge_echo", e.to_string())))
                .transpose()?,
        })
    }

    pub fn attack_model(&self) -> AttackModel {
        match self.attack {
            AttackKind::None => AttackModel::None,
            AttackKind::Intercept => AttackModel::InterceptResend {
                policy: self.basis,
                links: self.links,
            },
            AttackKind::MaliciousController => AttackModel::MaliciousController(LiePolicy::UniformWrong),
            AttackKind::Listener => AttackModel::PassiveListener,
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        self.alpha_grid.map_or_else(default_alpha_grid, |g| g.points())
    }

    /// Effective settings, in a fixed order, for echoing into reports.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let list = |items: &Option<Vec<String>>| items.as_ref().map_or("random".into(), |v| v.join(","));
        let grid = self
            .alpha_grid
            .map_or("default".into(), |g| format!("{}:{}:{}", g.start, g.stop, g.step));
        let links: Vec<&str> = self.links.iter().map(Link::name).collect();
        vec![
            ("protocol", self.protocol.name().into()),
            ("seed", self.session.seed.to_string()),
            ("n", self.session.n.to_string()),
            ("l", self.session.l.to_string()),
            ("d", self.session.d.to_string()),
            ("decoys", self.session.decoy_count.to_string()),
            ("threshold", self.session.error_threshold.to_string()),
            ("alpha", self.alpha.to_string()),
            ("alpha_grid", grid),
            ("tol", self.tol.to_string()),
            ("attack", self.attack.name().into()),
            ("basis", self.basis.name().into()),
            ("links", if links.is_empty() { "-".into() } else { links.join(",") }),
            ("trials", self.trials.to_string()),
            ("format", self.format.name().into()),
            ("msg_alice", list(&self.msg_alice.as_ref().map(|v| v.iter().map(|m| m.to_string()).collect()))),
            ("msg_bob", list(&self.msg_bob.as_ref().map(|v| v.iter().map(|m| m.to_string()).collect()))),
            ("initial", list(&self.initial.as_ref().map(|v| v.iter().map(|l| l.name().to_string()).collect()))),
            ("forge_echo", self.forge_echo.map_or("-".into(), |l| l.name().to_string())),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(pairs: &[(&str, &str)]) -> Settings {
        let mut s = Settings::default();
        for (k, v) in pairs {
            s.set(k, v).unwrap();
        }
        s
    }

    #[test]
    fn defaults() {
        let cfg = RunConfig::from_settings(&Settings::default()).unwrap();
        assert_eq!(cfg.protocol, Protocol::Chang);
        assert_eq!(cfg.session, SessionConfig::default());
        assert_eq!(cfg.links, Links::ALICE_TO_BOB);
        assert_eq!(cfg.grid().len(), 100);
    }

    #[test]
    fn flags_override_file() {
        let file = Settings::parse("# comment\nseed = 7\nn=4\nprotocol=ci\n", Path::new("x.cfg")).unwrap();
        let flags = settings(&[("seed", "9")]);
        let cfg = RunConfig::from_settings(&file.merged(flags)).unwrap();
        assert_eq!(cfg.session.seed, 9);
        assert_eq!(cfg.session.n, 4);
        assert_eq!(cfg.protocol, Protocol::ControllerIndependent);
    }

    #[test]
    fn errors_name_the_field() {
        let cases: [(&str, &str); 8] = [
            ("n", "3"),
            ("threshold", "1.5"),
            ("alpha", "1"),
            ("trials", "0"),
            ("attack", "quantum"),
            ("alpha_grid", "0.5:0.1:0.1"),
            ("msg_alice", "12"),
            ("initial", "phi"),
        ];
        for (k, v) in cases {
            let err = RunConfig::from_settings(&settings(&[(k, v)])).unwrap_err();
            assert_eq!(err.field(), Some(k), "{err}");
            assert!(err.to_string().starts_with(k));
        }
        let err = Settings::default().set("colour", "red").unwrap_err();
        assert_eq!(err.field(), Some("colour"));
        assert!(matches!(
            Settings::parse("seed 3", Path::new("c")),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn grid_parsing() {
        let g = AlphaGrid::parse("0.1:0.9:0.1").unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 9);
        assert!((pts[8] - 0.9).abs() < 1e-12);
        assert!(AlphaGrid::parse("0:0.5:0.1").is_err());
        assert!(AlphaGrid::parse("0.1:0.5").is_err());
    }

    #[test]
    fn links_parse() {
        let cfg = RunConfig::from_settings(&settings(&[("links", "charlie-bob,bob-alice")])).unwrap();
        assert!(cfg.links.contains(Link::CharlieToBob) && cfg.links.contains(Link::BobToAlice));
        assert_eq!(cfg.links.iter().count(), 2);
        assert!(RunConfig::from_settings(&settings(&[("links", "eve-alice")])).is_err());
    }
}
