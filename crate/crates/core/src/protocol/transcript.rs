//! Append-only session log.
//!
//! Serialized one event per line as `key=value` fields in a fixed order:
//! `step`, `actor`, `vis`, `event`, then the event's own payload fields.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use crate::codebook::TwoBitMessage;
use crate::qstate::{Basis, BellLabel, PauliOp, SingleQubitState};

use super::{AbortReason, CheckKind, Link};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Actor {
    Alice,
    Bob,
    Charlie,
}

impl Actor {
    pub fn name(self) -> &'static str {
        match self {
            Actor::Alice => "alice",
            Actor::Bob => "bob",
            Actor::Charlie => "charlie",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visibility {
    /// Sent over the public classical channel.
    Public,
    /// Local to the acting party.
    Private,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    PreparePairs { first: usize, labels: Vec<BellLabel> },
    Transmit { link: Link, items: usize },
    Confirm,
    CheckSample { check: CheckKind, positions: Vec<usize> },
    CheckLabels { check: CheckKind, labels: Vec<BellLabel> },
    CheckBases { check: CheckKind, bases: Vec<Basis> },
    CheckOutcomes { check: CheckKind, bits: Vec<u8> },
    CheckResult { check: CheckKind, errors: usize, total: usize, pass: bool },
    Encode { pairs: Vec<usize>, ops: Vec<PauliOp> },
    DecoyInsert { check: CheckKind, positions: Vec<usize>, states: Vec<SingleQubitState> },
    DecoyAnnounce { check: CheckKind, positions: Vec<usize>, bases: Vec<Basis> },
    DecoyOutcomes { check: CheckKind, outcomes: Vec<SingleQubitState> },
    BellMeasure { pair: usize, label: BellLabel },
    AnnounceInitial { pairs: Vec<usize>, labels: Vec<BellLabel> },
    AnnounceResult { label: BellLabel },
    SelectInitial { label: BellLabel },
    Echo { label: BellLabel },
    EchoCheck { delta: u8 },
    Decode { pair: usize, message: TwoBitMessage },
    Abort { reason: AbortReason },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::PreparePairs { .. } => "prepare",
            EventKind::Transmit { .. } => "transmit",
            EventKind::Confirm => "confirm",
            EventKind::CheckSample { .. } => "check-sample",
            EventKind::CheckLabels { .. } => "check-labels",
            EventKind::CheckBases { .. } => "check-bases",
            EventKind::CheckOutcomes { .. } => "check-outcomes",
            EventKind::CheckResult { .. } => "check-result",
            EventKind::Encode { .. } => "encode",
            EventKind::DecoyInsert { .. } => "decoy-insert",
            EventKind::DecoyAnnounce { .. } => "decoy-announce",
            EventKind::DecoyOutcomes { .. } => "decoy-outcomes",
            EventKind::BellMeasure { .. } => "bell-measure",
            EventKind::AnnounceInitial { .. } => "announce-initial",
            EventKind::AnnounceResult { .. } => "announce-result",
            EventKind::SelectInitial { .. } => "select-initial",
            EventKind::Echo { .. } => "echo",
            EventKind::EchoCheck { .. } => "echo-check",
            EventKind::Decode { .. } => "decode",
            EventKind::Abort { .. } => "abort",
        }
    }

    pub fn visibility(&self) -> Visibility {
        match self {
            EventKind::PreparePairs { .. }
            | EventKind::Encode { .. }
            | EventKind::DecoyInsert { .. }
            | EventKind::BellMeasure { .. }
            | EventKind::SelectInitial { .. }
            | EventKind::Decode { .. } => Visibility::Private,
            _ => Visibility::Public,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub step: u8,
    pub actor: Actor,
    pub kind: EventKind,
}

fn join<T>(out: &mut String, items: &[T], f: impl Fn(&T, &mut String)) {
    if items.is_empty() {
        out.push('-');
    }
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        f(item, out);
    }
}

fn labels(out: &mut String, key: &str, items: &[BellLabel]) {
    let _ = write!(out, " {key}=");
    join(out, items, |l, o| o.push_str(l.name()));
}

fn indices(out: &mut String, key: &str, items: &[usize]) {
    let _ = write!(out, " {key}=");
    join(out, items, |i, o| {
        let _ = write!(o, "{i}");
    });
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vis = match self.kind.visibility() {
            Visibility::Public => "public",
            Visibility::Private => "private",
        };
        let mut s = String::new();
        let _ = write!(
            s,
            "step={} actor={} vis={} event={}",
            self.step,
            self.actor.name(),
            vis,
            self.kind.name()
        );
        match &self.kind {
            EventKind::PreparePairs { first, labels: ls } => {
                let _ = write!(s, " first={first}");
                labels(&mut s, "labels", ls);
            }
            EventKind::Transmit { link, items } => {
                let _ = write!(s, " link={} items={items}", link.name());
            }
            EventKind::Confirm => {}
            EventKind::CheckSample { check, positions } => {
                let _ = write!(s, " check={}", check.name());
                indices(&mut s, "positions", positions);
            }
            EventKind::CheckLabels { check, labels: ls } => {
                let _ = write!(s, " check={}", check.name());
                labels(&mut s, "labels", ls);
            }
            EventKind::CheckBases { check, bases } => {
                let _ = write!(s, " check={} bases=", check.name());
                join(&mut s, bases, |b, o| o.push_str(b.symbol()));
            }
            EventKind::CheckOutcomes { check, bits } => {
                let _ = write!(s, " check={} bits=", check.name());
                join(&mut s, bits, |b, o| {
                    let _ = write!(o, "{b}");
                });
            }
            EventKind::CheckResult { check, errors, total, pass } => {
                let rate = if *total == 0 { 0.0 } else { *errors as f64 / *total as f64 };
                let _ = write!(
                    s,
                    " check={} errors={errors} total={total} rate={rate:.6} pass={pass}",
                    check.name()
                );
            }
            EventKind::Encode { pairs, ops } => {
                indices(&mut s, "pairs", pairs);
                s.push_str(" ops=");
                join(&mut s, ops, |op, o| o.push_str(op.name()));
            }
            EventKind::DecoyInsert { check, positions, states } => {
                let _ = write!(s, " check={}", check.name());
                indices(&mut s, "positions", positions);
                s.push_str(" states=");
                join(&mut s, states, |st, o| o.push_str(st.name()));
            }
            EventKind::DecoyAnnounce { check, positions, bases } => {
                let _ = write!(s, " check={}", check.name());
                indices(&mut s, "positions", positions);
                s.push_str(" bases=");
                join(&mut s, bases, |b, o| o.push_str(b.symbol()));
            }
            EventKind::DecoyOutcomes { check, outcomes } => {
                let _ = write!(s, " check={} outcomes=", check.name());
                join(&mut s, outcomes, |st, o| o.push_str(st.name()));
            }
            EventKind::BellMeasure { pair, label } => {
                let _ = write!(s, " pair={pair} label={label}");
            }
            EventKind::AnnounceInitial { pairs, labels: ls } => {
                indices(&mut s, "pairs", pairs);
                labels(&mut s, "labels", ls);
            }
            EventKind::AnnounceResult { label }
            | EventKind::SelectInitial { label }
            | EventKind::Echo { label } => {
                let _ = write!(s, " label={label}");
            }
            EventKind::EchoCheck { delta } => {
                let _ = write!(s, " delta={delta}");
            }
            EventKind::Decode { pair, message } => {
                let _ = write!(s, " pair={pair} message={message}");
            }
            EventKind::Abort { reason } => {
                let _ = write!(s, " reason={}", reason.name());
            }
        }
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    events: Vec<Event>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: u8, actor: Actor, kind: EventKind) {
        self.events.push(Event { step, actor, kind });
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Only what an outsider on the classical channel sees.
    pub fn public_view(&self) -> Transcript {
        self.filtered(|e| e.kind.visibility() == Visibility::Public)
    }

    /// Public events plus the private events of `actor`.
    pub fn view_of(&self, actor: Actor) -> Transcript {
        self.filtered(|e| e.kind.visibility() == Visibility::Public || e.actor == actor)
    }

    /// Events logged before protocol step `step` began.
    pub fn before_step(&self, step: u8) -> Transcript {
        self.filtered(|e| e.step < step)
    }

    fn filtered(&self, keep: impl Fn(&Event) -> bool) -> Transcript {
        Transcript {
            events: self.events.iter().filter(|e| keep(e)).cloned().collect(),
        }
    }

    pub fn aborted(&self) -> Option<AbortReason> {
        self.events.iter().find_map(|e| match e.kind {
            EventKind::Abort { reason } => Some(reason),
            _ => None,
        })
    }

    /// Line-delimited text form; byte-identical for identical event lists.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let _ = writeln!(out, "{e}");
        }
        out
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
