//! Plain-text pulse schedules, one element per line:
//!
//! ```text
//! laser
//! mw carrier=2876.6 flip=0.5pi phase=0 rabi=10 moment=1
//! rf freq=1.7 amp=3.62 dur=<t> phase=0
//! delay dur=<tau>
//! read
//! ```
//!
//! `<name>` placeholders are substituted from a variable list before parsing.
//! `#` starts a comment. `phase`, `rabi` and `moment` are optional.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nvtls_core::experiments::{MwPulse, PulseElement, PulseSequence, RfPulse, NONSELECTIVE_RABI};

use crate::config::parse_number;
use crate::error::{CliError, CliResult};

/// Names of all `<name>` placeholders in `text`, sorted.
pub fn placeholders(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        let after = &rest[open + 1..];
        match after.find('>') {
            Some(close) => {
                out.insert(after[..close].to_string());
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    out
}

/// Replaces every `<name>` with its value; unresolved names are an error.
pub fn substitute(text: &str, vars: &[(&str, f64)]) -> CliResult<String> {
    let mut s = text.to_string();
    for (name, value) in vars {
        s = s.replace(&format!("<{name}>"), &value.to_string());
    }
    match placeholders(&s).into_iter().next() {
        Some(missing) => Err(CliError::usage(format!("schedule placeholder <{missing}> has no value"))),
        None => Ok(s),
    }
}

struct Fields<'a> {
    line: usize,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn parse(line: usize, tokens: &[&'a str], allowed: &[&str]) -> CliResult<Self> {
        let mut pairs = Vec::new();
        for t in tokens {
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("schedule line {line}: expected key=value, got '{t}'")))?;
            if !allowed.contains(&k) {
                return Err(CliError::usage(format!("schedule line {line}: unknown key '{k}'")));
            }
            if pairs.iter().any(|(q, _)| *q == k) {
                return Err(CliError::usage(format!("schedule line {line}: duplicate key '{k}'")));
            }
            pairs.push((k, v));
        }
        Ok(Self { line, pairs })
    }

    fn get(&self, key: &str, default: Option<f64>) -> CliResult<f64> {
        match self.pairs.iter().find(|(k, _)| *k == key) {
            Some((_, v)) => parse_number(v).map_err(|m| CliError::usage(format!("schedule line {}: {key}: {m}", self.line))),
            None => default.ok_or_else(|| CliError::usage(format!("schedule line {}: missing '{key}'", self.line))),
        }
    }
}

/// Parses a schedule without placeholders into a validated sequence.
pub fn parse_schedule(text: &str) -> CliResult<PulseSequence> {
    if let Some(p) = placeholders(text).into_iter().next() {
        return Err(CliError::usage(format!("schedule placeholder <{p}> has no value")));
    }
    let mut elements = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = body.split_whitespace().collect();
        let Some((&kind, rest)) = tokens.split_first() else { continue };
        let el = match kind {
            "laser" | "read" if !rest.is_empty() => {
                return Err(CliError::usage(format!("schedule line {line}: '{kind}' takes no arguments")));
            }
            "laser" => PulseElement::Laser,
            "read" => PulseElement::Read,
            "mw" => {
                let f = Fields::parse(line, rest, &["carrier", "flip", "phase", "rabi", "moment"])?;
                PulseElement::Mw(MwPulse {
                    carrier: f.get("carrier", None)?,
                    flip: f.get("flip", None)?,
                    phase: f.get("phase", Some(0.0))?,
                    rabi: f.get("rabi", Some(NONSELECTIVE_RABI))?,
                    moment: f.get("moment", Some(1.0))?,
                })
            }
            "rf" => {
                let f = Fields::parse(line, rest, &["freq", "amp", "dur", "phase"])?;
                PulseElement::Rf(RfPulse {
                    freq: f.get("freq", None)?,
                    amp: f.get("amp", None)?,
                    duration: f.get("dur", None)?,
                    phase: f.get("phase", Some(0.0))?,
                })
            }
            "delay" => PulseElement::Delay(Fields::parse(line, rest, &["dur"])?.get("dur", None)?),
            other => return Err(CliError::usage(format!("schedule line {line}: unknown element '{other}'"))),
        };
        elements.push(el);
    }
    Ok(PulseSequence::new(elements)?)
}

/// Writes a sequence back in schedule syntax; parsing the result reproduces it.
pub fn format_schedule(seq: &PulseSequence) -> String {
    let mut s = String::new();
    for el in &seq.elements {
        let _ = match el {
            PulseElement::Laser => writeln!(s, "laser"),
            PulseElement::Read => writeln!(s, "read"),
            PulseElement::Mw(p) => writeln!(
                s,
                "mw carrier={} flip={} phase={} rabi={} moment={}",
                p.carrier, p.flip, p.phase, p.rabi, p.moment
            ),
            PulseElement::Rf(p) => writeln!(s, "rf freq={} amp={} dur={} phase={}", p.freq, p.amp, p.duration, p.phase),
            PulseElement::Delay(d) => writeln!(s, "delay dur={d}"),
        };
    }
    s
}
