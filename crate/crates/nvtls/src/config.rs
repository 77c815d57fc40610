//! Flat `key = value` run configuration with `system.`, `field.`, `drive.`,
//! `experiment.` and `output.` prefixes.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nvtls_core::dynamics::DriveParams;
use nvtls_core::experiments::{DEFAULT_MW_AXIS_DEG, NONSELECTIVE_RABI, RAMSEY_CARRIER};
use nvtls_core::spin::{FieldSpec, SpinSystemParams};

use crate::error::{CliError, CliResult};

/// Sequence and analysis parameters shared by the experiment commands.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentParams {
    /// MW field azimuth in the NV xy-plane, degrees.
    pub mw_axis_deg: f64,
    /// Relocate theta to the computed anti-crossing before sequence runs.
    pub at_lac: bool,
    pub nu_d: f64,
    /// Ramsey pulse flip angle, rad.
    pub flip: f64,
    pub carrier: f64,
    /// Unit-moment Rabi frequency of the Ramsey pulses, MHz.
    pub mw_rabi: f64,
    pub rabi_dt: f64,
    pub rabi_samples: usize,
    pub ramsey_dt: f64,
    pub ramsey_samples: usize,
    /// Relative peak thresholds of the Rabi and Ramsey spectra.
    pub rabi_peak_threshold: f64,
    pub ramsey_peak_threshold: f64,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            mw_axis_deg: DEFAULT_MW_AXIS_DEG,
            at_lac: false,
            nu_d: 20.0,
            flip: PI / 2.0,
            carrier: RAMSEY_CARRIER,
            mw_rabi: NONSELECTIVE_RABI,
            rabi_dt: 0.02,
            rabi_samples: 2048,
            ramsey_dt: 0.0025,
            ramsey_samples: 8192,
            rabi_peak_threshold: 0.2,
            ramsey_peak_threshold: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Write `#` metadata header lines.
    pub metadata: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: PathBuf::from("."), metadata: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub system: SpinSystemParams,
    pub field: FieldSpec,
    pub drive: DriveParams,
    pub experiment: ExperimentParams,
    pub output: OutputSpec,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SpinSystemParams::default(),
            field: FieldSpec::default(),
            drive: DriveParams { omega0: 1.7, omega1: 0.23, omega: 1.7, phase_d: 0.0 },
            experiment: ExperimentParams::default(),
            output: OutputSpec::default(),
            seed: nvtls_core::dynamics::DEFAULT_SEED,
        }
    }
}

/// Parses a real number, also accepting multiples of pi: `pi`, `0.5pi`,
/// `-2*pi`, `pi/2`, `3pi/4`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let bad = || format!("not a number: '{s}'");
    let Some(at) = s.find("pi") else {
        return s.parse::<f64>().map_err(|_| bad());
    };
    let coef = s[..at].trim_end_matches('*').trim();
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let rest = s[at + 2..].trim();
    let den = match rest.strip_prefix('/') {
        Some(d) => d.trim().parse::<f64>().map_err(|_| bad())?,
        None if rest.is_empty() => 1.0,
        None => return Err(bad()),
    };
    if den == 0.0 {
        return Err(bad());
    }
    Ok(coef * PI / den)
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("not a boolean: '{other}'")),
    }
}

/// Iterates `(line_number, key, value)` over non-blank, non-comment lines.
fn entries(text: &str) -> impl Iterator<Item = CliResult<(usize, &str, &str)>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            return None;
        }
        Some(match line.split_once('=') {
            Some((k, v)) => Ok((i + 1, k.trim(), v.trim())),
            None => Err(CliError::usage(format!("config line {}: expected key = value", i + 1))),
        })
    })
}

const PARAM_KEYS: [&str; 12] =
    ["D", "P", "gamma_e", "gamma_n1", "gamma_n2", "A1xx", "A1yy", "A1zz", "A1xz", "A2xx", "A2yy", "A2zz"];

fn set_param(p: &mut SpinSystemParams, key: &str, v: f64) -> bool {
    match key {
        "D" => p.d = v,
        "P" => p.p = v,
        "gamma_e" => p.gamma_e = v,
        "gamma_n1" => p.gamma_n1 = v,
        "gamma_n2" => p.gamma_n2 = v,
        "A1xx" => p.a1[0][0] = v,
        "A1yy" => p.a1[1][1] = v,
        "A1zz" => p.a1[2][2] = v,
        "A1xz" => {
            p.a1[0][2] = v;
            p.a1[2][0] = v;
        }
        "A2xx" => p.a2[0][0] = v,
        "A2yy" => p.a2[1][1] = v,
        "A2zz" => p.a2[2][2] = v,
        _ => return false,
    }
    true
}

fn get_param(p: &SpinSystemParams, key: &str) -> f64 {
    match key {
        "D" => p.d,
        "P" => p.p,
        "gamma_e" => p.gamma_e,
        "gamma_n1" => p.gamma_n1,
        "gamma_n2" => p.gamma_n2,
        "A1xx" => p.a1[0][0],
        "A1yy" => p.a1[1][1],
        "A1zz" => p.a1[2][2],
        "A1xz" => p.a1[0][2],
        "A2xx" => p.a2[0][0],
        "A2yy" => p.a2[1][1],
        _ => p.a2[2][2],
    }
}

/// Spin constants as bare `key = value` lines, MHz and MHz/G.
pub fn params_to_kv(p: &SpinSystemParams) -> String {
    PARAM_KEYS.iter().fold(String::new(), |mut s, k| {
        let _ = writeln!(s, "{k} = {}", get_param(p, k));
        s
    })
}

/// Reads bare-key spin constants; missing keys keep their defaults.
pub fn params_from_kv(text: &str) -> CliResult<SpinSystemParams> {
    let mut p = SpinSystemParams::default();
    for e in entries(text) {
        let (line, k, v) = e?;
        let v = parse_number(v).map_err(|m| CliError::usage(format!("config line {line}: {m}")))?;
        if !set_param(&mut p, k, v) {
            return Err(CliError::usage(format!("config line {line}: unknown key '{k}'")));
        }
    }
    p.validate()?;
    Ok(p)
}

impl RunConfig {
    /// Applies one prefixed key. Values are parsed with [`parse_number`].
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let num = || parse_number(value).map_err(|m| CliError::usage(format!("{key}: {m}")));
        let count = || -> CliResult<usize> {
            let n = num()?;
            if n >= 0.0 && n.fract() == 0.0 && n <= usize::MAX as f64 {
                Ok(n as usize)
            } else {
                Err(CliError::usage(format!("{key}: expected a non-negative integer")))
            }
        };
        let unknown = || CliError::usage(format!("unknown config key '{key}'"));
        let (section, name) = key.split_once('.').unwrap_or(("", key));
        let e = &mut self.experiment;
        match (section, name) {
            ("system", k) => {
                let v = num()?;
                if !set_param(&mut self.system, k, v) {
                    return Err(unknown());
                }
            }
            ("field", "B") => self.field.b = num()?,
            ("field", "theta") => self.field.theta_deg = num()?,
            ("field", "phi") => self.field.phi_deg = num()?,
            ("drive", "omega0") => self.drive.omega0 = num()?,
            ("drive", "omega1") => self.drive.omega1 = num()?,
            ("drive", "omega") => self.drive.omega = num()?,
            ("drive", "phase") => self.drive.phase_d = num()?,
            ("experiment", "mw_axis_deg") => e.mw_axis_deg = num()?,
            ("experiment", "at_lac") => e.at_lac = parse_bool(value).map_err(CliError::Usage)?,
            ("experiment", "nu_d") => e.nu_d = num()?,
            ("experiment", "flip") => e.flip = num()?,
            ("experiment", "carrier") => e.carrier = num()?,
            ("experiment", "mw_rabi") => e.mw_rabi = num()?,
            ("experiment", "rabi_dt") => e.rabi_dt = num()?,
            ("experiment", "rabi_samples") => e.rabi_samples = count()?,
            ("experiment", "ramsey_dt") => e.ramsey_dt = num()?,
            ("experiment", "ramsey_samples") => e.ramsey_samples = count()?,
            ("experiment", "rabi_peak_threshold") => e.rabi_peak_threshold = num()?,
            ("experiment", "ramsey_peak_threshold") => e.ramsey_peak_threshold = num()?,
            ("output", "dir") => self.output.dir = PathBuf::from(value),
            ("output", "metadata") => self.output.metadata = parse_bool(value).map_err(CliError::Usage)?,
            ("", "seed") => {
                self.seed = value.parse().map_err(|_| CliError::usage(format!("seed: not an integer: '{value}'")))?
            }
            _ => return Err(unknown()),
        }
        Ok(())
    }

    /// Defaults overlaid with the keys in `text`.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Self::default();
        for e in entries(text) {
            let (line, k, v) = e?;
            cfg.set(k, v).map_err(|err| match err {
                CliError::Usage(m) => CliError::usage(format!("config line {line}: {m}")),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Checks every physical section.
    pub fn validate(&self) -> CliResult<()> {
        self.system.validate()?;
        self.field.validate()?;
        self.drive.validate()?;
        let e = &self.experiment;
        for t in [e.rabi_peak_threshold, e.ramsey_peak_threshold] {
            if !(t > 0.0 && t < 1.0) {
                return Err(CliError::usage("peak thresholds must lie in (0, 1)"));
            }
        }
        if !(e.rabi_dt > 0.0 && e.ramsey_dt > 0.0) {
            return Err(CliError::usage("sample spacings must be positive"));
        }
        Ok(())
    }

    /// Complete configuration as prefixed `key = value` lines; parsing the
    /// result reproduces `self`.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for k in PARAM_KEYS {
            let _ = writeln!(s, "system.{k} = {}", get_param(&self.system, k));
        }
        let f = &self.field;
        let d = &self.drive;
        let e = &self.experiment;
        let lines: [(&str, String); 22] = [
            ("field.B", f.b.to_string()),
            ("field.theta", f.theta_deg.to_string()),
            ("field.phi", f.phi_deg.to_string()),
            ("drive.omega0", d.omega0.to_string()),
            ("drive.omega1", d.omega1.to_string()),
            ("drive.omega", d.omega.to_string()),
            ("drive.phase", d.phase_d.to_string()),
            ("experiment.mw_axis_deg", e.mw_axis_deg.to_string()),
            ("experiment.at_lac", e.at_lac.to_string()),
            ("experiment.nu_d", e.nu_d.to_string()),
            ("experiment.flip", e.flip.to_string()),
            ("experiment.carrier", e.carrier.to_string()),
            ("experiment.mw_rabi", e.mw_rabi.to_string()),
            ("experiment.rabi_dt", e.rabi_dt.to_string()),
            ("experiment.rabi_samples", e.rabi_samples.to_string()),
            ("experiment.ramsey_dt", e.ramsey_dt.to_string()),
            ("experiment.ramsey_samples", e.ramsey_samples.to_string()),
            ("experiment.rabi_peak_threshold", e.rabi_peak_threshold.to_string()),
            ("experiment.ramsey_peak_threshold", e.ramsey_peak_threshold.to_string()),
            ("output.dir", self.output.dir.display().to_string()),
            ("output.metadata", self.output.metadata.to_string()),
            ("seed", self.seed.to_string()),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
