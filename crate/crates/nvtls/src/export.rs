//! CSV and key-value writers. Every CSV starts with optional `# key=value`
//! metadata lines followed by one header row.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nvtls_core::dynamics::BlochTrace;
use nvtls_core::experiments::{ExperimentTrace, LineKind, RamseyLine};
use nvtls_core::signal::{PeakList, SpectrumData, TimeTrace};
use nvtls_core::spectra::{LevelCurves, TlsDescriptor};

use crate::error::{CliError, CliResult};

pub type Meta = Vec<(String, String)>;

pub fn meta_pair(key: &str, value: impl ToString) -> (String, String) {
    (key.to_string(), value.to_string())
}

/// A table of text cells with its metadata, written in one pass.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub meta: Meta,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(meta: Meta, header: &[&str]) -> Self {
        Self { meta, header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(f64::to_string).collect());
    }

    pub fn to_writer<W: Write>(&self, mut w: W, metadata: bool) -> std::io::Result<()> {
        if metadata {
            for (k, v) in &self.meta {
                writeln!(w, "# {k}={v}")?;
            }
        }
        let mut c = csv::Writer::from_writer(w);
        c.write_record(&self.header)?;
        for r in &self.rows {
            c.write_record(r)?;
        }
        c.flush()?;
        Ok(())
    }

    pub fn write(&self, path: &Path, metadata: bool) -> CliResult<()> {
        let f = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.to_writer(&mut w, metadata).map_err(|e| CliError::io(path, e))?;
        w.flush().map_err(|e| CliError::io(path, e))
    }
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// First column `theta_deg`, then one raw MHz column per track. The mean
/// over all reported tracks and grid points goes into the metadata.
pub fn level_curves_table(c: &LevelCurves, mut meta: Meta) -> Table {
    let n: usize = c.curves.iter().map(Vec::len).sum();
    let mean = c.curves.iter().flatten().sum::<f64>() / n.max(1) as f64;
    meta.push(meta_pair("mean_mhz", mean));
    let mut header = vec!["theta_deg".to_string()];
    header.extend(c.track_ids.iter().map(|id| format!("track_{id}")));
    let mut t = Table { meta, header, rows: Vec::new() };
    for (k, th) in c.theta_grid.iter().enumerate() {
        let mut row = vec![*th];
        row.extend(c.curves.iter().map(|curve| curve[k]));
        t.push_numbers(&row);
    }
    t
}

/// Single column of eigenvalues at one field.
pub fn eigenvalue_table(values: &[f64], mut meta: Meta, theta_deg: f64) -> Table {
    meta.push(meta_pair("theta_deg", theta_deg));
    let mut t = Table::new(meta, &["eigenvalue_mhz"]);
    for v in values {
        t.push_numbers(&[*v]);
    }
    t
}

pub fn time_trace_table(tr: &TimeTrace, value: &str, mut meta: Meta) -> Table {
    meta.extend(tr.meta.iter().cloned());
    let mut t = Table::new(meta, &["time_us", value]);
    for (time, v) in tr.times().iter().zip(tr.samples()) {
        t.push_numbers(&[*time, *v]);
    }
    t
}

pub fn experiment_trace_table(tr: &ExperimentTrace, mut meta: Meta) -> Table {
    meta.extend(tr.meta.iter().cloned());
    meta.extend(tr.warnings.iter().map(|w| meta_pair("warning", w)));
    let mut t = Table::new(meta, &["time_us", "ms0_population"]);
    for (time, v) in tr.axis.iter().zip(&tr.signal) {
        t.push_numbers(&[*time, *v]);
    }
    t
}

pub fn bloch_table(b: &BlochTrace, mut meta: Meta) -> Table {
    meta.push(meta_pair("frame", format!("{:?}", b.frame)));
    let mut t = Table::new(meta, &["time_us", "sx", "sy", "sz"]);
    for (time, v) in b.times.iter().zip(&b.xyz) {
        t.push_numbers(&[*time, v[0], v[1], v[2]]);
    }
    t
}

fn axis_name(s: &SpectrumData) -> &'static str {
    if s.is_mhz_axis() {
        "frequency_mhz"
    } else {
        "frequency_over_omega1"
    }
}

pub fn spectrum_table(s: &SpectrumData, mut meta: Meta) -> Table {
    meta.push(meta_pair("df", s.df));
    meta.push(meta_pair("n_samples", s.n_samples));
    meta.push(meta_pair("n_padded", s.n_padded));
    meta.push(meta_pair("axis_scale_mhz", s.axis_scale));
    let mut t = Table::new(meta, &[axis_name(s), "amplitude", "phase_rad"]);
    for (k, f) in s.frequencies().iter().enumerate() {
        t.push_numbers(&[*f, s.amplitudes[k], s.phase[k]]);
    }
    t
}

/// Peak list, strongest first. With `labels`, each row also names the
/// predicted Ramsey line it was matched to, or `unassigned`.
pub fn peaks_table(s: &SpectrumData, peaks: &PeakList, labels: Option<&[Option<RamseyLine>]>, meta: Meta) -> Table {
    let mut header = vec![axis_name(s), "amplitude", "bin"];
    if labels.is_some() {
        header.extend(["kind", "level_i", "level_j", "predicted_mhz"]);
    }
    let mut t = Table::new(meta, &header);
    for (k, p) in peaks.peaks.iter().enumerate() {
        let mut row = vec![p.frequency.to_string(), p.amplitude.to_string(), p.bin.to_string()];
        if let Some(labels) = labels {
            match labels.get(k).copied().flatten() {
                Some(l) => row.extend([
                    match l.kind {
                        LineKind::ZeroQuantum => "zero_quantum".to_string(),
                        LineKind::SingleQuantum => "single_quantum".to_string(),
                    },
                    l.levels.0.to_string(),
                    l.levels.1.to_string(),
                    l.frequency.to_string(),
                ]),
                None => row.extend(["unassigned".to_string(), String::new(), String::new(), String::new()]),
            }
        }
        t.rows.push(row);
    }
    t
}

/// `key = value` report of a two-level system. `field_b` adds the
/// `2 gamma_e B cos(theta*)` anti-crossing condition.
pub fn tls_report(d: &TlsDescriptor, gamma_e: f64, field_b: f64) -> String {
    let mut s = String::new();
    if let Some(th) = d.theta_star {
        let _ = writeln!(s, "theta_star_deg = {th}");
        let _ = writeln!(s, "lac_condition_mhz = {}", 2.0 * gamma_e * field_b * th.to_radians().cos());
    }
    let _ = writeln!(s, "omega0_mhz = {}", d.omega0);
    let _ = writeln!(s, "moment_sz = {}", d.moment);
    let _ = writeln!(s, "energy_psi1_mhz = {}", d.energies.0);
    let _ = writeln!(s, "energy_psi2_mhz = {}", d.energies.1);
    let _ = writeln!(s, "index_psi1 = {}", d.indices.0);
    let _ = writeln!(s, "index_psi2 = {}", d.indices.1);
    let _ = writeln!(s, "overlap_psi1 = {}", d.reference_overlaps[0]);
    let _ = writeln!(s, "overlap_psi2 = {}", d.reference_overlaps[1]);
    s
}
