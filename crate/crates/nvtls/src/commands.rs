//! Figure-reproduction workflows. Each command computes its data (in
//! parallel where there is a sweep) and then writes its files in a fixed order.

use std::path::{Path, PathBuf};

use nvtls_core::dynamics::{
    bloch_coords, plus_x, propagate, rotating_frame, tls_population_trace, uniform_grid, DriveParams, Sense, State,
    StepSpec,
};
use nvtls_core::experiments::{
    label_peaks, rabi_experiment, ramsey_in_frame, ramsey_lines, DressedFrame, LineKind, RabiConfig, RabiMode,
    RamseyConfig,
};
use nvtls_core::signal::{dft, find_peaks, normalize_axis, PeakList, SpectrumData, TimeTrace, Window, DEFAULT_PAD};
use nvtls_core::spectra::{eigensystem_at, find_lac, LevelSelector, PairSelector, TlsDescriptor};
use nvtls_core::spin::{FieldSpec, NvOperators};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::export::{self, meta_pair, Meta, Table};
use crate::sweep::{level_curves, par_try_map, phase_average_par, sequence_sweep};

/// Default anti-crossing search window, degrees.
pub const LAC_WINDOW: (f64, f64) = (30.0, 46.0);

/// Traces flatter than this peak-to-peak have no spectral content.
const FLAT_PTP: f64 = 1e-12;

/// What a command wrote and what it reports on stdout.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub report: String,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn write(&mut self, cfg: &RunConfig, name: &str, table: &Table) -> CliResult<()> {
        let path = cfg.output.dir.join(name);
        table.write(&path, cfg.output.metadata)?;
        self.files.push(path);
        Ok(())
    }

    fn write_text(&mut self, cfg: &RunConfig, name: &str, text: &str) -> CliResult<()> {
        let path = cfg.output.dir.join(name);
        export::write_text(&path, text)?;
        self.files.push(path);
        Ok(())
    }
}

fn prepare(cfg: &RunConfig) -> CliResult<()> {
    cfg.validate()?;
    let dir: &Path = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn base_meta(cfg: &RunConfig, command: &str) -> Meta {
    vec![
        meta_pair("command", command),
        meta_pair("B_gauss", cfg.field.b),
        meta_pair("theta_deg", cfg.field.theta_deg),
        meta_pair("phi_deg", cfg.field.phi_deg),
        meta_pair("seed", cfg.seed),
    ]
}

pub fn cmd_levels(cfg: &RunConfig, theta_min: f64, theta_max: f64, steps: usize, selector: LevelSelector) -> CliResult<Outcome> {
    if !(theta_min.is_finite() && theta_max.is_finite()) || theta_min > theta_max {
        return Err(CliError::usage(format!("theta range [{theta_min}, {theta_max}] is empty")));
    }
    if steps == 0 || (steps > 1 && theta_min == theta_max) {
        return Err(CliError::usage("a sweep needs steps >= 2 over a non-empty range"));
    }
    prepare(cfg)?;
    let mut out = Outcome::default();
    let mut meta = base_meta(cfg, "levels");
    meta.retain(|(k, _)| k != "theta_deg");
    if steps == 1 {
        let field = cfg.field.with_theta(theta_min);
        let eig = eigensystem_at(&NvOperators::new(), &cfg.system, &field)?;
        out.write(cfg, "levels.csv", &export::eigenvalue_table(&eig.values, meta, theta_min))?;
        out.report = format!("{} eigenvalues at theta = {theta_min} deg\n", eig.values.len());
        return Ok(out);
    }
    let grid: Vec<f64> =
        (0..steps).map(|k| theta_min + (theta_max - theta_min) * k as f64 / (steps - 1) as f64).collect();
    let curves = level_curves(&cfg.system, cfg.field.b, cfg.field.phi_deg, &grid, &selector)?;
    out.write(cfg, "levels.csv", &export::level_curves_table(&curves, meta))?;
    out.report = format!("{} tracks over {steps} angles\n", curves.curves.len());
    Ok(out)
}

/// Anti-crossing of the `m_I(14N) = 0` pair at the configured field magnitude.
pub fn lac_descriptor(cfg: &RunConfig, window: (f64, f64)) -> CliResult<TlsDescriptor> {
    find_lac(&cfg.system, cfg.field.b, cfg.field.phi_deg, window, PairSelector::Branch(0)).map_err(|e| match e {
        nvtls_core::Error::NotFound(m) => {
            CliError::NotFound(format!("no anti-crossing in [{}, {}] deg: {m}", window.0, window.1))
        }
        other => other.into(),
    })
}

pub fn cmd_lac(cfg: &RunConfig, window: (f64, f64)) -> CliResult<Outcome> {
    if !(window.0 < window.1) {
        return Err(CliError::usage("LAC window must be an ascending range"));
    }
    prepare(cfg)?;
    let d = lac_descriptor(cfg, window)?;
    let mut out = Outcome { report: export::tls_report(&d, cfg.system.gamma_e, cfg.field.b), ..Outcome::default() };
    let report = out.report.clone();
    out.write_text(cfg, "lac.txt", &report)?;
    Ok(out)
}

/// Field used by sequence commands: the configured one, or relocated to the
/// computed anti-crossing when `experiment.at_lac` is set.
pub fn sequence_field(cfg: &RunConfig) -> CliResult<FieldSpec> {
    if !cfg.experiment.at_lac {
        return Ok(cfg.field);
    }
    let d = lac_descriptor(cfg, LAC_WINDOW)?;
    let theta = d.theta_star.ok_or_else(|| CliError::NotFound("anti-crossing angle".into()))?;
    Ok(cfg.field.with_theta(theta))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlochFrame {
    Lab,
    Rotating,
    CounterRotating,
}

/// Bloch trajectory from `|+x>` under the configured drive.
pub fn cmd_bloch(cfg: &RunConfig, duration: f64, dt: f64, frame: BlochFrame) -> CliResult<Outcome> {
    if !(duration > 0.0 && dt > 0.0 && dt <= duration) {
        return Err(CliError::usage("need 0 < dt <= duration"));
    }
    prepare(cfg)?;
    let drive = cfg.drive;
    let n = (duration / dt).round() as usize + 1;
    let traj = propagate(&drive, &State::Pure(plus_x()), &uniform_grid(dt, n), StepSpec::default())?;
    let traj = match frame {
        BlochFrame::Lab => traj,
        BlochFrame::Rotating => rotating_frame(&traj, drive.omega, Sense::CoRotating)?,
        BlochFrame::CounterRotating => rotating_frame(&traj, drive.omega, Sense::CounterRotating)?,
    };
    let b = bloch_coords(&traj)?;
    let mut meta = base_meta(cfg, "bloch");
    meta.extend(drive_meta(&drive));
    let mut out = Outcome::default();
    out.write(cfg, "bloch.csv", &export::bloch_table(&b, meta))?;
    let min_x = b.xyz.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
    out.report = format!("{} samples, min sx = {min_x}\n", b.times.len());
    Ok(out)
}

fn drive_meta(d: &DriveParams) -> Meta {
    vec![
        meta_pair("omega0_mhz", d.omega0),
        meta_pair("omega1_mhz", d.omega1),
        meta_pair("omega_mhz", d.omega),
        meta_pair("phase_rad", d.phase_d),
    ]
}

/// Which model produces the Rabi signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RabiModel {
    /// Driven two-level system: population of `|+x>`.
    Tls,
    /// 18-level sequence with the pair reduced to two levels during RF.
    Tls2,
    /// 18-level sequence throughout.
    Full18,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhaseMode {
    Fixed(f64),
    /// Mean over `n` seeded random phases in `[0, pi]`.
    Average { n: usize, seed: u64 },
}

/// One Rabi trace for amplitude `omega1`.
pub fn rabi_trace(cfg: &RunConfig, field: &FieldSpec, omega1: f64, model: RabiModel, phase: PhaseMode) -> CliResult<TimeTrace> {
    let e = &cfg.experiment;
    let drive = DriveParams { omega1, ..cfg.drive };
    drive.validate()?;
    let single = |d: &DriveParams| -> CliResult<TimeTrace> {
        let mode = match model {
            RabiModel::Tls => {
                return Ok(tls_population_trace(d, e.rabi_dt, e.rabi_samples, StepSpec::default())?);
            }
            RabiModel::Tls2 => RabiMode::Tls2,
            RabiModel::Full18 => RabiMode::Full18,
        };
        let rc = RabiConfig {
            omega1,
            rf_phase: d.phase_d,
            dt: e.rabi_dt,
            n_samples: e.rabi_samples,
            mode,
            mw_axis_deg: e.mw_axis_deg,
            ..RabiConfig::default()
        };
        let tr = rabi_experiment(&cfg.system, field, &rc)?;
        let mut t = tr.to_time_trace()?;
        t.meta.extend(tr.warnings.iter().map(|w| meta_pair("warning", w)));
        Ok(t)
    };
    match phase {
        PhaseMode::Fixed(p) => single(&drive.with_phase(p)),
        PhaseMode::Average { n, seed } => phase_average_par(&drive, n, seed, single),
    }
}

/// Spectrum of a trace, on a frequency/omega1 axis when `omega1 > 0`, and
/// its peaks. Flat traces give an empty peak list.
pub fn trace_spectrum(tr: &TimeTrace, omega1: f64, window: Window, threshold: f64) -> CliResult<(SpectrumData, PeakList)> {
    let s = dft(tr, window, DEFAULT_PAD)?;
    let s = if omega1 > 0.0 { normalize_axis(&s, omega1)? } else { s };
    let peaks = if tr.peak_to_peak() < FLAT_PTP { PeakList::default() } else { find_peaks(&s, threshold)? };
    Ok((s, peaks))
}

pub fn cmd_rabi(cfg: &RunConfig, omega1: &[f64], model: RabiModel, phase: PhaseMode) -> CliResult<Outcome> {
    if omega1.is_empty() {
        return Err(CliError::usage("omega1 list is empty"));
    }
    if let Some(w) = omega1.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(CliError::usage(format!("omega1 must be non-negative, got {w}")));
    }
    if let PhaseMode::Average { n: 0, .. } = phase {
        return Err(CliError::usage("phase average needs at least one phase"));
    }
    prepare(cfg)?;
    let field = match model {
        RabiModel::Tls => cfg.field,
        _ => sequence_field(cfg)?,
    };
    let threshold = cfg.experiment.rabi_peak_threshold;
    let results = par_try_map(omega1, |&w| {
        let tr = rabi_trace(cfg, &field, w, model, phase)?;
        let (s, p) = trace_spectrum(&tr, w, Window::None, threshold)?;
        Ok((tr, s, p))
    })?;
    let mut out = Outcome::default();
    let mut meta = base_meta(cfg, "rabi");
    meta.push(meta_pair("model", format!("{model:?}")));
    meta.push(meta_pair("phase_mode", format!("{phase:?}")));
    for (w, (tr, s, p)) in omega1.iter().zip(&results) {
        let stem = format!("rabi_w{w}");
        let mut m = meta.clone();
        m.push(meta_pair("omega1_mhz", w));
        out.write(cfg, &format!("{stem}_trace.csv"), &export::time_trace_table(tr, "population", m.clone()))?;
        out.write(cfg, &format!("{stem}_spectrum.csv"), &export::spectrum_table(s, m.clone()))?;
        out.write(cfg, &format!("{stem}_peaks.csv"), &export::peaks_table(s, p, None, m))?;
        out.warnings.extend(tr.meta.iter().filter(|(k, _)| k == "warning").map(|(_, v)| v.clone()));
        let list: Vec<String> = p.peaks.iter().map(|q| format!("{:.4}", q.frequency)).collect();
        out.report.push_str(&format!("omega1 = {w}: {} peaks [{}]\n", p.len(), list.join(", ")));
    }
    Ok(out)
}

pub fn cmd_ramsey(cfg: &RunConfig) -> CliResult<Outcome> {
    let e = &cfg.experiment;
    if !(e.nu_d >= 0.0) {
        return Err(CliError::usage(format!("nu_d must be non-negative, got {}", e.nu_d)));
    }
    prepare(cfg)?;
    let field = sequence_field(cfg)?;
    let frame = DressedFrame::from_system(&cfg.system, &field, e.mw_axis_deg)?;
    let rc = RamseyConfig {
        nu_d: e.nu_d,
        carrier: e.carrier,
        flip: e.flip,
        rabi: e.mw_rabi,
        mw_axis_deg: e.mw_axis_deg,
        tau_grid: uniform_grid(e.ramsey_dt, e.ramsey_samples),
    };
    let tr = ramsey_in_frame(&frame, &rc)?;
    let (s, peaks) = trace_spectrum(&tr.to_time_trace()?, 0.0, Window::Hann, e.ramsey_peak_threshold)?;
    let lines = ramsey_lines(&frame, &rc)?;
    let labels = label_peaks(&peaks, &lines, 2.0 * s.df);
    let mut meta = base_meta(cfg, "ramsey");
    meta.push(meta_pair("theta_used_deg", field.theta_deg));
    meta.push(meta_pair("mw_axis_deg", e.mw_axis_deg));
    let mut out = Outcome { warnings: tr.warnings.clone(), ..Outcome::default() };
    out.write(cfg, "ramsey_trace.csv", &export::experiment_trace_table(&tr, meta.clone()))?;
    out.write(cfg, "ramsey_spectrum.csv", &export::spectrum_table(&s, meta.clone()))?;
    out.write(cfg, "ramsey_peaks.csv", &export::peaks_table(&s, &peaks, Some(&labels), meta))?;
    for (p, l) in peaks.peaks.iter().zip(&labels) {
        let kind = match l.map(|l| l.kind) {
            Some(LineKind::ZeroQuantum) => "zero-quantum",
            Some(LineKind::SingleQuantum) => "single-quantum",
            None => "unassigned",
        };
        out.report.push_str(&format!("{:.4} MHz  amplitude {:.3e}  {kind}\n", p.frequency, p.amplitude));
    }
    Ok(out)
}

/// Runs a schedule, optionally sweeping one `<var>` placeholder over `values`.
pub fn cmd_sequence(cfg: &RunConfig, schedule: &str, sweep: Option<(&str, &[f64])>) -> CliResult<Outcome> {
    prepare(cfg)?;
    let field = sequence_field(cfg)?;
    let frame = DressedFrame::from_system(&cfg.system, &field, cfg.experiment.mw_axis_deg)?;
    let (var, values) = match sweep {
        Some((v, [])) => return Err(CliError::usage(format!("sweep of <{v}> has no values"))),
        Some((v, vals)) => (Some(v), vals),
        None => (None, &[][..]),
    };
    let rows = sequence_sweep(&frame, schedule, var, values, StepSpec::default())?;
    let reads = rows.first().map_or(0, Vec::len);
    let mut header: Vec<String> = var.iter().map(|v| v.to_string()).collect();
    header.extend((1..=reads).map(|k| format!("read_{k}")));
    let mut meta = base_meta(cfg, "sequence");
    meta.push(meta_pair("theta_used_deg", field.theta_deg));
    meta.push(meta_pair("mw_axis_deg", cfg.experiment.mw_axis_deg));
    let mut table = Table { meta, header, rows: Vec::new() };
    for (k, r) in rows.iter().enumerate() {
        let mut row: Vec<f64> = values.get(k).copied().into_iter().filter(|_| var.is_some()).collect();
        row.extend(r);
        table.push_numbers(&row);
    }
    let mut out = Outcome::default();
    out.write(cfg, "sequence.csv", &table)?;
    out.report = format!("{} rows, {reads} reads each\n", rows.len());
    Ok(out)
}
