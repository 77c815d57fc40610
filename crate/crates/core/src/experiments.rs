//! Pulse-sequence experiments on the 18-level system.
//!
//! Everything runs in the eigenbasis of the static Hamiltonian. MW pulses are
//! taken in a frame rotating at the carrier on the `m_s = +-1` manifold, with
//! the counter-rotating MW term dropped. The RF drive is kept exact: its
//! `cos` is never split into rotating parts.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::dynamics::{minus_x, plus_x, propagate, step_propagator, uniform_grid, DriveParams, State, StepSpec};
use crate::eigen::{eigensystem, EigenSystem};
use crate::error::{Error, Result};
use crate::linalg::{OperatorMatrix, ZERO};
use crate::signal::{PeakList, TimeTrace};
use crate::spectra::{tls_extract, PairSelector, TlsDescriptor};
use crate::spin::{FieldSpec, NvOperators, SpinSystemParams, NV_DIM};

/// Rabi frequency of the selective MW pi pulse, MHz (pulse length 1 us).
pub const SELECTIVE_RABI: f64 = 0.5;
/// Nominal frequency of the selectively inverted transition, MHz.
pub const SELECTIVE_CARRIER: f64 = 2873.9;
/// MW carrier of the Ramsey sequence, MHz.
pub const RAMSEY_CARRIER: f64 = 2876.6;
/// Rabi frequency of the non-selective Ramsey pulses, MHz.
pub const NONSELECTIVE_RABI: f64 = 10.0;
/// Transitions weaker than this are not considered bright.
pub const MIN_BRIGHT_MOMENT: f64 = 0.3;
/// Tolerated deviation of a density-matrix trace from 1.
pub const TRACE_TOL: f64 = 1e-6;
/// Signals may leave `[0, 1]` by at most this much.
pub const SIGNAL_TOL: f64 = 1e-9;
/// MW-RWA is flagged as strained once `rabi >= carrier * RWA_RATIO`.
pub const RWA_RATIO: f64 = 0.01;

/// Azimuth of the MW field in the NV xy-plane, degrees. Along x exactly,
/// the antisymmetric LAC state would be dark from every `m_s = 0` level.
pub const DEFAULT_MW_AXIS_DEG: f64 = 60.0;

const MS0_STATES: usize = 6;

/// `P0 / 6`: electron in `m_s = 0`, both nuclei maximally mixed.
pub fn polarize() -> OperatorMatrix {
    NvOperators::new().ms0_projector().scale_real(1.0 / MS0_STATES as f64)
}

/// `tr(rho P0)` for an 18-level density matrix.
pub fn readout(rho: &OperatorMatrix) -> Result<f64> {
    if rho.dim() != NV_DIM {
        return Err(Error::invalid("readout needs an 18-level density matrix"));
    }
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
        return Err(Error::invalid(format!("density matrix trace {tr} differs from 1")));
    }
    Ok(rho.trace_product(&NvOperators::new().ms0_projector()).re)
}

/// An eigenstate-to-eigenstate MW transition, `lower` in the `m_s = 0`
/// manifold and `upper` in `m_s = +-1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub lower: usize,
    pub upper: usize,
    /// MHz
    pub frequency: f64,
    /// `|<upper| sqrt2 S_perp |lower>|`, 1 for a bare `0 <-> +-1` transition.
    pub moment: f64,
}

/// Static Hamiltonian in its eigenbasis, with the operators every sequence
/// element needs.
#[derive(Clone, Debug)]
pub struct DressedFrame {
    pub eig: EigenSystem,
    /// True for eigenstates of `m_s = +-1` character (`<S_z^2> > 1/2`).
    pub manifold: Vec<bool>,
    /// `V^dagger sqrt2 S_perp V` with `S_perp` the spin along the MW axis.
    pub mw: OperatorMatrix,
    /// Block-diagonal part of `V^dagger S_z V`, blocks fixed by `manifold`.
    pub rf: OperatorMatrix,
    /// `V^dagger P0 V`
    pub p0: OperatorMatrix,
}

impl DressedFrame {
    /// Frame with the MW field along [`DEFAULT_MW_AXIS_DEG`].
    pub fn new(h_static: &OperatorMatrix) -> Result<Self> {
        Self::with_mw_axis(h_static, DEFAULT_MW_AXIS_DEG)
    }

    /// `axis_deg` is the azimuth of the linearly polarized MW field in the
    /// NV xy-plane, measured from x.
    pub fn with_mw_axis(h_static: &OperatorMatrix, axis_deg: f64) -> Result<Self> {
        if !axis_deg.is_finite() {
            return Err(Error::invalid("MW axis must be finite"));
        }
        if h_static.dim() != NV_DIM {
            return Err(Error::invalid("experiments need the 18-level Hamiltonian"));
        }
        let eig = eigensystem(h_static)?;
        let ops = NvOperators::new();
        let sz2 = eig.to_eigenbasis(&(&ops.s.z * &ops.s.z));
        let manifold: Vec<bool> = (0..NV_DIM).map(|k| sz2[(k, k)].re > 0.5).collect();
        if manifold.iter().filter(|&&m| !m).count() != MS0_STATES {
            return Err(Error::InvalidState("m_s = 0 manifold is not separable from m_s = +-1".into()));
        }
        let a = axis_deg.to_radians();
        let mut s_perp = ops.s.x.scale_real(libm::cos(a));
        s_perp.add_scaled(libm::sin(a), &ops.s.y);
        let mw = eig.to_eigenbasis(&s_perp.scale_real(core::f64::consts::SQRT_2));
        let sz = eig.to_eigenbasis(&ops.s.z);
        let rf = OperatorMatrix::from_fn(NV_DIM, |i, j| if manifold[i] == manifold[j] { sz[(i, j)] } else { ZERO });
        let p0 = eig.to_eigenbasis(&ops.ms0_projector());
        Ok(Self { eig, manifold, mw, rf, p0 })
    }

    pub fn from_system(params: &SpinSystemParams, field: &FieldSpec, mw_axis_deg: f64) -> Result<Self> {
        Self::with_mw_axis(&NvOperators::new().hamiltonian(params, field)?, mw_axis_deg)
    }

    pub fn energies(&self) -> &[f64] {
        &self.eig.values
    }

    /// Energies in the frame rotating at `carrier` on the `m_s = +-1` manifold.
    pub fn rotating_energies(&self, carrier: f64) -> Vec<f64> {
        self.eig.values.iter().zip(&self.manifold).map(|(&e, &m)| if m { e - carrier } else { e }).collect()
    }

    /// Mean `m_s = 0 <-> +-1` splitting, MHz.
    pub fn band_center(&self) -> f64 {
        let mean = |want: bool| {
            let (s, n) = self.eig.values.iter().zip(&self.manifold).filter(|(_, &m)| m == want).fold((0.0, 0), |(s, n), (e, _)| (s + e, n + 1));
            s / n as f64
        };
        mean(true) - mean(false)
    }

    /// Rejects carriers outside half to one and a half times the band center.
    pub fn check_carrier(&self, carrier: f64) -> Result<()> {
        let c = self.band_center();
        if !(carrier.is_finite() && (carrier - c).abs() < 0.5 * c) {
            return Err(Error::invalid(format!("carrier {carrier} MHz is outside the m_s = 0 <-> +-1 band near {c:.1} MHz")));
        }
        Ok(())
    }

    pub fn transitions(&self) -> Vec<Transition> {
        let mut out = Vec::new();
        for lower in (0..NV_DIM).filter(|&k| !self.manifold[k]) {
            for upper in (0..NV_DIM).filter(|&k| self.manifold[k]) {
                out.push(Transition {
                    lower,
                    upper,
                    frequency: self.eig.values[upper] - self.eig.values[lower],
                    moment: self.mw[(upper, lower)].norm(),
                });
            }
        }
        out
    }

    /// Bright transition (moment above `min_moment`) closest to `frequency`,
    /// optionally restricted to the given upper levels.
    pub fn bright_transition_near(&self, frequency: f64, min_moment: f64, uppers: Option<&[usize]>) -> Result<Transition> {
        self.transitions()
            .into_iter()
            .filter(|t| t.moment > min_moment && uppers.is_none_or(|u| u.contains(&t.upper)))
            .min_by(|a, b| (a.frequency - frequency).abs().total_cmp(&(b.frequency - frequency).abs()))
            .ok_or_else(|| Error::NotFound(format!("no transition with moment above {min_moment}")))
    }

    /// Rotating-frame MW propagator in the eigenbasis. `coupling` is the Rabi
    /// frequency a unit-moment transition would see.
    pub fn mw_propagator(&self, carrier: f64, coupling: f64, duration: f64, phase: f64) -> Result<OperatorMatrix> {
        if !(coupling >= 0.0 && coupling.is_finite()) || !(duration >= 0.0 && duration.is_finite()) || !phase.is_finite() {
            return Err(Error::invalid("MW coupling and duration must be finite and non-negative"));
        }
        self.check_carrier(carrier)?;
        let eps = self.rotating_energies(carrier);
        let rot = C64::from_polar(1.0, -phase);
        let h = OperatorMatrix::from_fn(NV_DIM, |i, j| {
            if i == j {
                C64::new(eps[i], 0.0)
            } else if self.manifold[i] && !self.manifold[j] {
                self.mw[(i, j)] * rot * (0.5 * coupling)
            } else if !self.manifold[i] && self.manifold[j] {
                self.mw[(i, j)] * rot.conj() * (0.5 * coupling)
            } else {
                ZERO
            }
        });
        step_propagator(&h, duration)
    }

    /// `exp(-i 2 pi eps t)` on the diagonal.
    pub fn free_phases(&self, carrier: f64, t: f64) -> Vec<C64> {
        self.rotating_energies(carrier).iter().map(|&e| C64::from_polar(1.0, -2.0 * PI * e * t)).collect()
    }

    /// Eigenbasis operator back in the product basis: `V O V^dagger`.
    pub fn to_product_basis(&self, op: &OperatorMatrix) -> OperatorMatrix {
        op.conjugate_by(&self.eig.vector_matrix().adjoint())
    }

    /// The polarized state as six equally weighted pure states.
    pub fn polarized(&self) -> Ensemble {
        let states = (NV_DIM / 3..2 * NV_DIM / 3)
            .map(|i| (0..NV_DIM).map(|k| self.eig.vectors[k][i].conj()).collect())
            .collect();
        Ensemble { states, weight: 1.0 / MS0_STATES as f64 }
    }
}

/// `rho = weight * sum_i |psi_i><psi_i|`, with vectors in the eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub states: Vec<Vec<C64>>,
    pub weight: f64,
}

impl Ensemble {
    pub fn apply(&mut self, u: &OperatorMatrix) {
        for s in &mut self.states {
            *s = u.apply(s);
        }
    }

    pub fn apply_diagonal(&mut self, d: &[C64]) {
        for s in &mut self.states {
            s.iter_mut().zip(d).for_each(|(x, p)| *x *= p);
        }
    }

    pub fn trace(&self) -> f64 {
        self.weight * self.states.iter().map(|s| s.iter().map(|x| x.norm_sqr()).sum::<f64>()).sum::<f64>()
    }

    pub fn expectation(&self, op: &OperatorMatrix) -> f64 {
        self.weight * self.states.iter().map(|s| op.expectation(s)).sum::<f64>()
    }

    pub fn density(&self) -> OperatorMatrix {
        let n = self.states.first().map_or(0, |s| s.len());
        OperatorMatrix::from_fn(n, |i, j| self.states.iter().map(|s| s[i] * s[j].conj()).sum::<C64>() * self.weight)
    }
}

/// MW pulse. `rabi` is the Rabi frequency reached on a transition of moment
/// `moment`; `flip` is the rotation angle on that transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MwPulse {
    pub carrier: f64,
    pub flip: f64,
    pub phase: f64,
    pub rabi: f64,
    pub moment: f64,
}

impl MwPulse {
    /// Pulse calibrated on a unit-moment transition.
    pub fn new(carrier: f64, flip: f64, phase: f64, rabi: f64) -> Self {
        Self { carrier, flip, phase, rabi, moment: 1.0 }
    }

    /// Selective pi pulse on `t` at [`SELECTIVE_RABI`].
    pub fn selective_pi(t: &Transition) -> Self {
        Self { carrier: t.frequency, flip: PI, phase: 0.0, rabi: SELECTIVE_RABI, moment: t.moment }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.flip > 0.0 && self.flip <= 2.0 * PI + 1e-12) {
            return Err(Error::invalid("flip angle must lie in (0, 2 pi]"));
        }
        if !(self.rabi > 0.0 && self.rabi.is_finite() && self.moment > 0.0 && self.moment.is_finite()) {
            return Err(Error::invalid("MW Rabi frequency and moment must be positive"));
        }
        if !(self.carrier > 0.0 && self.carrier.is_finite() && self.phase.is_finite()) {
            return Err(Error::invalid("MW carrier must be positive and the phase finite"));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.flip / (2.0 * PI * self.rabi)
    }

    pub fn coupling(&self) -> f64 {
        self.rabi / self.moment
    }

    pub fn rwa_strained(&self) -> bool {
        self.rabi >= self.carrier * RWA_RATIO
    }

    pub fn propagator(&self, frame: &DressedFrame) -> Result<OperatorMatrix> {
        self.validate()?;
        frame.mw_propagator(self.carrier, self.coupling(), self.duration(), self.phase)
    }
}

/// Product-basis MW propagator and whether MW-RWA is strained.
#[derive(Clone, Debug)]
pub struct MwOperator {
    pub unitary: OperatorMatrix,
    pub rwa_strained: bool,
}

/// `exp(-i 2 pi H_rot duration)` in the product basis, for a unit-moment
/// Rabi frequency `rabi`.
pub fn mw_pulse_operator(h_static: &OperatorMatrix, carrier: f64, rabi: f64, duration: f64, phase: f64) -> Result<MwOperator> {
    let frame = DressedFrame::new(h_static)?;
    let u = frame.mw_propagator(carrier, rabi, duration, phase)?;
    Ok(MwOperator { unitary: frame.to_product_basis(&u), rwa_strained: rabi >= carrier * RWA_RATIO })
}

/// RF pulse `amp cos(2 pi freq t + phase) S_z`, with `amp = gamma_e B_RF` in
/// MHz and `t` counted from the pulse start.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RfPulse {
    pub freq: f64,
    pub amp: f64,
    pub duration: f64,
    pub phase: f64,
}

impl RfPulse {
    pub fn validate(&self) -> Result<()> {
        if !(self.freq > 0.0 && self.freq.is_finite()) {
            return Err(Error::invalid("RF frequency must be positive"));
        }
        if !(self.amp.is_finite() && self.phase.is_finite() && self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("RF amplitude and phase must be finite and the duration non-negative"));
        }
        Ok(())
    }
}

/// Strang-split RF stepper: exact diagonal free evolution around an exact
/// `exp(-i 2 pi a(t) Z dt)` evaluated at the substep midpoint.
struct RfStepper {
    eps: Vec<f64>,
    /// Row-major eigenvectors of the coupling and their adjoint.
    w: Vec<C64>,
    w_adj: Vec<C64>,
    lambda: Vec<f64>,
    f_max: f64,
}

impl RfStepper {
    fn new(frame: &DressedFrame, carrier: f64) -> Result<Self> {
        let z = eigensystem(&frame.rf)?;
        let n = NV_DIM;
        let w: Vec<C64> = (0..n * n).map(|idx| z.vectors[idx % n][idx / n]).collect();
        let w_adj: Vec<C64> = (0..n * n).map(|idx| z.vectors[idx / n][idx % n].conj()).collect();
        let eps = frame.rotating_energies(carrier);
        // Fastest precession among pairs the coupling actually connects.
        let scale = frame.rf.max_abs();
        let mut spread: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j && frame.rf[(i, j)].norm() > 1e-9 * scale {
                    spread = spread.max((eps[i] - eps[j]).abs());
                }
            }
        }
        Ok(Self { eps, w, w_adj, lambda: z.values, f_max: spread })
    }

    fn max_frequency(&self, rf: &RfPulse) -> f64 {
        let lmax = self.lambda.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        self.f_max.max(rf.freq).max(rf.amp.abs() * lmax)
    }

    /// Advances from `t0` to `t1` (us since the pulse start).
    fn advance(&self, ens: &mut Ensemble, rf: &RfPulse, t0: f64, t1: f64, spec: StepSpec) -> Result<()> {
        if t1 <= t0 {
            return Ok(());
        }
        let dt_max = spec.max_substep(self.max_frequency(rf))?;
        let steps = libm::ceil((t1 - t0) / dt_max).max(1.0) as usize;
        let h = (t1 - t0) / steps as f64;
        let half: Vec<C64> = self.eps.iter().map(|&e| C64::from_polar(1.0, -PI * e * h)).collect();
        let n = NV_DIM;
        let mut tmp = vec![ZERO; n];
        let mut kick = vec![ZERO; n];
        for s in 0..steps {
            let tm = t0 + (s as f64 + 0.5) * h;
            let a = rf.amp * libm::cos(2.0 * PI * rf.freq * tm + rf.phase);
            for (k, l) in kick.iter_mut().zip(&self.lambda) {
                *k = C64::from_polar(1.0, -2.0 * PI * a * l * h);
            }
            for psi in &mut ens.states {
                psi.iter_mut().zip(&half).for_each(|(x, p)| *x *= p);
                for i in 0..n {
                    let row = &self.w_adj[i * n..(i + 1) * n];
                    tmp[i] = row.iter().zip(psi.iter()).map(|(a, b)| a * b).sum::<C64>() * kick[i];
                }
                for i in 0..n {
                    let row = &self.w[i * n..(i + 1) * n];
                    psi[i] = row.iter().zip(&tmp).map(|(a, b)| a * b).sum::<C64>() * half[i];
                }
            }
        }
        Ok(())
    }
}

/// Evolves `ens` under `rf` from `t0` to `t1` (us since the RF pulse start)
/// in the frame rotating at `carrier`.
pub fn rf_evolve(frame: &DressedFrame, carrier: f64, ens: &mut Ensemble, rf: &RfPulse, t0: f64, t1: f64, spec: StepSpec) -> Result<()> {
    rf.validate()?;
    RfStepper::new(frame, carrier)?.advance(ens, rf, t0, t1, spec)
}

/// One element of a pulse sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PulseElement {
    Laser,
    Mw(MwPulse),
    Rf(RfPulse),
    /// Free evolution, us.
    Delay(f64),
    Read,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PulseSequence {
    pub elements: Vec<PulseElement>,
}

impl PulseSequence {
    pub fn new(elements: Vec<PulseElement>) -> Result<Self> {
        let s = Self { elements };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements.first() != Some(&PulseElement::Laser) || self.elements.last() != Some(&PulseElement::Read) {
            return Err(Error::invalid("a sequence starts with laser and ends with read"));
        }
        for e in &self.elements {
            match e {
                PulseElement::Mw(p) => p.validate()?,
                PulseElement::Rf(p) => p.validate()?,
                PulseElement::Delay(d) if !(*d >= 0.0 && d.is_finite()) => {
                    return Err(Error::invalid("delays must be non-negative"))
                }
                _ => {}
            }
        }
        self.carrier().map(|_| ())
    }

    /// The single MW carrier of the sequence, which also fixes the rotating
    /// frame. Without MW pulses the frame is the lab frame.
    pub fn carrier(&self) -> Result<Option<f64>> {
        let mut carrier = None;
        for e in &self.elements {
            if let PulseElement::Mw(p) = e {
                match carrier {
                    None => carrier = Some(p.carrier),
                    Some(c) if c == p.carrier => {}
                    Some(_) => return Err(Error::invalid("all MW pulses of a sequence must share one carrier")),
                }
            }
        }
        Ok(carrier)
    }
}

/// Results of [`run_sequence`].
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceOutcome {
    /// `m_s = 0` population at each `read`, in order.
    pub reads: Vec<f64>,
    pub rwa_strained: bool,
    /// Largest `|tr rho - 1|` seen at a read.
    pub trace_error: f64,
}

/// Executes a sequence with the MW frame at the sequence carrier.
pub fn run_sequence(frame: &DressedFrame, seq: &PulseSequence, spec: StepSpec) -> Result<SequenceOutcome> {
    seq.validate()?;
    let carrier = seq.carrier()?.unwrap_or(0.0);
    let mut stepper: Option<RfStepper> = None;
    let mut ens = frame.polarized();
    let mut out = SequenceOutcome { reads: Vec::new(), rwa_strained: false, trace_error: 0.0 };
    for e in &seq.elements {
        match e {
            PulseElement::Laser => ens = frame.polarized(),
            PulseElement::Mw(p) => {
                out.rwa_strained |= p.rwa_strained();
                ens.apply(&p.propagator(frame)?);
            }
            PulseElement::Rf(p) => {
                if p.duration > 0.0 {
                    if stepper.is_none() {
                        stepper = Some(RfStepper::new(frame, carrier)?);
                    }
                    stepper.as_ref().expect("initialized").advance(&mut ens, p, 0.0, p.duration, spec)?;
                }
            }
            PulseElement::Delay(d) => {
                if *d > 0.0 {
                    ens.apply_diagonal(&frame.free_phases(carrier, *d));
                }
            }
            PulseElement::Read => {
                out.trace_error = out.trace_error.max((ens.trace() - 1.0).abs());
                out.reads.push(checked_signal(ens.expectation(&frame.p0))?);
            }
        }
    }
    Ok(out)
}

fn checked_signal(p: f64) -> Result<f64> {
    if !(-SIGNAL_TOL..=1.0 + SIGNAL_TOL).contains(&p) {
        return Err(Error::InvalidState(format!("population {p} left [0, 1]")));
    }
    Ok(p)
}

/// Signal versus pulse duration or delay.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentTrace {
    /// us
    pub axis: Vec<f64>,
    /// `m_s = 0` population.
    pub signal: Vec<f64>,
    pub meta: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl ExperimentTrace {
    /// The signal as a uniformly sampled trace.
    pub fn to_time_trace(&self) -> Result<TimeTrace> {
        if self.axis.len() < 2 {
            return Err(Error::invalid("trace needs at least two samples"));
        }
        let dt = self.axis[1] - self.axis[0];
        let mut t = TimeTrace::new(dt, self.signal.clone())?;
        t.meta = self.meta.clone();
        Ok(t)
    }

    /// Root-mean-square difference divided by the peak-to-peak of `reference`.
    pub fn normalized_rms(&self, reference: &ExperimentTrace) -> Result<f64> {
        if self.signal.len() != reference.signal.len() {
            return Err(Error::invalid("traces differ in length"));
        }
        let n = self.signal.len() as f64;
        let rms = libm::sqrt(self.signal.iter().zip(&reference.signal).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n);
        let (lo, hi) = reference.signal.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        if !(hi - lo > 1e-12) {
            return Err(Error::invalid("reference trace is flat"));
        }
        Ok(rms / (hi - lo))
    }

    fn push_meta(&mut self, key: &str, value: String) {
        self.meta.push((key.into(), value));
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RabiMode {
    /// Full 18-level simulation of the whole sequence.
    Full18,
    /// Same MW pulses, but during the RF pulse the pair evolves under the
    /// two-level model and every other level evolves freely.
    Tls2,
}

/// Rabi sequence: polarize, selective MW pi, RF of duration `t`, MW pi, read.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RabiConfig {
    /// TLS-projected RF amplitude, MHz.
    pub omega1: f64,
    /// RF frequency, MHz; `None` drives on the computed resonance.
    pub rf_freq: Option<f64>,
    pub rf_phase: f64,
    /// Duration grid `0, dt, ..., (n_samples - 1) dt`, us.
    pub dt: f64,
    pub n_samples: usize,
    pub mode: RabiMode,
    pub step: StepSpec,
    /// Frequency near which the selective MW transition is chosen, MHz.
    pub mw_target: f64,
    pub mw_axis_deg: f64,
    pub pair: PairSelector,
}

impl Default for RabiConfig {
    fn default() -> Self {
        Self {
            omega1: 0.23,
            rf_freq: None,
            rf_phase: 0.0,
            dt: 0.02,
            n_samples: 251,
            mode: RabiMode::Full18,
            step: StepSpec::default(),
            mw_target: SELECTIVE_CARRIER,
            mw_axis_deg: DEFAULT_MW_AXIS_DEG,
            pair: PairSelector::Branch(0),
        }
    }
}

/// The two-level system and the selective transition a Rabi run uses.
#[derive(Clone, Debug)]
pub struct RabiSetup {
    pub tls: TlsDescriptor,
    pub transition: Transition,
    pub rf_freq: f64,
    /// `gamma_e B_RF`, MHz.
    pub rf_amp: f64,
}

pub fn rabi_setup(frame: &DressedFrame, cfg: &RabiConfig) -> Result<RabiSetup> {
    if !(cfg.omega1 >= 0.0 && cfg.omega1.is_finite()) {
        return Err(Error::invalid("omega1 must be non-negative"));
    }
    let tls = tls_extract(&frame.eig, cfg.pair)?;
    let rf_freq = cfg.rf_freq.unwrap_or(tls.omega0);
    if !(rf_freq > 0.0 && rf_freq.is_finite()) {
        return Err(Error::invalid("RF frequency must be positive"));
    }
    if !(tls.moment > 0.0) {
        return Err(Error::InvalidState("two-level pair has no S_z moment".into()));
    }
    let (lo, hi) = tls.indices;
    let transition = frame.bright_transition_near(cfg.mw_target, MIN_BRIGHT_MOMENT, Some(&[lo, hi]))?;
    Ok(RabiSetup { rf_amp: cfg.omega1 / tls.moment, rf_freq, transition, tls })
}

pub fn rabi_experiment(params: &SpinSystemParams, field: &FieldSpec, cfg: &RabiConfig) -> Result<ExperimentTrace> {
    if cfg.n_samples < 2 || !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(Error::invalid("duration grid needs dt > 0 and at least two points"));
    }
    let frame = DressedFrame::from_system(params, field, cfg.mw_axis_deg)?;
    let setup = rabi_setup(&frame, cfg)?;
    let axis = uniform_grid(cfg.dt, cfg.n_samples);
    let signal = match cfg.mode {
        RabiMode::Full18 => rabi_full(&frame, &setup, cfg, &axis)?,
        RabiMode::Tls2 => rabi_tls(&frame, &setup, cfg, &axis)?,
    };
    let mut tr = ExperimentTrace { axis, signal, meta: Vec::new(), warnings: Vec::new() };
    tr.push_meta("mode", format!("{:?}", cfg.mode));
    tr.push_meta("omega0_mhz", format!("{}", setup.tls.omega0));
    tr.push_meta("omega1_mhz", format!("{}", cfg.omega1));
    tr.push_meta("rf_freq_mhz", format!("{}", setup.rf_freq));
    tr.push_meta("rf_phase_rad", format!("{}", cfg.rf_phase));
    tr.push_meta("rf_amp_mhz", format!("{}", setup.rf_amp));
    tr.push_meta("mw_carrier_mhz", format!("{}", setup.transition.frequency));
    Ok(tr)
}

fn rabi_full(frame: &DressedFrame, setup: &RabiSetup, cfg: &RabiConfig, axis: &[f64]) -> Result<Vec<f64>> {
    let pi = MwPulse::selective_pi(&setup.transition);
    let u = pi.propagator(frame)?;
    let rf = RfPulse { freq: setup.rf_freq, amp: setup.rf_amp, duration: axis[axis.len() - 1], phase: cfg.rf_phase };
    let stepper = RfStepper::new(frame, pi.carrier)?;
    let mut ens = frame.polarized();
    ens.apply(&u);
    let mut out = Vec::with_capacity(axis.len());
    let mut t_prev = 0.0;
    for &t in axis {
        stepper.advance(&mut ens, &rf, t_prev, t, cfg.step)?;
        t_prev = t;
        let mut probe = ens.clone();
        probe.apply(&u);
        out.push(checked_signal(probe.expectation(&frame.p0))?);
    }
    Ok(out)
}

fn rabi_tls(frame: &DressedFrame, setup: &RabiSetup, cfg: &RabiConfig, axis: &[f64]) -> Result<Vec<f64>> {
    let pi = MwPulse::selective_pi(&setup.transition);
    let u = pi.propagator(frame)?;
    let drive = DriveParams::new(setup.tls.omega0, cfg.omega1, setup.rf_freq, cfg.rf_phase)?;
    // Columns of the two-level propagator at every sample time.
    let e0 = vec![C64::new(1.0, 0.0), ZERO];
    let e1 = vec![ZERO, C64::new(1.0, 0.0)];
    let col0 = propagate(&drive, &State::Pure(e0), axis, cfg.step)?;
    let col1 = propagate(&drive, &State::Pure(e1), axis, cfg.step)?;
    let (lo, hi) = setup.tls.indices;
    // |hi> -> |+x>, |lo> -> e^{i chi} |-x>, so that the pair element of the
    // coupling maps onto <+x|sz|-x> = 1.
    let chi = C64::from_polar(1.0, frame.rf[(hi, lo)].arg());
    let (px, mx) = (plus_x(), minus_x());
    let eps = frame.rotating_energies(pi.carrier);
    let mean = 0.5 * (eps[lo] + eps[hi]);
    let mut prepared = frame.polarized();
    prepared.apply(&u);
    let pure = |s: &State| match s {
        State::Pure(v) => v.clone(),
        State::Mixed(_) => unreachable!("pure input stays pure"),
    };
    let mut out = Vec::with_capacity(axis.len());
    for (k, &t) in axis.iter().enumerate() {
        let (c0, c1) = (pure(&col0.states[k]), pure(&col1.states[k]));
        let common = C64::from_polar(1.0, -2.0 * PI * mean * t);
        let free = frame.free_phases(pi.carrier, t);
        let mut ens = prepared.clone();
        for psi in &mut ens.states {
            let phi: Vec<C64> = (0..2).map(|i| psi[hi] * px[i] + psi[lo] * chi * mx[i]).collect();
            let evolved: Vec<C64> = (0..2).map(|i| c0[i] * phi[0] + c1[i] * phi[1]).collect();
            let new_hi = px[0].conj() * evolved[0] + px[1].conj() * evolved[1];
            let new_lo = (mx[0].conj() * evolved[0] + mx[1].conj() * evolved[1]) * chi.conj();
            for (x, f) in psi.iter_mut().zip(&free) {
                *x *= f;
            }
            psi[hi] = new_hi * common;
            psi[lo] = new_lo * common;
        }
        ens.apply(&u);
        out.push(checked_signal(ens.expectation(&frame.p0))?);
    }
    Ok(out)
}

/// Ramsey sequence: polarize, MW(flip, 0), delay tau, MW(flip, -2 pi nu_d tau), read.
#[derive(Clone, Debug, PartialEq)]
pub struct RamseyConfig {
    /// Artificial detuning, MHz.
    pub nu_d: f64,
    pub carrier: f64,
    pub flip: f64,
    /// Unit-moment Rabi frequency of both pulses, MHz.
    pub rabi: f64,
    pub mw_axis_deg: f64,
    /// Uniform ascending delays, us.
    pub tau_grid: Vec<f64>,
}

impl RamseyConfig {
    pub fn new(nu_d: f64, flip: f64, dt: f64, n: usize) -> Self {
        Self { nu_d, carrier: RAMSEY_CARRIER, flip, rabi: NONSELECTIVE_RABI, mw_axis_deg: DEFAULT_MW_AXIS_DEG, tau_grid: uniform_grid(dt, n) }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.nu_d.is_finite() {
            return Err(Error::invalid("detuning must be finite"));
        }
        MwPulse::new(self.carrier, self.flip, 0.0, self.rabi).validate()?;
        let g = &self.tau_grid;
        if g.len() < 2 || !(g[0] >= 0.0) {
            return Err(Error::invalid("tau grid needs at least two non-negative points"));
        }
        let dt = g[1] - g[0];
        if !(dt > 0.0) || g.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(g[g.len() - 1])) {
            return Err(Error::invalid("tau grid must be uniform and ascending"));
        }
        Ok(())
    }

    pub fn pulse(&self, phase: f64) -> MwPulse {
        MwPulse::new(self.carrier, self.flip, phase, self.rabi)
    }
}

/// Ramsey signal. Per delay the cost is a few 18x18 products, using
/// `U(phase) = R U(0) R^dagger` with `R = exp(-i phase N)`.
pub fn ramsey_experiment(params: &SpinSystemParams, field: &FieldSpec, cfg: &RamseyConfig) -> Result<ExperimentTrace> {
    cfg.validate()?;
    let frame = DressedFrame::from_system(params, field, cfg.mw_axis_deg)?;
    ramsey_in_frame(&frame, cfg)
}

pub fn ramsey_in_frame(frame: &DressedFrame, cfg: &RamseyConfig) -> Result<ExperimentTrace> {
    cfg.validate()?;
    let p = cfg.pulse(0.0);
    let u = p.propagator(frame)?;
    let mut first = frame.polarized();
    first.apply(&u);
    let rho1 = first.density();
    let eps = frame.rotating_energies(cfg.carrier);
    let n = NV_DIM;
    // G0 = U^dagger P0 U in the eigenbasis.
    let udag = u.adjoint();
    let signal = cfg
        .tau_grid
        .iter()
        .map(|&tau| {
            let phi = -2.0 * PI * cfg.nu_d * tau;
            let r: Vec<C64> = frame.manifold.iter().map(|&m| if m { C64::from_polar(1.0, -phi) } else { C64::new(1.0, 0.0) }).collect();
            // G = R U^dagger R^dagger P0 R U R^dagger
            let p_rot = OperatorMatrix::from_fn(n, |i, j| r[i].conj() * frame.p0[(i, j)] * r[j]);
            let g = &(&udag * &p_rot) * &u;
            let free: Vec<C64> = eps.iter().map(|&e| C64::from_polar(1.0, -2.0 * PI * e * tau)).collect();
            let mut s = ZERO;
            for i in 0..n {
                for j in 0..n {
                    // rho(tau)_ij = rho1_ij f_i f_j^*, G_ji with the outer R factors.
                    let gji = r[j] * g[(j, i)] * r[i].conj();
                    s += rho1[(i, j)] * free[i] * free[j].conj() * gji;
                }
            }
            checked_signal(s.re)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tr = ExperimentTrace { axis: cfg.tau_grid.clone(), signal, meta: Vec::new(), warnings: Vec::new() };
    if p.rwa_strained() {
        tr.warnings.push(format!("MW-RWA validity strained: rabi {} MHz >= carrier/100", p.rabi));
    }
    tr.push_meta("nu_d_mhz", format!("{}", cfg.nu_d));
    tr.push_meta("carrier_mhz", format!("{}", cfg.carrier));
    tr.push_meta("flip_rad", format!("{}", cfg.flip));
    tr.push_meta("rabi_mhz", format!("{}", cfg.rabi));
    Ok(tr)
}

/// Zero-quantum coherences stay within one manifold and ignore the detuning;
/// single-quantum ones connect `m_s = 0` with `+-1` and move with it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LineKind {
    SingleQuantum,
    ZeroQuantum,
}

/// A Ramsey line predicted from the eigenstructure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RamseyLine {
    /// Apparent frequency, MHz.
    pub frequency: f64,
    pub kind: LineKind,
    pub levels: (usize, usize),
    /// Cosine amplitude of the coherence in the signal, `2 |rho1_ij G0_ji|`.
    pub weight: f64,
}

/// All coherences with their apparent frequency `|eps_i - eps_j + nu_d (n_i - n_j)|`.
pub fn ramsey_lines(frame: &DressedFrame, cfg: &RamseyConfig) -> Result<Vec<RamseyLine>> {
    cfg.validate()?;
    let u = cfg.pulse(0.0).propagator(frame)?;
    let mut first = frame.polarized();
    first.apply(&u);
    let rho1 = first.density();
    let g0 = &(&u.adjoint() * &frame.p0) * &u;
    let eps = frame.rotating_energies(cfg.carrier);
    let num = |k: usize| if frame.manifold[k] { 1.0 } else { 0.0 };
    let mut out = Vec::new();
    for i in 0..NV_DIM {
        for j in i + 1..NV_DIM {
            let kind = if frame.manifold[i] == frame.manifold[j] { LineKind::ZeroQuantum } else { LineKind::SingleQuantum };
            out.push(RamseyLine {
                frequency: (eps[i] - eps[j] + cfg.nu_d * (num(i) - num(j))).abs(),
                kind,
                levels: (i, j),
                weight: 2.0 * (rho1[(i, j)] * g0[(j, i)]).norm(),
            });
        }
    }
    out.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    Ok(out)
}

/// Labels each peak with the heaviest predicted line within `tol` MHz.
pub fn label_peaks(peaks: &PeakList, lines: &[RamseyLine], tol: f64) -> Vec<Option<RamseyLine>> {
    peaks
        .peaks
        .iter()
        .map(|p| {
            lines
                .iter()
                .filter(|l| (l.frequency - p.frequency).abs() <= tol)
                .max_by(|a, b| a.weight.total_cmp(&b.weight))
                .copied()
        })
        .collect()
}
