//! Time-domain propagation of driven spin systems.
//!
//! The two-level model is `H(t) = (w0/2) sx + w1 cos(2 pi w t + phi) sz` in MHz,
//! written in the basis where the static splitting is along `sx`. Propagators
//! apply `exp(-i 2 pi H dt)` with `dt` in microseconds.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::eigen::{eigensystem, HERMITIAN_TOL};
use crate::error::{Error, Result};
use crate::linalg::{inner, norm, OperatorMatrix, I, ONE, ZERO};
use crate::signal::TimeTrace;

/// Default number of substeps per period of the fastest frequency. This is
/// finer than the 200 that second-order accuracy alone would suggest, so that
/// strong-drive trajectories match a ten times finer reference to 1e-8 in
/// fidelity.
pub const DEFAULT_RESOLUTION: f64 = 500.0;
/// Requests coarser than this many substeps per fastest period are rejected.
pub const MIN_RESOLUTION: f64 = 20.0;
/// Resolution of the reference propagator used to check the default stepper.
pub const ORACLE_RESOLUTION: f64 = 10.0 * DEFAULT_RESOLUTION;
/// Allowed deviation of a pure state's norm from 1.
pub const NORM_TOL: f64 = 1e-9;
/// Seed used whenever the caller does not pick one.
pub const DEFAULT_SEED: u64 = 42;

/// Parameters of the driven two-level Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveParams {
    /// Transition frequency, MHz.
    pub omega0: f64,
    /// Drive amplitude, MHz.
    pub omega1: f64,
    /// Drive frequency, MHz.
    pub omega: f64,
    /// Drive phase, radians.
    pub phase_d: f64,
}

impl Default for DriveParams {
    fn default() -> Self {
        Self { omega0: 1.7, omega1: 0.23, omega: 1.7, phase_d: 0.0 }
    }
}

impl DriveParams {
    pub fn new(omega0: f64, omega1: f64, omega: f64, phase_d: f64) -> Result<Self> {
        let d = Self { omega0, omega1, omega, phase_d };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::invalid("omega0 must be positive"));
        }
        if !(self.omega1 >= 0.0 && self.omega1.is_finite()) {
            return Err(Error::invalid("omega1 must be non-negative"));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::invalid("drive frequency must be positive"));
        }
        if !self.phase_d.is_finite() {
            return Err(Error::invalid("drive phase must be finite"));
        }
        Ok(())
    }

    pub fn with_phase(mut self, phase_d: f64) -> Self {
        self.phase_d = phase_d;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    /// `2 pi w t + phi`
    fn angle(&self, t: f64) -> f64 {
        2.0 * PI * self.omega * t + self.phase_d
    }
}

/// Pauli matrices `[sx, sy, sz]`.
pub fn pauli() -> [OperatorMatrix; 3] {
    let sx = OperatorMatrix::from_fn(2, |i, j| if i != j { ONE } else { ZERO });
    let sy = OperatorMatrix::from_fn(2, |i, j| match (i, j) {
        (0, 1) => -I,
        (1, 0) => I,
        _ => ZERO,
    });
    let sz = OperatorMatrix::from_diag(&[1.0, -1.0]);
    [sx, sy, sz]
}

fn from_pauli(c: [f64; 4]) -> OperatorMatrix {
    let [c0, cx, cy, cz] = c;
    OperatorMatrix::from_rows(vec![
        C64::new(c0 + cz, 0.0),
        C64::new(cx, -cy),
        C64::new(cx, cy),
        C64::new(c0 - cz, 0.0),
    ])
    .expect("2x2")
}

/// `(w0/2) sx + w1 cos(2 pi w t + phi) sz`
pub fn tls_hamiltonian(drive: &DriveParams, t: f64) -> OperatorMatrix {
    from_pauli(tls_coefficients(drive, t))
}

fn tls_coefficients(drive: &DriveParams, t: f64) -> [f64; 4] {
    [0.0, 0.5 * drive.omega0, 0.0, drive.omega1 * libm::cos(drive.angle(t))]
}

/// Splits the linear drive into a component rotating with the Larmor
/// precession about `sx` and one rotating against it; both have magnitude
/// `w1/2` and they sum to the full drive term.
pub fn corotating_components(drive: &DriveParams, t: f64) -> (OperatorMatrix, OperatorMatrix) {
    let a = drive.angle(t);
    let h = 0.5 * drive.omega1;
    let (c, s) = (libm::cos(a), libm::sin(a));
    let co = from_pauli([0.0, 0.0, -h * s, h * c]);
    let counter = from_pauli([0.0, 0.0, h * s, h * c]);
    (co, counter)
}

/// Closed-form `exp(-i 2 pi dt (c0 + c.sigma))` as a 2x2 array.
fn su2_step(c: [f64; 4], dt: f64) -> [[C64; 2]; 2] {
    let [c0, cx, cy, cz] = c;
    let r = libm::sqrt(cx * cx + cy * cy + cz * cz);
    let a = 2.0 * PI * r * dt;
    let cos = libm::cos(a);
    // sin(a)/r, well defined as r -> 0
    let s_over_r = if r > 0.0 { libm::sin(a) / r } else { 2.0 * PI * dt };
    let g = C64::from_polar(1.0, -2.0 * PI * c0 * dt);
    let (sx, sy, sz) = (s_over_r * cx, s_over_r * cy, s_over_r * cz);
    [
        [g * C64::new(cos, -sz), g * C64::new(-sy, -sx)],
        [g * C64::new(sy, -sx), g * C64::new(cos, sz)],
    ]
}

fn arr_to_matrix(u: [[C64; 2]; 2]) -> OperatorMatrix {
    OperatorMatrix::from_rows(vec![u[0][0], u[0][1], u[1][0], u[1][1]]).expect("2x2")
}

/// `exp(-i 2 pi H dt)` for Hermitian `H` (MHz) and `dt >= 0` (us).
pub fn step_propagator(h: &OperatorMatrix, dt: f64) -> Result<OperatorMatrix> {
    if h.hermiticity_error() > HERMITIAN_TOL {
        return Err(Error::invalid("propagator requires a Hermitian Hamiltonian"));
    }
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::invalid("time step must be non-negative"));
    }
    if h.dim() == 2 {
        let c0 = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
        let cz = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
        let off = 0.5 * (h[(1, 0)] + h[(0, 1)].conj());
        return Ok(arr_to_matrix(su2_step([c0, off.re, off.im, cz], dt)));
    }
    let e = eigensystem(h)?;
    let n = h.dim();
    let phases: Vec<C64> = e.values.iter().map(|&l| C64::from_polar(1.0, -2.0 * PI * l * dt)).collect();
    Ok(OperatorMatrix::from_fn(n, |i, j| {
        (0..n).map(|k| e.vectors[k][i] * phases[k] * e.vectors[k][j].conj()).sum()
    }))
}

/// A time-dependent Hamiltonian in MHz.
pub trait Hamiltonian {
    fn dim(&self) -> usize;
    fn at(&self, t: f64) -> OperatorMatrix;
    /// Largest frequency scale, MHz; sets the substep size.
    fn max_frequency(&self) -> f64;
    /// `[c0, cx, cy, cz]` with `H = c0 + c.sigma`, for two-level models that
    /// can use the allocation-free closed-form step.
    fn pauli_coefficients(&self, _t: f64) -> Option<[f64; 4]> {
        None
    }
}

impl Hamiltonian for DriveParams {
    fn dim(&self) -> usize {
        2
    }

    fn at(&self, t: f64) -> OperatorMatrix {
        tls_hamiltonian(self, t)
    }

    fn max_frequency(&self) -> f64 {
        self.omega0.max(self.omega1).max(self.omega)
    }

    fn pauli_coefficients(&self, t: f64) -> Option<[f64; 4]> {
        Some(tls_coefficients(self, t))
    }
}

/// Wraps a closure as a [`Hamiltonian`] with a declared frequency scale.
pub struct FnHamiltonian<F> {
    pub dim: usize,
    pub f_max: f64,
    pub f: F,
}

impl<F: Fn(f64) -> OperatorMatrix> Hamiltonian for FnHamiltonian<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn at(&self, t: f64) -> OperatorMatrix {
        (self.f)(t)
    }

    fn max_frequency(&self) -> f64 {
        self.f_max
    }
}

/// Substep rule for the midpoint stepper.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSpec {
    /// Substeps per period of the fastest frequency.
    Resolution(f64),
    /// Explicit maximal substep, us.
    Substep(f64),
}

impl Default for StepSpec {
    fn default() -> Self {
        StepSpec::Resolution(DEFAULT_RESOLUTION)
    }
}

impl StepSpec {
    pub fn oracle() -> Self {
        StepSpec::Resolution(ORACLE_RESOLUTION)
    }

    /// Largest admissible substep for a problem whose fastest frequency is `f_max`.
    pub fn max_substep(&self, f_max: f64) -> Result<f64> {
        let dt = match *self {
            StepSpec::Resolution(r) if r > 0.0 && r.is_finite() => {
                if f_max > 0.0 {
                    1.0 / (r * f_max)
                } else {
                    f64::INFINITY
                }
            }
            StepSpec::Substep(dt) if dt > 0.0 && dt.is_finite() => dt,
            _ => return Err(Error::invalid("step specification must be positive and finite")),
        };
        if f_max > 0.0 {
            let limit = 1.0 / (MIN_RESOLUTION * f_max);
            if dt > limit * (1.0 + 1e-12) {
                return Err(Error::UnderResolved { substep_us: dt, limit_us: limit });
            }
        }
        Ok(dt)
    }
}

/// Pure state vector or density matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum State {
    Pure(Vec<C64>),
    Mixed(OperatorMatrix),
}

impl State {
    pub fn dim(&self) -> usize {
        match self {
            State::Pure(v) => v.len(),
            State::Mixed(r) => r.dim(),
        }
    }

    /// `|norm - 1|` for pure states, `|tr - 1|` for density matrices.
    pub fn normalization_error(&self) -> f64 {
        match self {
            State::Pure(v) => (norm(v) - 1.0).abs(),
            State::Mixed(r) => (r.trace() - ONE).norm(),
        }
    }

    /// `<O>`
    pub fn expectation(&self, op: &OperatorMatrix) -> f64 {
        match self {
            State::Pure(v) => op.expectation(v),
            State::Mixed(r) => r.trace_product(op).re,
        }
    }

    /// Population of the normalized state `target`.
    pub fn population(&self, target: &[C64]) -> f64 {
        match self {
            State::Pure(v) => inner(target, v).norm_sqr(),
            State::Mixed(r) => r.matrix_element(target, target).re,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.normalization_error() > NORM_TOL {
            return Err(Error::invalid("initial state must be normalized"));
        }
        if let State::Mixed(r) = self {
            if r.hermiticity_error() > HERMITIAN_TOL {
                return Err(Error::invalid("density matrix must be Hermitian"));
            }
        }
        Ok(())
    }

    fn apply(&mut self, u: &OperatorMatrix) {
        match self {
            State::Pure(v) => *v = u.apply(v),
            State::Mixed(r) => *r = &(u * r) * &u.adjoint(),
        }
    }

    fn apply2(&mut self, u: &[[C64; 2]; 2]) {
        match self {
            State::Pure(v) => {
                let (a, b) = (v[0], v[1]);
                v[0] = u[0][0] * a + u[0][1] * b;
                v[1] = u[1][0] * a + u[1][1] * b;
            }
            State::Mixed(_) => self.apply(&arr_to_matrix(*u)),
        }
    }
}

/// `|+x>`, the `sx = +1` eigenstate.
pub fn plus_x() -> Vec<C64> {
    let r = core::f64::consts::FRAC_1_SQRT_2;
    vec![C64::new(r, 0.0), C64::new(r, 0.0)]
}

/// `|-x>`, the `sx = -1` eigenstate.
pub fn minus_x() -> Vec<C64> {
    let r = core::f64::consts::FRAC_1_SQRT_2;
    vec![C64::new(r, 0.0), C64::new(-r, 0.0)]
}

/// Sense of a rotating frame about the static-field axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Sense {
    /// Same sense as the free precession, so the co-rotating drive is static.
    #[default]
    CoRotating,
    CounterRotating,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Frame {
    Lab,
    Rotating { omega: f64, sense: Sense },
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateTrajectory {
    /// Uniform time grid, us.
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub frame: Frame,
}

impl StateTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Worst normalization error over the trajectory.
    pub fn max_normalization_error(&self) -> f64 {
        self.states.iter().map(State::normalization_error).fold(0.0, f64::max)
    }

    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectories are never empty")
    }
}

fn check_uniform(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("time grid must be non-empty and finite"));
    }
    if t_grid.len() > 1 {
        let step = (t_grid[t_grid.len() - 1] - t_grid[0]) / (t_grid.len() - 1) as f64;
        if !(step > 0.0) {
            return Err(Error::invalid("time grid must be ascending"));
        }
        let scale = t_grid[0].abs().max(t_grid[t_grid.len() - 1].abs()).max(step);
        for w in t_grid.windows(2) {
            if ((w[1] - w[0]) - step).abs() > 1e-9 * scale {
                return Err(Error::invalid("time grid must be uniform"));
            }
        }
    }
    Ok(())
}

/// Schrodinger evolution of `initial` sampled on `t_grid`, which starts at the
/// time `initial` refers to. Each grid interval is split into equal substeps
/// no longer than the step rule allows, and each substep uses the
/// Hamiltonian at its midpoint.
pub fn propagate(h: &dyn Hamiltonian, initial: &State, t_grid: &[f64], spec: StepSpec) -> Result<StateTrajectory> {
    check_uniform(t_grid)?;
    if initial.dim() != h.dim() {
        return Err(Error::invalid("initial state dimension does not match the Hamiltonian"));
    }
    initial.validate()?;
    let dt_max = spec.max_substep(h.max_frequency())?;
    let mut state = initial.clone();
    let mut states = Vec::with_capacity(t_grid.len());
    states.push(state.clone());
    for w in t_grid.windows(2) {
        let span = w[1] - w[0];
        let n_sub = if dt_max.is_finite() { libm::ceil(span / dt_max - 1e-9).max(1.0) as usize } else { 1 };
        let dt = span / n_sub as f64;
        for j in 0..n_sub {
            let tm = w[0] + (j as f64 + 0.5) * dt;
            match h.pauli_coefficients(tm) {
                Some(c) => state.apply2(&su2_step(c, dt)),
                None => state.apply(&step_propagator(&h.at(tm), dt)?),
            }
        }
        states.push(state.clone());
    }
    Ok(StateTrajectory { times: t_grid.to_vec(), states, frame: Frame::Lab })
}

/// `n` equally spaced times `0, dt, ..., (n-1) dt`.
pub fn uniform_grid(dt: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * dt).collect()
}

/// Re-expresses a lab-frame two-level trajectory in a frame rotating at
/// `omega` about `sx`: `|psi_rot> = exp(+/- i 2 pi omega t sx / 2) |psi>`, with
/// the upper sign for the co-rotating sense.
pub fn rotating_frame(traj: &StateTrajectory, omega: f64, sense: Sense) -> Result<StateTrajectory> {
    if traj.frame != Frame::Lab {
        return Err(Error::InvalidState("trajectory is already in a rotating frame".to_string()));
    }
    if traj.states.iter().any(|s| s.dim() != 2) {
        return Err(Error::invalid("rotating frame is defined for two-level trajectories"));
    }
    if !omega.is_finite() {
        return Err(Error::invalid("frame frequency must be finite"));
    }
    let sign = match sense {
        Sense::CoRotating => 1.0,
        Sense::CounterRotating => -1.0,
    };
    let states = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| {
            // exp(+i a sx/2) = exp(-i 2 pi dt H) with H = -(a / 2 pi dt) sx/2; use dt = 1.
            let a = sign * 2.0 * PI * omega * t;
            let r = su2_step([0.0, -a / (4.0 * PI), 0.0, 0.0], 1.0);
            let mut s = s.clone();
            s.apply2(&r);
            s
        })
        .collect();
    Ok(StateTrajectory { times: traj.times.clone(), states, frame: Frame::Rotating { omega, sense } })
}

/// Bloch-vector samples `(<sx>, <sy>, <sz>)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochTrace {
    pub times: Vec<f64>,
    pub xyz: Vec<[f64; 3]>,
    pub frame: Frame,
}

impl BlochTrace {
    pub fn component(&self, axis: usize) -> Vec<f64> {
        self.xyz.iter().map(|v| v[axis]).collect()
    }
}

pub fn bloch_coords(traj: &StateTrajectory) -> Result<BlochTrace> {
    if traj.states.iter().any(|s| s.dim() != 2) {
        return Err(Error::invalid("Bloch coordinates need two-level states"));
    }
    let p = pauli();
    let xyz = traj
        .states
        .iter()
        .map(|s| [s.expectation(&p[0]), s.expectation(&p[1]), s.expectation(&p[2])])
        .collect();
    Ok(BlochTrace { times: traj.times.clone(), xyz, frame: traj.frame })
}

/// `n` phases drawn uniformly from `[lo, hi]` by SplitMix64 seeded with
/// `seed`; each uses the top 53 bits of one output, `u = (x >> 11) / 2^53`,
/// mapped to `lo + u (hi - lo)`.
pub fn random_phases(n: usize, range: (f64, f64), seed: u64) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if n == 0 {
        return Err(Error::invalid("at least one phase sample is required"));
    }
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::invalid("phase range is empty"));
    }
    let mut rng = SplitMix64::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            lo + u * (hi - lo)
        })
        .collect())
}

/// Mean of `signal_fn` over drives that differ from `base` only in a random
/// phase, evaluated sequentially in draw order.
pub fn phase_average(
    base: &DriveParams,
    n_phases: usize,
    range: (f64, f64),
    seed: u64,
    mut signal_fn: impl FnMut(&DriveParams) -> Result<TimeTrace>,
) -> Result<TimeTrace> {
    let phases = random_phases(n_phases, range, seed)?;
    let traces = phases
        .iter()
        .map(|&p| signal_fn(&base.with_phase(p)))
        .collect::<Result<Vec<_>>>()?;
    crate::signal::mean_trace(&traces)
}

/// Population of `|+x>` after starting there, sampled every `dt` for
/// `n_samples` points; this is the two-level Rabi signal.
pub fn tls_population_trace(drive: &DriveParams, dt: f64, n_samples: usize, spec: StepSpec) -> Result<TimeTrace> {
    drive.validate()?;
    let traj = propagate(drive, &State::Pure(plus_x()), &uniform_grid(dt, n_samples), spec)?;
    let target = plus_x();
    let samples = traj.states.iter().map(|s| s.population(&target)).collect();
    Ok(TimeTrace::new(dt, samples)?
        .with_meta("omega0_mhz", alloc::format!("{}", drive.omega0))
        .with_meta("omega1_mhz", alloc::format!("{}", drive.omega1))
        .with_meta("omega_mhz", alloc::format!("{}", drive.omega))
        .with_meta("phase_rad", alloc::format!("{}", drive.phase_d)))
}

/// Number of evenly spaced drive phases averaged by [`transfer_contrast`].
pub const CONTRAST_PHASES: usize = 8;

/// Infinite-time average of the `|+x> -> |-x>` transfer probability for one
/// drive phase, from the Floquet modes of the one-period propagator. The
/// micromotion inside a period is averaged on the stepper's substep grid.
pub fn long_time_transfer(drive: &DriveParams, spec: StepSpec) -> Result<f64> {
    drive.validate()?;
    let period = 1.0 / drive.omega;
    let dt_max = spec.max_substep(drive.max_frequency())?;
    let n_sub = libm::ceil(period / dt_max - 1e-9).max(1.0) as usize;
    let dt = period / n_sub as f64;
    let mut steps = Vec::with_capacity(n_sub);
    let mut u = [[ONE, ZERO], [ZERO, ONE]];
    for j in 0..n_sub {
        let s = su2_step(tls_coefficients(drive, (j as f64 + 0.5) * dt), dt);
        u = mul2(&s, &u);
        steps.push(u);
    }
    let modes = floquet_modes(&u)?;
    let (px, mx) = (plus_x(), minus_x());
    let mut total = 0.0;
    for m in &modes {
        let weight = inner(m, &px).norm_sqr();
        let mean: f64 = steps
            .iter()
            .map(|s| {
                let v = [s[0][0] * m[0] + s[0][1] * m[1], s[1][0] * m[0] + s[1][1] * m[1]];
                inner(&mx, &v).norm_sqr()
            })
            .sum::<f64>()
            / n_sub as f64;
        total += weight * mean;
    }
    Ok(total)
}

/// Population-transfer contrast: [`long_time_transfer`] averaged over
/// [`CONTRAST_PHASES`] evenly spaced drive phases. The phase average removes
/// the phase-dependent kick that the fast counter-rotating motion gives the
/// initial state, which would otherwise bias the apparent resonance by an
/// amount comparable to the Bloch-Siegert shift itself.
pub fn transfer_contrast(drive: &DriveParams, spec: StepSpec) -> Result<f64> {
    let mut s = 0.0;
    for k in 0..CONTRAST_PHASES {
        let phase = 2.0 * PI * k as f64 / CONTRAST_PHASES as f64;
        s += long_time_transfer(&drive.with_phase(phase), spec)?;
    }
    Ok(s / CONTRAST_PHASES as f64)
}

fn mul2(a: &[[C64; 2]; 2], b: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Eigenvectors of a 2x2 unitary, via the Hermitian generator `n.sigma` of
/// `U / sqrt(det U) = cos b - i sin b n.sigma`.
fn floquet_modes(u: &[[C64; 2]; 2]) -> Result<[Vec<C64>; 2]> {
    let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
    let g = det.sqrt() * 2.0;
    // tr(U' s_j)/2 = -i sin b n_j
    let nx = ((u[0][1] + u[1][0]) / g * I).re;
    let ny = ((u[1][0] - u[0][1]) / g).re;
    let nz = ((u[0][0] - u[1][1]) / g * I).re;
    if nx * nx + ny * ny + nz * nz < 1e-28 {
        // U is a multiple of the identity: every basis is a Floquet basis.
        return Ok([vec![ONE, ZERO], vec![ZERO, ONE]]);
    }
    let e = eigensystem(&from_pauli([0.0, nx, ny, nz]))?;
    let [a, b]: [Vec<C64>; 2] = e.vectors.try_into().expect("two modes");
    Ok([a, b])
}

/// Drive frequency maximizing [`transfer_contrast`] within
/// `omega0 +/- half_width`.
pub fn resonance_frequency(omega0: f64, omega1: f64, half_width: f64, spec: StepSpec) -> Result<f64> {
    let base = DriveParams::new(omega0, omega1, omega0, 0.0)?;
    if !(half_width > 0.0 && half_width < omega0) {
        return Err(Error::invalid("search half-width must lie in (0, omega0)"));
    }
    let mut failure = None;
    let w = crate::spectra::golden_section_min(
        |w| match transfer_contrast(&base.with_omega(w), spec) {
            Ok(p) => -p,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        },
        omega0 - half_width,
        omega0 + half_width,
        1e-7,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(w),
    }
}
