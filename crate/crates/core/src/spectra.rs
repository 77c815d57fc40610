//! Level tracking across field orientations, anti-crossing search and
//! extraction of the effective two-level system.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use crate::eigen::{eigensystem, EigenSystem};
use crate::error::{Error, Result};
use crate::linalg::{inner, OperatorMatrix};
use crate::spin::{basis_index, lac_reference_state, FieldSpec, NvOperators, SpinSystemParams, NV_DIM};

/// Adjacent-point overlap every accepted assignment must exceed.
pub const MIN_TRACK_OVERLAP: f64 = 0.5;
/// Assignments weaker than this are refined while depth remains, so that a
/// rotation inside a near-degenerate pair is not mistaken for a swap.
pub const CONFIDENT_OVERLAP: f64 = 0.9;
/// Two candidate overlaps closer than this count as ambiguous.
pub const AMBIGUITY_TOL: f64 = 1e-6;
const MAX_REFINE_DEPTH: u32 = 14;
/// Every grid step is split at the multiples of this spacing (degrees) that it
/// contains. Grids that share points then refine through identical substeps,
/// which keeps the end-to-end permutation independent of the grid resolution.
pub const TRACK_LATTICE_DEG: f64 = 1.0 / 32.0;

/// Golden-section termination width, degrees.
pub const LAC_THETA_TOL: f64 = 1e-4;
const LAC_SCAN_POINTS: usize = 61;

/// Which tracked levels to report.
#[derive(Clone, Debug, PartialEq)]
pub enum LevelSelector {
    All,
    /// Eigenvalue indices (ascending) at the first grid point.
    Indices(Vec<usize>),
    /// The six m_s = +-1 levels with the 13C spin in `-1/2`, one pair per
    /// 14N projection. These carry the anti-crossings of interest.
    LacManifold,
}

/// Level energies followed by eigenvector continuity rather than by sorted index.
#[derive(Clone, Debug)]
pub struct LevelCurves {
    pub theta_grid: Vec<f64>,
    /// `curves[track][grid_point]`, MHz.
    pub curves: Vec<Vec<f64>>,
    /// Eigenvector of each track at the first grid point.
    pub track_states: Vec<Vec<C64>>,
    /// Eigenvalue index of each track at the first grid point.
    pub track_ids: Vec<usize>,
}

impl LevelCurves {
    /// Curves with the mean over the reported tracks subtracted at every point.
    pub fn relative_to_mean(&self) -> Vec<Vec<f64>> {
        let n = self.curves.len().max(1) as f64;
        let means: Vec<f64> = (0..self.theta_grid.len())
            .map(|k| self.curves.iter().map(|c| c[k]).sum::<f64>() / n)
            .collect();
        self.curves
            .iter()
            .map(|c| c.iter().zip(&means).map(|(v, m)| v - m).collect())
            .collect()
    }
}

/// Maximum-overlap assignment between two eigensystems. `perm[i]` is the index
/// in `b` that continues index `i` of `a`. Returns `None` when some overlap is
/// too small or ambiguous and `strict` is set.
fn assign(a: &EigenSystem, b: &EigenSystem, strict: bool) -> Option<Vec<usize>> {
    let n = a.dim();
    let mut cand = Vec::with_capacity(n * n);
    let mut overlaps = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let o = inner(&a.vectors[i], &b.vectors[j]).norm();
            overlaps[i * n + j] = o;
            cand.push((i, j));
        }
    }
    let gap = |i: usize, j: usize| (a.values[i] - b.values[j]).abs();
    cand.sort_by(|&(i, j), &(k, l)| overlaps[k * n + l].total_cmp(&overlaps[i * n + j]));
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for (i, j) in cand {
        if perm[i] != usize::MAX || used[j] {
            continue;
        }
        let o = overlaps[i * n + j];
        if o <= MIN_TRACK_OVERLAP || (strict && o < CONFIDENT_OVERLAP) {
            return None;
        }
        // Free columns of the same row whose overlap ties with the best one.
        let mut tied = (0..n).filter(|&k| !used[k] && (overlaps[i * n + k] - o).abs() <= AMBIGUITY_TOL);
        let pick = if strict {
            if tied.any(|k| k != j) {
                return None;
            }
            j
        } else {
            tied.min_by(|&x, &y| gap(i, x).total_cmp(&gap(i, y))).unwrap_or(j)
        };
        perm[i] = pick;
        used[pick] = true;
    }
    Some(perm)
}

fn track_step(
    ta: f64,
    ea: &EigenSystem,
    tb: f64,
    eb: &EigenSystem,
    eig_at: &dyn Fn(f64) -> Result<EigenSystem>,
    depth: u32,
) -> Result<Vec<usize>> {
    let direct = assign(ea, eb, true);
    if depth >= MAX_REFINE_DEPTH {
        // Out of refinement budget: fall back to the eigenvalue tie-break.
        return direct
            .or_else(|| assign(ea, eb, false))
            .ok_or(Error::Degeneracy { theta_deg: 0.5 * (ta + tb) });
    }
    // A direct match is only trusted when the midpoint tells the same story;
    // this catches anti-crossings narrower than the step.
    let tm = 0.5 * (ta + tb);
    let em = eig_at(tm)?;
    if let Some(d) = &direct {
        if let (Some(h1), Some(h2)) = (assign(ea, &em, true), assign(&em, eb, true)) {
            if h1.iter().map(|&k| h2[k]).eq(d.iter().copied()) {
                return direct.ok_or(Error::Degeneracy { theta_deg: tm });
            }
        }
    }
    let p1 = track_step(ta, ea, tm, &em, eig_at, depth + 1)?;
    let p2 = track_step(tm, &em, tb, eb, eig_at, depth + 1)?;
    Ok(p1.iter().map(|&k| p2[k]).collect())
}

fn lattice_step(
    ta: f64,
    ea: &EigenSystem,
    tb: f64,
    eb: &EigenSystem,
    eig_at: &dyn Fn(f64) -> Result<EigenSystem>,
) -> Result<Vec<usize>> {
    let h = TRACK_LATTICE_DEG;
    // Skip lattice points that coincide with an endpoint up to round-off.
    let eps = 1e-9;
    let first = libm::floor((ta + eps) / h) as i64 + 1;
    let last = libm::ceil((tb - eps) / h) as i64 - 1;
    let mut perm: Vec<usize> = (0..ea.dim()).collect();
    let (mut t0, mut e0) = (ta, ea.clone());
    for j in first..=last {
        let t1 = j as f64 * h;
        let e1 = eig_at(t1)?;
        let p = track_step(t0, &e0, t1, &e1, eig_at, 0)?;
        perm = perm.iter().map(|&k| p[k]).collect();
        t0 = t1;
        e0 = e1;
    }
    let p = track_step(t0, &e0, tb, eb, eig_at, 0)?;
    Ok(perm.iter().map(|&k| p[k]).collect())
}

/// Tracks all levels of precomputed eigensystems along `theta_grid`, inserting
/// extra points through `eig_at` where adjacent eigenvectors are not clearly
/// matched. Only the user grid appears in the output.
pub fn track_eigensystems(
    theta_grid: &[f64],
    eigs: &[EigenSystem],
    selector: &LevelSelector,
    eig_at: &dyn Fn(f64) -> Result<EigenSystem>,
) -> Result<LevelCurves> {
    if theta_grid.is_empty() || theta_grid.len() != eigs.len() {
        return Err(Error::invalid("theta grid and eigensystems must be non-empty and of equal length"));
    }
    if theta_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("theta grid must be strictly increasing"));
    }
    let n = eigs[0].dim();
    // position[track] = eigen index of that track at the current grid point
    let mut position: Vec<usize> = (0..n).collect();
    let mut all_curves = vec![Vec::with_capacity(theta_grid.len()); n];
    for t in 0..n {
        all_curves[t].push(eigs[0].values[t]);
    }
    for k in 1..theta_grid.len() {
        let perm = lattice_step(theta_grid[k - 1], &eigs[k - 1], theta_grid[k], &eigs[k], eig_at)?;
        for t in 0..n {
            position[t] = perm[position[t]];
            all_curves[t].push(eigs[k].values[position[t]]);
        }
    }

    let tracks: Vec<usize> = match selector {
        LevelSelector::All => (0..n).collect(),
        LevelSelector::Indices(ix) => {
            if ix.iter().any(|&i| i >= n) {
                return Err(Error::invalid("level index out of range"));
            }
            ix.clone()
        }
        LevelSelector::LacManifold => {
            if n != NV_DIM {
                return Err(Error::invalid("LAC manifold selection needs the 18-level system"));
            }
            let mut basis = Vec::new();
            for ms in [-1i8, 1] {
                for m2 in [1i8, 0, -1] {
                    basis.push(basis_index(ms, -1, m2)?);
                }
            }
            let weight = |v: &[C64]| basis.iter().map(|&b| v[b].norm_sqr()).sum::<f64>();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| weight(&eigs[0].vectors[j]).total_cmp(&weight(&eigs[0].vectors[i])));
            let mut top: Vec<usize> = order[..6].to_vec();
            top.sort_unstable();
            top
        }
    };
    Ok(LevelCurves {
        theta_grid: theta_grid.to_vec(),
        curves: tracks.iter().map(|&t| all_curves[t].clone()).collect(),
        track_states: tracks.iter().map(|&t| eigs[0].vectors[t].clone()).collect(),
        track_ids: tracks,
    })
}

/// Eigensystem of the 18-level Hamiltonian at one orientation.
pub fn eigensystem_at(ops: &NvOperators, params: &SpinSystemParams, field: &FieldSpec) -> Result<EigenSystem> {
    eigensystem(&ops.hamiltonian(params, field)?)
}

/// Level curves versus polar angle at fixed `B` and `phi`.
pub fn track_levels(
    params: &SpinSystemParams,
    b: f64,
    phi_deg: f64,
    theta_grid: &[f64],
    selector: &LevelSelector,
) -> Result<LevelCurves> {
    let ops = NvOperators::new();
    let eig_at = |t: f64| eigensystem_at(&ops, params, &FieldSpec::new(b, t, phi_deg)?);
    let eigs = theta_grid.iter().map(|&t| eig_at(t)).collect::<Result<Vec<_>>>()?;
    track_eigensystems(theta_grid, &eigs, selector, &eig_at)
}

/// Which two eigenstates form the two-level system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairSelector {
    /// The two eigenstates with the largest weight on
    /// `span{|-1, -1/2, m>, |+1, -1/2, m>}` for the given 14N projection `m`.
    Branch(i8),
    /// Explicit eigenvalue indices.
    Indices(usize, usize),
}

impl Default for PairSelector {
    fn default() -> Self {
        PairSelector::Branch(0)
    }
}

/// Effective two-level system carved out of the 18-level spectrum.
#[derive(Clone, Debug)]
pub struct TlsDescriptor {
    /// Transition frequency, MHz.
    pub omega0: f64,
    /// Lower (`psi1`) and upper (`psi2`) eigenstates.
    pub psi1: Vec<C64>,
    pub psi2: Vec<C64>,
    pub energies: (f64, f64),
    pub indices: (usize, usize),
    /// `|<psi1|S_z|psi2>|`
    pub moment: f64,
    /// Polar angle of the anti-crossing when found by [`find_lac`].
    pub theta_star: Option<f64>,
    /// `|<psi|(|-1> +- |+1>)/sqrt2, -1/2, m>|^2` for `psi1` and `psi2`, using
    /// whichever sign assignment fits better.
    pub reference_overlaps: [f64; 2],
}

fn branch_pair(eig: &EigenSystem, m2: i8) -> Result<(usize, usize)> {
    if eig.dim() != NV_DIM {
        return Err(Error::invalid("branch selection needs the 18-level system"));
    }
    let a = basis_index(-1, -1, m2)?;
    let b = basis_index(1, -1, m2)?;
    let w = |k: usize| eig.vectors[k][a].norm_sqr() + eig.vectors[k][b].norm_sqr();
    let mut order: Vec<usize> = (0..eig.dim()).collect();
    order.sort_by(|&i, &j| w(j).total_cmp(&w(i)));
    let (i, j) = (order[0], order[1]);
    Ok(if eig.values[i] <= eig.values[j] { (i, j) } else { (j, i) })
}

fn resolve_pair(eig: &EigenSystem, pair: PairSelector) -> Result<(usize, usize)> {
    match pair {
        PairSelector::Branch(m) => branch_pair(eig, m),
        PairSelector::Indices(i, j) => {
            if i >= eig.dim() || j >= eig.dim() || i == j {
                return Err(Error::invalid("pair indices must be distinct and in range"));
            }
            Ok(if eig.values[i] <= eig.values[j] { (i, j) } else { (j, i) })
        }
    }
}

/// Descriptor for an explicit pair and transition observable.
pub fn tls_extract_with(eig: &EigenSystem, lo: usize, hi: usize, observable: &OperatorMatrix) -> Result<TlsDescriptor> {
    if observable.dim() != eig.dim() {
        return Err(Error::invalid("observable dimension does not match eigensystem"));
    }
    let psi1 = eig.vectors[lo].clone();
    let psi2 = eig.vectors[hi].clone();
    let moment = observable.matrix_element(&psi1, &psi2).norm();
    Ok(TlsDescriptor {
        omega0: eig.values[hi] - eig.values[lo],
        energies: (eig.values[lo], eig.values[hi]),
        indices: (lo, hi),
        moment,
        theta_star: None,
        reference_overlaps: [0.0, 0.0],
        psi1,
        psi2,
    })
}

/// Two-level system of an 18-level eigensystem with the moment taken against
/// the electron `S_z`.
pub fn tls_extract(eig: &EigenSystem, pair: PairSelector) -> Result<TlsDescriptor> {
    if eig.dim() != NV_DIM {
        return Err(Error::invalid("tls_extract needs the 18-level system"));
    }
    let (lo, hi) = resolve_pair(eig, pair)?;
    let ops = NvOperators::new();
    let mut d = tls_extract_with(eig, lo, hi, &ops.s.z)?;
    let m2 = match pair {
        PairSelector::Branch(m) => m,
        PairSelector::Indices(..) => 0,
    };
    let plus = lac_reference_state(1.0, m2)?;
    let minus = lac_reference_state(-1.0, m2)?;
    let ov = |a: &[C64], b: &[C64]| inner(a, b).norm_sqr();
    let direct = [ov(&plus, &d.psi1), ov(&minus, &d.psi2)];
    let swapped = [ov(&minus, &d.psi1), ov(&plus, &d.psi2)];
    d.reference_overlaps = if direct[0] + direct[1] >= swapped[0] + swapped[1] { direct } else { swapped };
    Ok(d)
}

/// Matrix of `|<i|O|j>|` over all eigenstate pairs.
pub fn transition_moments(eig: &EigenSystem, observable: &OperatorMatrix) -> Result<Vec<Vec<f64>>> {
    if observable.dim() != eig.dim() {
        return Err(Error::invalid("observable dimension does not match eigensystem"));
    }
    let in_basis = eig.to_eigenbasis(observable);
    let n = eig.dim();
    Ok((0..n).map(|i| (0..n).map(|j| in_basis[(i, j)].norm()).collect()).collect())
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section_min(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Coarse scan for the smallest interior sample followed by golden-section
/// refinement inside its bracket. Fails when the minimum sits on an endpoint.
pub fn bracketed_minimum(
    mut f: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    scan_points: usize,
    tol: f64,
) -> Result<f64> {
    if !(hi > lo) || scan_points < 3 {
        return Err(Error::invalid("search range must be non-empty with at least 3 scan points"));
    }
    let step = (hi - lo) / (scan_points - 1) as f64;
    let mut best = (0, f64::INFINITY);
    for k in 0..scan_points {
        let v = f(lo + step * k as f64)?;
        if v < best.1 {
            best = (k, v);
        }
    }
    if best.0 == 0 || best.0 == scan_points - 1 {
        return Err(Error::NotFound("no interior minimum in the search range".into()));
    }
    let a = lo + step * (best.0 - 1) as f64;
    let b = lo + step * (best.0 + 1) as f64;
    let mut err = None;
    let x = golden_section_min(
        |t| match f(t) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::INFINITY
            }
        },
        a,
        b,
        tol,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(x),
    }
}

/// Locates the anti-crossing of the selected pair within `theta_range` (degrees).
pub fn find_lac(
    params: &SpinSystemParams,
    b: f64,
    phi_deg: f64,
    theta_range: (f64, f64),
    pair: PairSelector,
) -> Result<TlsDescriptor> {
    let ops = NvOperators::new();
    let eig_at = |t: f64| eigensystem_at(&ops, params, &FieldSpec::new(b, t, phi_deg)?);
    let gap = |t: f64| -> Result<f64> {
        let e = eig_at(t)?;
        let (lo, hi) = resolve_pair(&e, pair)?;
        Ok(e.values[hi] - e.values[lo])
    };
    let theta = bracketed_minimum(gap, theta_range.0, theta_range.1, LAC_SCAN_POINTS, LAC_THETA_TOL)?;
    let mut d = tls_extract(&eig_at(theta)?, pair)?;
    d.theta_star = Some(theta);
    Ok(d)
}
