//! Cyclic Jacobi diagonalization of complex Hermitian matrices.

use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{OperatorMatrix, ZERO};

/// Off-diagonal Frobenius norm, relative to `||H||_F`, at which sweeping stops.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;
/// Inputs with a larger relative Hermiticity error are rejected.
pub const HERMITIAN_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 64;

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors.
///
/// Each eigenvector's phase is fixed so that its largest-modulus component is
/// real and positive; this makes outputs reproducible but carries no physics.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    /// Track identifiers, filled in by level tracking.
    pub labels: Option<Vec<usize>>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Columns are eigenvectors.
    pub fn vector_matrix(&self) -> OperatorMatrix {
        let n = self.dim();
        OperatorMatrix::from_fn(n, |i, j| self.vectors[j][i])
    }

    /// `V^dagger O V`: the operator expressed in the eigenbasis.
    pub fn to_eigenbasis(&self, op: &OperatorMatrix) -> OperatorMatrix {
        op.conjugate_by(&self.vector_matrix())
    }

    /// `max_k ||H v_k - l_k v_k||`
    pub fn max_residual(&self, h: &OperatorMatrix) -> f64 {
        self.vectors
            .iter()
            .zip(&self.values)
            .map(|(v, &l)| {
                let hv = h.apply(v);
                libm::sqrt(hv.iter().zip(v).map(|(a, b)| (a - b * l).norm_sqr()).sum())
            })
            .fold(0.0, f64::max)
    }

    /// `max |<v_i|v_j> - delta_ij|`
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let d = crate::linalg::inner(&self.vectors[i], &self.vectors[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// Full spectral decomposition of a Hermitian matrix.
pub fn eigensystem(h: &OperatorMatrix) -> Result<EigenSystem> {
    if h.hermiticity_error() > HERMITIAN_TOL {
        return Err(Error::invalid("eigensystem requires a Hermitian matrix"));
    }
    let n = h.dim();
    // Work on the Hermitian part so round-off in the input cannot bias the diagonal.
    let mut a = OperatorMatrix::from_fn(n, |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5);
    let mut v = OperatorMatrix::identity(n);
    let scale = a.frobenius_norm();
    let target = OFF_DIAGONAL_TOL * scale;

    let off_norm = |a: &OperatorMatrix| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        libm::sqrt(s)
    };

    let mut sweeps = 0;
    while scale > 0.0 && off_norm(&a) > target {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off_norm: off_norm(&a) });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&k| a[(k, k)].re).collect();
    let vectors = order.iter().map(|&k| fix_phase(v.column(k))).collect();
    Ok(EigenSystem { values, vectors, labels: None })
}

/// One complex Jacobi rotation annihilating `a[p][q]`, accumulated into `v`.
fn rotate(a: &mut OperatorMatrix, v: &mut OperatorMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let n = a.dim();
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // Below round-off relative to the diagonal the rotation would be noise.
    if (app.abs() + aqq.abs()) * 1e-18 > g {
        a[(p, q)] = ZERO;
        a[(q, p)] = ZERO;
        return;
    }
    // Remove the phase of a_pq, then apply the real symmetric rotation.
    let phase = apq / g;
    let tau = (aqq - app) / (2.0 * g);
    let t = if tau >= 0.0 {
        1.0 / (tau + libm::sqrt(1.0 + tau * tau))
    } else {
        -1.0 / (-tau + libm::sqrt(1.0 + tau * tau))
    };
    let c = 1.0 / libm::sqrt(1.0 + t * t);
    let s = t * c;
    // G restricted to (p, q): [[c, s], [-s e^{-ia}, c e^{-ia}]] with e^{ia} = phase.
    let ph = phase.conj();
    let g_pp = C64::new(c, 0.0);
    let g_pq = C64::new(s, 0.0);
    let g_qp = ph * (-s);
    let g_qq = ph * c;

    // A <- A G (columns p, q)
    for i in 0..n {
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a[(i, p)] = aip * g_pp + aiq * g_qp;
        a[(i, q)] = aip * g_pq + aiq * g_qq;
    }
    // A <- G^dagger A (rows p, q)
    for j in 0..n {
        let apj = a[(p, j)];
        let aqj = a[(q, j)];
        a[(p, j)] = g_pp.conj() * apj + g_qp.conj() * aqj;
        a[(q, j)] = g_pq.conj() * apj + g_qq.conj() * aqj;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
    for i in 0..n {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip * g_pp + viq * g_qp;
        v[(i, q)] = vip * g_pq + viq * g_qq;
    }
}

fn fix_phase(mut vec: Vec<C64>) -> Vec<C64> {
    let norm = crate::linalg::norm(&vec);
    let mut best = 0;
    let mut best_abs = -1.0;
    for (k, x) in vec.iter().enumerate() {
        // Strictly larger with a small margin keeps the choice stable under round-off.
        if x.norm() > best_abs * (1.0 + 1e-9) {
            best = k;
            best_abs = x.norm();
        }
    }
    if best_abs > 0.0 {
        let rot = vec[best].conj() / (best_abs * norm);
        for x in vec.iter_mut() {
            *x *= rot;
        }
    }
    vec
}
