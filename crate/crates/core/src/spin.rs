//! Spin operators and the 18-level NV electron / 13C / 14N Hamiltonian.
//!
//! Basis ordering is electron(3) x 13C(2) x 14N(3), every factor ordered by
//! descending magnetic quantum number, so index 0 is `|+1, +1/2, +1>` and
//! index 17 is `|-1, -1/2, -1>`. All energies are in MHz.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{OperatorMatrix, ONE, ZERO};

/// Multiplicities of the composite space: electron, 13C, 14N.
pub const NV_DIMS: [usize; 3] = [3, 2, 3];
pub const NV_DIM: usize = 18;

pub const ELECTRON: usize = 0;
pub const CARBON: usize = 1;
pub const NITROGEN: usize = 2;

/// Cartesian components of one spin: `[Sx, Sy, Sz]`.
#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub x: OperatorMatrix,
    pub y: OperatorMatrix,
    pub z: OperatorMatrix,
}

impl SpinOperators {
    pub fn components(&self) -> [&OperatorMatrix; 3] {
        [&self.x, &self.y, &self.z]
    }
}

/// Standard spin-j matrices, `j = (multiplicity - 1) / 2`, with basis states
/// ordered from `m = +j` down to `m = -j`.
pub fn spin_operators(multiplicity: usize) -> Result<SpinOperators> {
    if multiplicity < 2 {
        return Err(Error::invalid("spin multiplicity must be at least 2"));
    }
    let n = multiplicity;
    let j = (n as f64 - 1.0) / 2.0;
    let m = |k: usize| j - k as f64;
    // S+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>; row k-1 holds m+1 when column k holds m.
    let mut plus = OperatorMatrix::zeros(n);
    for k in 1..n {
        let mk = m(k);
        plus[(k - 1, k)] = C64::new(libm::sqrt(j * (j + 1.0) - mk * (mk + 1.0)), 0.0);
    }
    let minus = plus.adjoint();
    let x = (&plus + &minus).scale_real(0.5);
    let y = (&plus - &minus).scale(C64::new(0.0, -0.5));
    let z = OperatorMatrix::from_diag(&(0..n).map(m).collect::<Vec<_>>());
    Ok(SpinOperators { x, y, z })
}

/// Places `op` at position `slot` of a tensor product with identities on all
/// other factors.
pub fn embed(op: &OperatorMatrix, slot: usize, dims: &[usize]) -> Result<OperatorMatrix> {
    if slot >= dims.len() {
        return Err(Error::invalid("embed slot out of range"));
    }
    if op.dim() != dims[slot] {
        return Err(Error::invalid("operator dimension does not match its slot"));
    }
    let mut out = OperatorMatrix::identity(1);
    for (k, &d) in dims.iter().enumerate() {
        out = if k == slot { out.kron(op) } else { out.kron(&OperatorMatrix::identity(d)) };
    }
    Ok(out)
}

/// Magnetic field given in spherical coordinates of the NV frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSpec {
    /// Magnitude, G.
    pub b: f64,
    /// Polar angle from the NV axis, degrees.
    pub theta_deg: f64,
    /// Azimuth from the N-V-13C plane, degrees.
    pub phi_deg: f64,
}

impl FieldSpec {
    pub fn new(b: f64, theta_deg: f64, phi_deg: f64) -> Result<Self> {
        let f = Self { b, theta_deg, phi_deg };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b >= 0.0) {
            return Err(Error::invalid("field magnitude must be finite and >= 0"));
        }
        if !(0.0..=180.0).contains(&self.theta_deg) {
            return Err(Error::invalid("theta must lie in [0, 180] degrees"));
        }
        if !(0.0..360.0).contains(&self.phi_deg) {
            return Err(Error::invalid("phi must lie in [0, 360) degrees"));
        }
        Ok(())
    }

    pub fn with_theta(self, theta_deg: f64) -> Self {
        Self { theta_deg, ..self }
    }
}

impl Default for FieldSpec {
    /// 28.9 G at 38.4 deg, phi = 0.
    fn default() -> Self {
        Self { b: 28.9, theta_deg: 38.4, phi_deg: 0.0 }
    }
}

/// `B (sin t cos p, sin t sin p, cos t)` in G.
pub fn field_vector(field: &FieldSpec) -> Result<[f64; 3]> {
    field.validate()?;
    let t = field.theta_deg.to_radians();
    let p = field.phi_deg.to_radians();
    let st = libm::sin(t);
    Ok([
        field.b * st * libm::cos(p),
        field.b * st * libm::sin(p),
        field.b * libm::cos(t),
    ])
}

/// Constants of the NV / 13C / 14N Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinSystemParams {
    /// Zero-field splitting, MHz.
    pub d: f64,
    /// 14N quadrupolar splitting, MHz.
    pub p: f64,
    /// Electron gyromagnetic ratio, MHz/G.
    pub gamma_e: f64,
    /// 13C gyromagnetic ratio, MHz/G.
    pub gamma_n1: f64,
    /// 14N gyromagnetic ratio, MHz/G.
    pub gamma_n2: f64,
    /// 13C hyperfine tensor, MHz, row-major `[[xx, xy, xz], ...]`.
    pub a1: [[f64; 3]; 3],
    /// 14N hyperfine tensor, MHz.
    pub a2: [[f64; 3]; 3],
}

impl Default for SpinSystemParams {
    fn default() -> Self {
        Self {
            d: 2870.2,
            p: -4.95,
            gamma_e: 2.8025,
            gamma_n1: 1.0705e-3,
            gamma_n2: 3.077e-4,
            a1: [[189.3, 0.0, 24.1], [0.0, 128.4, 0.0], [24.1, 0.0, 128.9]],
            a2: [[-2.6, 0.0, 0.0], [0.0, -2.6, 0.0], [0.0, 0.0, -2.3]],
        }
    }
}

impl SpinSystemParams {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("A1", &self.a1), ("A2", &self.a2)] {
            let scale = t.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
            for i in 0..3 {
                for j in 0..i {
                    if (t[i][j] - t[j][i]).abs() > 1e-12 * scale {
                        return Err(Error::InvalidArgument(alloc::format!(
                            "{name} hyperfine tensor is not symmetric"
                        )));
                    }
                }
            }
        }
        let scalars = [self.d, self.p, self.gamma_e, self.gamma_n1, self.gamma_n2];
        if scalars.iter().chain(self.a1.iter().flatten()).chain(self.a2.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("spin system parameters must be finite"));
        }
        Ok(())
    }

    /// Same constants with every hyperfine and quadrupole term removed.
    pub fn without_hyperfine(&self) -> Self {
        Self { p: 0.0, a1: [[0.0; 3]; 3], a2: [[0.0; 3]; 3], ..self.clone() }
    }
}

/// Embedded spin operators of the composite space, reusable across many
/// Hamiltonian evaluations.
#[derive(Clone, Debug)]
pub struct NvOperators {
    dims: [usize; 3],
    pub s: SpinOperators,
    pub i1: SpinOperators,
    pub i2: SpinOperators,
}

impl NvOperators {
    /// Operators in the standard electron x 13C x 14N ordering.
    pub fn new() -> Self {
        Self::with_order([ELECTRON, CARBON, NITROGEN])
    }

    /// `order[k]` names which spin sits at tensor position `k`. Only used to
    /// check that the spectrum does not depend on the factor order.
    pub fn with_order(order: [usize; 3]) -> Self {
        let mult = |spin: usize| NV_DIMS[spin];
        let dims = [mult(order[0]), mult(order[1]), mult(order[2])];
        let pos = |spin: usize| order.iter().position(|&s| s == spin).expect("order must be a permutation");
        let build = |spin: usize| {
            let ops = spin_operators(NV_DIMS[spin]).expect("multiplicity >= 2");
            let slot = pos(spin);
            SpinOperators {
                x: embed(&ops.x, slot, &dims).expect("consistent dims"),
                y: embed(&ops.y, slot, &dims).expect("consistent dims"),
                z: embed(&ops.z, slot, &dims).expect("consistent dims"),
            }
        };
        Self { dims, s: build(ELECTRON), i1: build(CARBON), i2: build(NITROGEN) }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// `D Sz^2 + ge B.S + gn1 B.I1 + gn2 B.I2 + P I2z^2 + S.A1.I1 + S.A2.I2`
    pub fn hamiltonian(&self, params: &SpinSystemParams, field: &FieldSpec) -> Result<OperatorMatrix> {
        params.validate()?;
        let b = field_vector(field)?;
        let mut h = &self.s.z * &self.s.z;
        h = h.scale_real(params.d);
        h.add_scaled(params.p, &(&self.i2.z * &self.i2.z));
        let s = self.s.components();
        let i1 = self.i1.components();
        let i2 = self.i2.components();
        for k in 0..3 {
            if b[k] != 0.0 {
                h.add_scaled(params.gamma_e * b[k], s[k]);
                h.add_scaled(params.gamma_n1 * b[k], i1[k]);
                h.add_scaled(params.gamma_n2 * b[k], i2[k]);
            }
        }
        for a in 0..3 {
            for c in 0..3 {
                if params.a1[a][c] != 0.0 {
                    h.add_scaled(params.a1[a][c], &(s[a] * i1[c]));
                }
                if params.a2[a][c] != 0.0 {
                    h.add_scaled(params.a2[a][c], &(s[a] * i2[c]));
                }
            }
        }
        Ok(h)
    }

    /// Projector onto the electron `m_s = 0` subspace.
    pub fn ms0_projector(&self) -> OperatorMatrix {
        let sz2 = &self.s.z * &self.s.z;
        &OperatorMatrix::identity(sz2.dim()) - &sz2
    }
}

impl Default for NvOperators {
    fn default() -> Self {
        Self::new()
    }
}

/// Full 18x18 Hamiltonian in MHz.
pub fn build_hamiltonian(params: &SpinSystemParams, field: &FieldSpec) -> Result<OperatorMatrix> {
    NvOperators::new().hamiltonian(params, field)
}

/// Index of `|ms, m_I1, m_I2>` in the standard basis. `two_m1` is twice the
/// 13C quantum number (+1 or -1).
pub fn basis_index(ms: i8, two_m1: i8, m2: i8) -> Result<usize> {
    if !(-1..=1).contains(&ms) || !(two_m1 == 1 || two_m1 == -1) || !(-1..=1).contains(&m2) {
        return Err(Error::invalid("quantum numbers out of range"));
    }
    let e = (1 - ms) as usize;
    let c = ((1 - two_m1) / 2) as usize;
    let n = (1 - m2) as usize;
    Ok(e * 6 + c * 3 + n)
}

pub fn product_state(ms: i8, two_m1: i8, m2: i8) -> Result<Vec<C64>> {
    let mut v = vec![ZERO; NV_DIM];
    v[basis_index(ms, two_m1, m2)?] = ONE;
    Ok(v)
}

/// `((|-1> + sign |+1>) / sqrt 2) x |-1/2> x |m2>`: the mixed states expected
/// at the m_s = +-1 anti-crossing.
pub fn lac_reference_state(sign: f64, m2: i8) -> Result<Vec<C64>> {
    let r = core::f64::consts::FRAC_1_SQRT_2;
    let mut v = vec![ZERO; NV_DIM];
    v[basis_index(-1, -1, m2)?] = C64::new(r, 0.0);
    v[basis_index(1, -1, m2)?] = C64::new(sign * r, 0.0);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: f64) -> bool {
        (a - C64::new(b, 0.0)).norm() < 1e-12
    }

    #[test]
    fn spin_one_sz_is_diag_one_zero_minus_one() {
        let s = spin_operators(3).unwrap();
        for (k, m) in [1.0, 0.0, -1.0].iter().enumerate() {
            assert!(close(s.z[(k, k)], *m));
        }
    }

    #[test]
    fn spin_half_sz() {
        let s = spin_operators(2).unwrap();
        assert!(close(s.z[(0, 0)], 0.5));
        assert!(close(s.z[(1, 1)], -0.5));
    }

    #[test]
    fn casimir_spin_one() {
        let s = spin_operators(3).unwrap();
        let c = &(&(&s.x * &s.x) + &(&s.y * &s.y)) + &(&s.z * &s.z);
        assert!((&c - &OperatorMatrix::identity(3).scale_real(2.0)).frobenius_norm() < 1e-12);
    }

    #[test]
    fn commutators_for_several_multiplicities() {
        for m in 2..=6 {
            let s = spin_operators(m).unwrap();
            let lhs = s.x.commutator(&s.y);
            let rhs = s.z.scale(crate::linalg::I);
            assert!((&lhs - &rhs).frobenius_norm() < 1e-12, "multiplicity {m}");
            assert!(s.x.is_hermitian(1e-15) && s.y.is_hermitian(1e-15));
        }
    }

    #[test]
    fn multiplicity_below_two_is_rejected() {
        assert!(matches!(spin_operators(1), Err(Error::InvalidArgument(_))));
        assert!(spin_operators(0).is_err());
    }

    #[test]
    fn embed_electron_sz() {
        let sz = spin_operators(3).unwrap().z;
        let e = embed(&sz, 0, &NV_DIMS).unwrap();
        assert_eq!(e.dim(), 18);
        let diag: Vec<f64> = e.diagonal().iter().map(|c| c.re).collect();
        assert!(diag[..6].iter().all(|&d| d == 1.0));
        assert!(diag[6..12].iter().all(|&d| d == 0.0));
        assert!(diag[12..].iter().all(|&d| d == -1.0));
        assert_eq!(e.trace(), ZERO);
        assert!(e.hermiticity_error() == 0.0);
    }

    #[test]
    fn embedded_disjoint_slots_commute() {
        let a = embed(&spin_operators(2).unwrap().z, 1, &NV_DIMS).unwrap();
        let b = embed(&spin_operators(3).unwrap().z, 0, &NV_DIMS).unwrap();
        assert!(a.commutator(&b).frobenius_norm() == 0.0);
        let c = embed(&spin_operators(2).unwrap().x, 1, &NV_DIMS).unwrap();
        assert!(c.commutator(&b).frobenius_norm() == 0.0);
    }

    #[test]
    fn embed_dimension_mismatch() {
        let sz = spin_operators(3).unwrap().z;
        assert!(embed(&sz, 1, &NV_DIMS).is_err());
        assert!(embed(&sz, 5, &NV_DIMS).is_err());
    }

    #[test]
    fn field_vector_examples() {
        let v = field_vector(&FieldSpec::new(28.9, 0.0, 0.0).unwrap()).unwrap();
        assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12 && (v[2] - 28.9).abs() < 1e-12);
        // 28.9 sin(38.4 deg) = 17.953, 28.9 cos(38.4 deg) = 22.649
        let v = field_vector(&FieldSpec::new(28.9, 38.4, 0.0).unwrap()).unwrap();
        assert!((v[0] - 17.95).abs() < 0.01 && v[1].abs() < 1e-12 && (v[2] - 22.65).abs() < 0.01);
        let v = field_vector(&FieldSpec::new(28.9, 90.0, 90.0).unwrap()).unwrap();
        assert!(v[0].abs() < 1e-12 && (v[1] - 28.9).abs() < 1e-12 && v[2].abs() < 1e-12);
    }

    #[test]
    fn field_spec_ranges() {
        assert!(FieldSpec::new(-1.0, 0.0, 0.0).is_err());
        assert!(FieldSpec::new(1.0, 181.0, 0.0).is_err());
        assert!(FieldSpec::new(1.0, 10.0, 360.0).is_err());
        assert!(FieldSpec::new(0.0, 180.0, 359.9).is_ok());
    }

    #[test]
    fn non_symmetric_tensor_rejected() {
        let mut p = SpinSystemParams::default();
        p.a1[0][2] = 25.0;
        assert!(matches!(
            build_hamiltonian(&p, &FieldSpec::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let p = SpinSystemParams::default();
        for (t, ph) in [(0.0, 0.0), (38.4, 0.0), (71.0, 123.0), (180.0, 300.0)] {
            let h = build_hamiltonian(&p, &FieldSpec::new(28.9, t, ph).unwrap()).unwrap();
            assert!(h.hermiticity_error() < 1e-12);
        }
    }

    #[test]
    fn basis_index_layout() {
        assert_eq!(basis_index(1, 1, 1).unwrap(), 0);
        assert_eq!(basis_index(-1, -1, -1).unwrap(), 17);
        assert_eq!(basis_index(0, -1, 0).unwrap(), 10);
        assert!(basis_index(2, 1, 0).is_err());
        assert!(basis_index(0, 0, 0).is_err());
    }

    #[test]
    fn ms0_projector_has_rank_six() {
        let p0 = NvOperators::new().ms0_projector();
        assert!(close(p0.trace(), 6.0));
        assert!((&(&p0 * &p0) - &p0).frobenius_norm() < 1e-15);
    }
}
