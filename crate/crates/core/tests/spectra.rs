use nvtls_core::eigen::eigensystem;
use nvtls_core::linalg::OperatorMatrix;
use nvtls_core::spectra::*;
use nvtls_core::spin::*;
use nvtls_core::{Complex64 as C64, Error};

fn defaults() -> SpinSystemParams {
    SpinSystemParams::default()
}

#[test]
fn lac_of_the_m_i2_zero_branch() {
    let d = find_lac(&defaults(), 28.9, 0.0, (35.0, 42.0), PairSelector::Branch(0)).unwrap();
    let theta = d.theta_star.unwrap();
    println!("theta* = {theta:.4} deg, omega0 = {:.4} MHz, moment = {:.4}, overlaps = {:?}", d.omega0, d.moment, d.reference_overlaps);
    assert!((theta - 38.4).abs() < 0.5);
    assert!((d.omega0 - 1.7).abs() < 0.2);
    assert!(d.moment >= 0.95);
    assert!(d.reference_overlaps.iter().all(|&o| o >= 0.98));
    assert!(crate_inner(&d.psi1, &d.psi2).norm() < 1e-10);
}

fn crate_inner(a: &[C64], b: &[C64]) -> C64 {
    nvtls_core::linalg::inner(a, b)
}

#[test]
fn side_branches_have_their_own_lacs() {
    let p = defaults();
    let main = find_lac(&p, 28.9, 0.0, (35.0, 42.0), PairSelector::Branch(0)).unwrap().theta_star.unwrap();
    let up = find_lac(&p, 28.9, 0.0, (30.0, 46.0), PairSelector::Branch(1)).unwrap();
    let down = find_lac(&p, 28.9, 0.0, (30.0, 46.0), PairSelector::Branch(-1)).unwrap();
    let (tu, td) = (up.theta_star.unwrap(), down.theta_star.unwrap());
    println!("m=+1: {tu:.3} deg / {:.3} MHz, m=-1: {td:.3} deg / {:.3} MHz", up.omega0, down.omega0);
    for t in [tu, td] {
        assert!((30.0..46.0).contains(&t));
        assert!((t - main).abs() > 1.0);
    }
    assert!(tu < main && main < td);
}

#[test]
fn forbidden_far_from_lac() {
    let e = eigensystem(&build_hamiltonian(&defaults(), &FieldSpec::new(28.9, 20.0, 0.0).unwrap()).unwrap()).unwrap();
    let d = tls_extract(&e, PairSelector::Branch(0)).unwrap();
    assert!(d.moment < 0.1, "moment {}", d.moment);
}

#[test]
fn no_lac_without_carbon_hyperfine() {
    let mut p = defaults();
    p.a1 = [[0.0; 3]; 3];
    let r = find_lac(&p, 28.9, 0.0, (35.0, 42.0), PairSelector::Branch(0));
    assert!(matches!(r, Err(Error::NotFound(_))), "{r:?}");
    // The pair keeps its bare m_s = +-1 character, so S_z cannot connect them.
    let e = eigensystem(&build_hamiltonian(&p, &FieldSpec::default()).unwrap()).unwrap();
    let d = tls_extract(&e, PairSelector::Branch(0)).unwrap();
    assert!(d.moment < 0.05, "moment {}", d.moment);
}

#[test]
fn weak_field_has_no_lac() {
    let r = find_lac(&defaults(), 20.0, 0.0, (35.0, 42.0), PairSelector::Branch(0));
    assert!(matches!(r, Err(Error::NotFound(_))));
}

#[test]
fn gap_ignores_eigenvector_phases() {
    let e = eigensystem(&build_hamiltonian(&defaults(), &FieldSpec::default()).unwrap()).unwrap();
    let d = tls_extract(&e, PairSelector::Branch(0)).unwrap();
    let mut rotated = e.clone();
    for (k, v) in rotated.vectors.iter_mut().enumerate() {
        let ph = C64::from_polar(1.0, 0.37 * k as f64 + 1.1);
        v.iter_mut().for_each(|x| *x *= ph);
    }
    let r = tls_extract(&rotated, PairSelector::Branch(0)).unwrap();
    assert!((r.omega0 - d.omega0).abs() < 1e-6);
    assert!((r.moment - d.moment).abs() < 1e-12);
}

#[test]
fn eigen_residuals_across_orientations() {
    let ops = NvOperators::new();
    for k in 0..=36 {
        let f = FieldSpec::new(28.9, 5.0 * k as f64, (17.0 * k as f64) % 360.0).unwrap();
        let h = ops.hamiltonian(&defaults(), &f).unwrap();
        let e = eigensystem(&h).unwrap();
        assert!(e.max_residual(&h) < 1e-9 * h.frobenius_norm());
        assert!(e.orthonormality_error() < 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn random_hermitian_trace_identity() {
    use proptest::prelude::*;
    proptest!(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() }, |(seed in proptest::collection::vec(-5.0f64..5.0, 18 * 18 * 2))| {
        let h = OperatorMatrix::from_fn(18, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            let re = seed[2 * (a * 18 + b)];
            let im = if i == j { 0.0 } else { seed[2 * (a * 18 + b) + 1] };
            if i <= j { C64::new(re, im) } else { C64::new(re, -im) }
        });
        let e = eigensystem(&h).unwrap();
        let sum: f64 = e.values.iter().sum();
        prop_assert!((sum - h.trace().re).abs() < 1e-9);
        prop_assert!(e.max_residual(&h) < 1e-9 * h.frobenius_norm().max(1.0));
        prop_assert!(e.orthonormality_error() < 1e-10);
    });
}

#[test]
fn level_curves_show_anticrossings_near_lac() {
    let grid: Vec<f64> = (0..=160).map(|k| 30.0 + 0.1 * k as f64).collect();
    let c = track_levels(&defaults(), 28.9, 0.0, &grid, &LevelSelector::LacManifold).unwrap();
    assert_eq!(c.curves.len(), 6);
    // Per-track smoothness: no jump between adjacent points larger than the slope budget.
    for curve in &c.curves {
        for w in curve.windows(2) {
            assert!((w[1] - w[0]).abs() < 1.0, "jump {}", w[1] - w[0]);
        }
    }
    // Smallest separation among the six curves has local minima (anti-crossings) near 38.4.
    let min_gap_at = |k: usize| {
        let mut g = f64::INFINITY;
        for a in 0..6 {
            for b in (a + 1)..6 {
                g = g.min((c.curves[a][k] - c.curves[b][k]).abs());
            }
        }
        g
    };
    let near: Vec<usize> = (0..grid.len()).filter(|&k| (grid[k] - 38.4).abs() < 0.3).collect();
    assert!(near.iter().any(|&k| min_gap_at(k) < 1.8));
}

#[test]
fn permutation_consistent_between_grid_resolutions() {
    let fine: Vec<f64> = (0..=64).map(|k| 34.0 + 0.125 * k as f64).collect();
    let coarse: Vec<f64> = fine.iter().step_by(2).copied().collect();
    let p = defaults();
    let a = track_levels(&p, 28.9, 0.0, &fine, &LevelSelector::All).unwrap();
    let b = track_levels(&p, 28.9, 0.0, &coarse, &LevelSelector::All).unwrap();
    for (ca, cb) in a.curves.iter().zip(&b.curves) {
        assert_eq!(ca.last(), cb.last());
    }
}

#[test]
fn decoupled_levels_truly_cross() {
    // Without hyperfine coupling the nuclear spins are spectators, so electron
    // levels dressed with 14N states split by the quadrupole term cross exactly. Sorted-index
    // curves could never change order; tracked curves must.
    let mut p = defaults();
    p.a1 = [[0.0; 3]; 3];
    p.a2 = [[0.0; 3]; 3];
    let grid: Vec<f64> = (0..=100).map(|k| 80.0 + 0.1 * k as f64).collect();
    let c = track_levels(&p, 28.9, 0.0, &grid, &LevelSelector::All).unwrap();
    let last = grid.len() - 1;
    let n = c.curves.len();
    let crossings = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .filter(|&(a, b)| {
            let d0 = c.curves[a][0] - c.curves[b][0];
            let d1 = c.curves[a][last] - c.curves[b][last];
            d0 * d1 < 0.0
        })
        .count();
    assert!(crossings > 0);
}
