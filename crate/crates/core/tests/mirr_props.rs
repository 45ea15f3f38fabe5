mod common;

use carascale::caratheodory::{ActiveBasis, DependenceVerdict, MirrConfig, MirrEvent, SimplexPoint};
use carascale::linalg::{pseudoinverse_direct, DenseMatrix};
use proptest::prelude::*;
use rand::Rng;

use common::{gaussian_points, max_abs_diff, random_mirr_step, rng};

/// Least-squares coefficients of `ã_j` on the augmented basis columns,
/// computed from the direct pseudoinverse.
fn oracle_coefficients(ab: &ActiveBasis, points: &DenseMatrix, j: usize) -> Vec<f64> {
    let direct = pseudoinverse_direct(&ab.augmented_matrix(points)).unwrap();
    let mut aug = vec![1.0];
    aug.extend_from_slice(points.row(j));
    direct.mul_vec(&aug).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_sequences_keep_every_invariant(seed in any::<u64>(), m in 1usize..=6, extra in 1usize..=20) {
        let n = m + 1 + extra;
        let mut r = rng(seed);
        let points = gaussian_points(&mut r, n, m);
        let start = r.random_range(0..n);
        let (mut x, mut ab) = ActiveBasis::init_active(&points, start, MirrConfig::for_dimension(n));
        for _ in 0..60 {
            let before_len = ab.len();
            let step = random_mirr_step(&mut r, &points, &mut ab, &mut x).unwrap();

            // Representation preserved.
            let after = x.represented(&points);
            prop_assert!(max_abs_diff(&after, &step.target) <= 1e-10);
            // Simplex membership.
            prop_assert!(x.weights().iter().all(|w| *w >= 0.0));
            prop_assert!(x.sum_defect() <= 1e-10);
            // Support inside the basis, basis affinely independent.
            prop_assert!(x.support().all(|i| ab.contains(i)));
            prop_assert!(ab.len() <= m + 1);
            let report = ab.check_consistency(&points, &x, &after);
            prop_assert!(report.within(1e-8), "{:?}", report);
            // Basis size changes by at most one per call.
            match step.event {
                MirrEvent::Extended => {
                    prop_assert_eq!(ab.len(), before_len + 1);
                    prop_assert!(ab.contains(step.entering));
                }
                MirrEvent::Reduced(out) => {
                    prop_assert_eq!(ab.len(), before_len);
                    prop_assert!(out.theta >= 0.0);
                    prop_assert_eq!(ab.contains(step.entering), out.replaced);
                }
            }
        }
    }

    #[test]
    fn dependence_verdict_matches_the_oracle(seed in any::<u64>(), m in 1usize..=6, extra in 1usize..=10) {
        let n = m + 1 + extra;
        let mut r = rng(seed);
        let points = gaussian_points(&mut r, n, m);
        let (mut x, mut ab) = ActiveBasis::init_active(&points, 0, MirrConfig::for_dimension(n));
        let steps = r.random_range(0..2 * m + 2);
        for _ in 0..steps {
            random_mirr_step(&mut r, &points, &mut ab, &mut x).unwrap();
        }
        let outside: Vec<usize> = (0..n).filter(|i| !ab.contains(*i)).collect();
        let j = outside[r.random_range(0..outside.len())];
        let coeffs = oracle_coefficients(&ab, &points, j);
        match ab.affine_dependence(&points, j) {
            DependenceVerdict::Independent { u_prime, residual_sq, .. } => {
                prop_assert!(ab.len() <= m);
                prop_assert!(residual_sq > 0.0);
                prop_assert!(max_abs_diff(&u_prime, &coeffs) <= 1e-8);
            }
            DependenceVerdict::Dependent { u_prime } => {
                // Gaussian points are in general position: only a full basis
                // can absorb a new point.
                prop_assert_eq!(ab.len(), m + 1);
                prop_assert!(max_abs_diff(&u_prime, &coeffs) <= 1e-8);
                prop_assert!((u_prime.iter().sum::<f64>() - 1.0).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn thousand_calls_keep_consistency() {
    let mut r = rng(2024);
    let (n, m) = (40, 8);
    let points = gaussian_points(&mut r, n, m);
    let (mut x, mut ab) = ActiveBasis::init_active(&points, 3, MirrConfig::for_dimension(n));
    for _ in 0..1000 {
        random_mirr_step(&mut r, &points, &mut ab, &mut x).unwrap();
    }
    let a = ab.augmented_matrix(&points);
    let defect = ab.pinv_matrix().matmul(&a).unwrap().max_abs_diff(&DenseMatrix::identity(ab.len()));
    assert!(defect <= 1e-8, "defect {defect:e}");
    let report = ab.check_consistency(&points, &x, &x.represented(&points));
    assert!(report.within(1e-8), "{report:?}");
}

#[test]
fn extensions_from_a_vertex_fill_the_basis() {
    let mut r = rng(7);
    let (n, m) = (12, 4);
    let points = gaussian_points(&mut r, n, m);
    let (mut x, mut ab) = ActiveBasis::init_active(&points, 0, MirrConfig::for_dimension(n));
    for j in 1..=m {
        let mut w = x.weights().to_vec();
        w.iter_mut().for_each(|v| *v *= 0.5);
        w[j] += 0.5;
        x = SimplexPoint::from_weights(w).unwrap();
        assert_eq!(ab.mirr(&points, &mut x, j).unwrap(), MirrEvent::Extended);
        let direct = pseudoinverse_direct(&ab.augmented_matrix(&points)).unwrap();
        assert!(ab.pinv_matrix().max_abs_diff(&direct) <= 1e-10);
    }
    assert_eq!(ab.indices(), &[0, 1, 2, 3, 4]);
    let x_before = x.represented(&points);
    let mut w = x.weights().to_vec();
    w.iter_mut().for_each(|v| *v *= 0.5);
    w[5] += 0.5;
    x = SimplexPoint::from_weights(w).unwrap();
    let target = x.represented(&points);
    assert!(matches!(ab.mirr(&points, &mut x, 5).unwrap(), MirrEvent::Reduced(_)));
    assert!(max_abs_diff(&x.represented(&points), &target) <= 1e-12);
    assert!(x.support_len() <= m + 1);
    assert!(max_abs_diff(&x_before, &target) > 0.0);
}
