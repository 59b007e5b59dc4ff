use num_complex::Complex64;
use proptest::prelude::*;
use qprob::generate::{self, rng_for, FixtureKind};
use qprob::linalg::{
    geometric_mean_regularized, max_abs, pinv_psd, trace_product, CMatrix, MEAN_CAUCHY_TOL,
    MEAN_EPS_SCHEDULE,
};
use qprob::{geometric_mean, range_projector, sqrt_psd, trace_pair, DensityOperator, Error, HermitianMatrix};

/// PSD of rank `r`, largest eigenvalue at most `scale`.
fn psd(seed: u64, d: usize, r: usize, scale: f64) -> HermitianMatrix {
    let mut rng = rng_for(seed, FixtureKind::PositiveQrv);
    let g = generate::random_gram(&mut rng, d, r);
    g.scale(scale / g.max_eigenvalue().max(1e-300))
}

fn loewner_gap(big: &HermitianMatrix, small: &HermitianMatrix) -> f64 {
    (big - small).min_eigenvalue()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1200))]

    #[test]
    fn sqrt_squares_back(seed in any::<u64>(), d in 1usize..=6, r in 1usize..=6, scale in 1e-6f64..1e3) {
        let m = psd(seed, d, r.min(d), scale);
        let s = sqrt_psd(&m).unwrap();
        prop_assert!(s.min_eigenvalue() >= -1e-12 * scale.sqrt());
        let sq = HermitianMatrix::new(s.product(&s)).unwrap();
        prop_assert!(sq.max_dist(&m) < 1e-10, "deviation {}", sq.max_dist(&m));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn geometric_mean_is_symmetric(seed in any::<u64>(), d in 1usize..=4, ra in 1usize..=4, rb in 1usize..=4) {
        let a = psd(seed, d, ra.min(d), 3.0);
        let b = psd(seed ^ 0x5555, d, rb.min(d), 2.0);
        let ab = geometric_mean(&a, &b).unwrap();
        let ba = geometric_mean(&b, &a).unwrap();
        prop_assert!(ab.max_dist(&ba) < 1e-8, "asymmetry {}", ab.max_dist(&ba));
        prop_assert!(ab.min_eigenvalue() > -1e-9);
    }

    #[test]
    fn geometric_mean_is_monotone(seed in any::<u64>(), d in 1usize..=4, ra in 1usize..=4, rb in 1usize..=4) {
        let a = psd(seed, d, ra.min(d), 2.0);
        let b = psd(seed ^ 0xaaaa, d, rb.min(d), 2.0);
        let a2 = &a + &psd(seed ^ 0x1234, d, 1, 1.0);
        let b2 = &b + &psd(seed ^ 0x4321, d, d, 0.5);
        let small = geometric_mean(&a, &b).unwrap();
        let big = geometric_mean(&a2, &b2).unwrap();
        prop_assert!(loewner_gap(&big, &small) > -1e-7, "gap {}", loewner_gap(&big, &small));
    }

    #[test]
    fn mean_of_commuting_diagonals_is_elementwise_root(a in prop::collection::vec(0.0f64..5.0, 1..5), seed in any::<u64>()) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, _)| ((seed >> (i * 8)) & 0xff) as f64 / 32.0).collect();
        let m = geometric_mean(&HermitianMatrix::diag(&a), &HermitianMatrix::diag(&b)).unwrap();
        let want: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x * y).sqrt()).collect();
        prop_assert!(m.max_dist(&HermitianMatrix::diag(&want)) < 1e-9);
    }

    #[test]
    fn range_projector_properties(seed in any::<u64>(), d in 1usize..=5, r in 1usize..=5) {
        let m = psd(seed, d, r.min(d), 4.0);
        let p = range_projector(&m, 1e-10);
        let pp = HermitianMatrix::new(p.product(&p)).unwrap();
        prop_assert!(pp.max_dist(&p) < 1e-9);
        prop_assert!(max_abs(&(p.product(&m) - m.product(&p))) < 1e-9);
        prop_assert!(max_abs(&(p.product(&m) - m.as_matrix())) < 1e-9);
        prop_assert!((p.trace() - r.min(d) as f64).abs() < 1e-9);
        // a PSD matrix and its square root share their range
        let q = range_projector(&sqrt_psd(&m).unwrap(), 1e-10);
        prop_assert!(q.max_dist(&p) < 1e-9);
    }

    #[test]
    fn trace_is_cyclic(seed in any::<u64>(), d in 1usize..=5) {
        let mut rng = rng_for(seed, FixtureKind::GeneralQrv);
        let rho = psd(seed, d, d, 1.0);
        let rho = rho.scale(1.0 / rho.trace());
        let u = generate::ginibre(&mut rng, d, d);
        let v = generate::ginibre(&mut rng, d, d);
        let lhs = trace_product(&(rho.as_matrix() * &u), &v);
        let rhs = trace_product(&(&v * rho.as_matrix()), &u);
        prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn pinv_inverts_invertible(seed in any::<u64>(), d in 1usize..=5) {
        let m = &psd(seed, d, d, 3.0) + &HermitianMatrix::identity(d).scale(0.1);
        let p = pinv_psd(&m).unwrap();
        prop_assert!(max_abs(&(m.product(&p) - CMatrix::identity(d, d))) < 1e-10);
    }
}

#[test]
fn small_examples() {
    let a = HermitianMatrix::diag(&[1.0, 2.0]);
    assert!(geometric_mean(&a, &a).unwrap().max_dist(&a) < 1e-12);
    let b = HermitianMatrix::diag(&[4.0, 9.0]);
    let m = geometric_mean(&HermitianMatrix::identity(2), &b).unwrap();
    assert!(m.max_dist(&HermitianMatrix::diag(&[2.0, 3.0])) < 1e-12);
    let z = geometric_mean(&HermitianMatrix::diag(&[1.0, 0.0]), &HermitianMatrix::diag(&[0.0, 1.0])).unwrap();
    assert!(z.max_abs() < 1e-12);

    assert!(pinv_psd(&HermitianMatrix::diag(&[2.0, 0.0])).unwrap().max_dist(&HermitianMatrix::diag(&[0.5, 0.0])) < 1e-15);
    assert!(pinv_psd(&HermitianMatrix::zeros(3)).unwrap().max_abs() == 0.0);
    assert!(range_projector(&HermitianMatrix::diag(&[3.0, 0.0]), 1e-10).max_dist(&HermitianMatrix::diag(&[1.0, 0.0])) < 1e-15);

    let half = DensityOperator::maximally_mixed(2);
    let t = trace_pair(&half, &HermitianMatrix::diag(&[3.0, 5.0])).unwrap();
    assert!((t - Complex64::new(4.0, 0.0)).norm() < 1e-15);
    assert!(matches!(trace_pair(&half, &HermitianMatrix::identity(3)), Err(Error::DimMismatch { .. })));
}

#[test]
fn regularized_mean_fails_to_settle_on_orthogonal_projectors() {
    // (diag(1,0) + e) # (diag(0,1) + e) = sqrt(e (1 + e)) * 1, whose steps
    // shrink only like sqrt(e)
    let r = geometric_mean_regularized(
        &HermitianMatrix::diag(&[1.0, 0.0]),
        &HermitianMatrix::diag(&[0.0, 1.0]),
        &MEAN_EPS_SCHEDULE,
        MEAN_CAUCHY_TOL,
    );
    assert!(matches!(r, Err(Error::MeanDidNotConverge { .. })));
}

#[test]
fn regularized_mean_matches_exact_mean_when_it_converges() {
    // shared range: the regularization error is O(eps), so the schedule settles
    let a = HermitianMatrix::diag(&[2.0, 0.0]);
    let b = HermitianMatrix::diag(&[1.0, 0.0]);
    let exact = geometric_mean(&a, &b).unwrap();
    let reg = geometric_mean_regularized(&a, &b, &MEAN_EPS_SCHEDULE, MEAN_CAUCHY_TOL).unwrap();
    assert!(exact.max_dist(&HermitianMatrix::diag(&[2f64.sqrt(), 0.0])) < 1e-12);
    assert!(reg.max_dist(&exact) < 1e-7);
}
