use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;
use qprob::cond::{rho_slice_check, tower_check};
use qprob::generate::{self, rng_for, FixtureKind};
use qprob::linalg::CMatrix;
use qprob::{
    conditional_expectation, expectation, sqrt_psd, CondOptions, Error, HermitianMatrix, Partition,
    Povm, ProbeStateSet, QuantumRandomVariable, SampleSpace,
};

fn povm(seed: u64, n: usize, d: usize, rank: Option<usize>) -> Povm {
    let mut rng = rng_for(seed, FixtureKind::Povm);
    generate::random_povm(&mut rng, SampleSpace::indexed(n), d, rank).unwrap()
}

fn positive(seed: u64, nu: &Povm, shift: f64) -> QuantumRandomVariable {
    let mut rng = rng_for(seed, FixtureKind::PositiveQrv);
    generate::random_positive_qrv(&mut rng, nu.space().clone(), nu.dim(), shift).unwrap()
}

fn partition(seed: u64, n: usize) -> (Partition, Partition) {
    let mut rng = rng_for(seed, FixtureKind::RefiningFiltration);
    let f = generate::random_filtration(&mut rng, n, 4);
    (f.stages()[1].clone(), f.stages()[2].clone())
}

/// Solves `sum_x K_x Y K_x = sum_x K_x psi(x) K_x` over the complex matrices
/// with `vec(K Y K) = (K^T kron K) vec(Y)`.
fn kronecker_oracle(psi: &QuantumRandomVariable, nu: &Povm, block: &[usize]) -> CMatrix {
    let d = nu.dim();
    let mut op = CMatrix::zeros(d * d, d * d);
    let mut rhs = CMatrix::zeros(d, d);
    for &x in block {
        let k = sqrt_psd(nu.effect(x)).unwrap();
        let k = k.as_matrix();
        op += k.transpose().kronecker(k);
        rhs += k * psi.value(x).as_matrix() * k;
    }
    let v = DVector::from_column_slice(rhs.as_slice());
    let y = op.lu().solve(&v).expect("invertible block operator");
    CMatrix::from_column_slice(d, d, y.as_slice())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn matches_kronecker_oracle(seed in any::<u64>(), n in 2usize..=7, d in 1usize..=3) {
        let nu = povm(seed, n, d, None);
        let psi = positive(seed, &nu, 0.0);
        let (sigma, _) = partition(seed, n);
        let opts = CondOptions { clamp: false, ..CondOptions::default() };
        let solve = conditional_expectation(&psi, &nu, &sigma, opts).unwrap();
        for (k, block) in sigma.blocks().iter().enumerate() {
            let want = kronecker_oracle(&psi, &nu, block);
            let got = solve.block_values[k].as_matrix();
            let err = (got - &want).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(err < 1e-8 * (1.0 + want.iter().map(|z| z.norm()).fold(0.0, f64::max)), "block {k}: {err}");
        }
    }

    #[test]
    fn defining_property_and_mean_preservation(seed in any::<u64>(), n in 2usize..=7, d in 1usize..=4, deficient in any::<bool>()) {
        let rank = (deficient && d >= 2).then(|| d.div_ceil(n).min(d - 1));
        let nu = povm(seed, n, d, rank);
        let psi = positive(seed, &nu, 1.0);
        let (sigma, _) = partition(seed, n);
        let solve = conditional_expectation(&psi, &nu, &sigma, CondOptions::default()).unwrap();
        prop_assert!(solve.satisfies(1e-9));
        // independent check of the residuals the solver reports
        let phi = solve.to_qrv();
        for (k, block) in sigma.blocks().iter().enumerate() {
            if solve.clamped_blocks.contains(&k) {
                continue;
            }
            let lhs = expectation(&phi.indicator(block), &nu).unwrap();
            let rhs = expectation(&psi.indicator(block), &nu).unwrap();
            prop_assert!(lhs.max_dist(&rhs) < 1e-9);
        }
        if solve.clamped_blocks.is_empty() {
            let gap = expectation(&phi, &nu).unwrap().max_dist(&expectation(&psi, &nu).unwrap());
            prop_assert!(gap < 1e-8);
        }
    }

    #[test]
    fn tower_and_rho_slices(seed in any::<u64>(), n in 2usize..=7, d in 1usize..=3) {
        let nu = povm(seed, n, d, None);
        let psi = positive(seed, &nu, 2.0);
        let (f, g) = partition(seed, n);
        let opts = CondOptions::default();
        let t = tower_check(&psi, &nu, &f, &g, 1e-8, opts).unwrap();
        prop_assert!(t.passed && !t.clamped);
        let r = rho_slice_check(&psi, &nu, &g, &ProbeStateSet::standard(d), opts).unwrap();
        prop_assert!(r.block_deviation < 1e-8);
    }
}

#[test]
fn finest_partition_returns_psi() {
    let nu = povm(3, 5, 3, None);
    let psi = positive(3, &nu, 0.0);
    let solve = conditional_expectation(&psi, &nu, &Partition::discrete(5), CondOptions::default()).unwrap();
    assert!(solve.to_qrv().max_dist(&psi) < 1e-10);
}

#[test]
fn scalar_measure_is_classical() {
    let weights = [0.1, 0.2, 0.3, 0.4];
    let nu = Povm::scalar(SampleSpace::indexed(4), &weights, 2).unwrap();
    let psi = positive(4, &nu, 0.0);
    let sigma = Partition::from_blocks(4, vec![vec![0, 3], vec![1, 2]]).unwrap();
    let solve = conditional_expectation(&psi, &nu, &sigma, CondOptions::default()).unwrap();
    for (k, block) in sigma.blocks().iter().enumerate() {
        let mass: f64 = block.iter().map(|&x| weights[x]).sum();
        let mut avg = HermitianMatrix::zeros(2);
        for &x in block {
            avg += &psi.value(x).scale(weights[x] / mass);
        }
        assert!(solve.block_values[k].max_dist(&avg) < 1e-12);
    }
    let r = rho_slice_check(&psi, &nu, &sigma, &ProbeStateSet::standard(2), CondOptions::default()).unwrap();
    assert!(r.block_deviation < 1e-12 && r.pointwise_deviation < 1e-12);
}

#[test]
fn rho_slices_differ_pointwise_but_not_on_blocks() {
    let nu = povm(8, 4, 2, None);
    let psi = positive(8, &nu, 2.0);
    let sigma = Partition::trivial(4);
    let r = rho_slice_check(&psi, &nu, &sigma, &ProbeStateSet::standard(2), CondOptions::default()).unwrap();
    assert!(r.block_deviation < 1e-10);
    assert!(r.pointwise_deviation > 1e-3);
}

#[test]
fn trivial_tower_cases() {
    let nu = povm(5, 4, 2, None);
    let psi = positive(5, &nu, 2.0);
    let p = Partition::from_blocks(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
    assert!(tower_check(&psi, &nu, &p, &p, 1e-8, CondOptions::default()).unwrap().passed);
    let r = tower_check(&psi, &nu, &Partition::discrete(4), &Partition::trivial(4), 1e-8, CondOptions::default());
    assert!(matches!(r, Err(Error::NotNested(_))));
}

#[test]
fn zero_expectation_is_rejected_in_strict_mode() {
    let nu = povm(6, 4, 3, Some(1));
    let mut rng = rng_for(6, FixtureKind::PositiveQrv);
    let psi = generate::kernel_supported_qrv(&mut rng, &nu, true).unwrap();
    let sigma = Partition::trivial(4);
    assert!(matches!(
        conditional_expectation(&psi, &nu, &sigma, CondOptions::default()),
        Err(Error::ZeroExpectation)
    ));
    let lax = CondOptions { strict: false, ..CondOptions::default() };
    assert!(conditional_expectation(&psi, &nu, &sigma, lax).is_ok());
}

#[test]
fn general_variables_are_flagged() {
    let nu = povm(7, 3, 2, None);
    let mut rng = rng_for(7, FixtureKind::GeneralQrv);
    let psi = generate::random_general_qrv(&mut rng, nu.space().clone(), 2).unwrap();
    let solve = conditional_expectation(&psi, &nu, &Partition::trivial(3), CondOptions::default()).unwrap();
    assert!(solve.beyond_hypothesis && solve.clamped_blocks.is_empty());
}

/// With invertible effects the block solution is unique, so when it fails to
/// be positive no positive version exists; the clamp is recorded.
#[test]
fn non_positive_unique_solution_is_clamped_and_flagged() {
    let found = (0..500u64).find_map(|seed| {
        let n = 2 + (seed % 6) as usize;
        let nu = povm(seed, n, 2, None);
        let psi = positive(seed, &nu, 0.0);
        let solve = conditional_expectation(&psi, &nu, &Partition::trivial(n), CondOptions::default()).unwrap();
        (!solve.clamped_blocks.is_empty()).then_some((nu, psi))
    });
    let (nu, psi) = found.expect("some unshifted instance has no positive solution");
    let sigma = Partition::trivial(nu.len());
    let clamped = conditional_expectation(&psi, &nu, &sigma, CondOptions::default()).unwrap();
    assert_eq!(clamped.clamped_blocks, vec![0]);
    assert!(clamped.block_values[0].max_abs() == 0.0);
    assert!(clamped.satisfies(1e-9) && clamped.residuals[0] > 1e-3);

    let raw = conditional_expectation(&psi, &nu, &sigma, CondOptions { clamp: false, ..CondOptions::default() }).unwrap();
    assert!(raw.block_values[0].min_eigenvalue() < -1e-8);
    assert!(raw.residuals[0] < 1e-9);
    let oracle = kronecker_oracle(&psi, &nu, &sigma.blocks()[0]);
    let err = (raw.block_values[0].as_matrix() - oracle).iter().map(|z: &Complex64| z.norm()).fold(0.0, f64::max);
    assert!(err < 1e-8);
}
