use proptest::prelude::*;
use qprob::generate::{self, rng_for, FixtureKind};
use qprob::meanzero::{adjoint_mean_zero, counterexample_fixtures, ZERO_TOL};
use qprob::{classify_mean_zero, Povm, QuantumRandomVariable, SampleSpace};

fn povm(seed: u64, n: usize, d: usize, rank: Option<usize>) -> Povm {
    let mut rng = rng_for(seed, FixtureKind::Povm);
    generate::random_povm(&mut rng, SampleSpace::indexed(n), d, rank).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kernel_supported_positive_variables_are_mean_zero(seed in any::<u64>(), n in 2usize..=6, d in 2usize..=4) {
        let nu = povm(seed, n, d, Some(d.div_ceil(n).min(d - 1)));
        let mut rng = rng_for(seed, FixtureKind::PositiveQrv);
        let psi = generate::kernel_supported_qrv(&mut rng, &nu, true).unwrap();
        let r = classify_mean_zero(&psi, &nu, ZERO_TOL).unwrap();
        prop_assert!(r.all_agree() && r.e == Some(true) && r.e_via_ranges == Some(true));
        prop_assert!(adjoint_mean_zero(&psi, &nu, ZERO_TOL).unwrap().holds());
    }

    #[test]
    fn boxtimes_null_variables_separate_d_from_c(seed in any::<u64>(), n in 2usize..=6, d in 2usize..=4) {
        let nu = povm(seed, n, d, Some(d.div_ceil(n).min(d - 1)));
        let mut rng = rng_for(seed, FixtureKind::GeneralQrv);
        let psi = generate::boxtimes_null_qrv(&mut rng, &nu).unwrap();
        let r = classify_mean_zero(&psi, &nu, ZERO_TOL).unwrap();
        prop_assert!(r.a && r.d && !r.c && !r.b);
        prop_assert!(r.implications_hold());
    }

    #[test]
    fn adjoint_condition_implies_mean_zero(seed in any::<u64>(), n in 2usize..=6, d in 2usize..=3) {
        let nu = povm(seed, n, d, Some(d.div_ceil(n).min(d - 1)));
        let mut rng = rng_for(seed, FixtureKind::GeneralQrv);
        let psi = generate::kernel_supported_qrv(&mut rng, &nu, false).unwrap();
        let r = adjoint_mean_zero(&psi, &nu, ZERO_TOL).unwrap();
        prop_assert!(r.left_condition && r.holds());
        let noise = generate::random_general_qrv(&mut rng, nu.space().clone(), d).unwrap();
        prop_assert!(adjoint_mean_zero(&noise, &nu, ZERO_TOL).unwrap().holds());
    }
}

#[test]
fn fixtures_separate_the_statements() {
    let f = counterexample_fixtures();
    let r1 = classify_mean_zero(&f.psi1, &f.nu1, ZERO_TOL).unwrap();
    assert!(r1.a && !r1.b && !r1.c && !r1.d);
    let r2 = classify_mean_zero(&f.psi2, &f.nu2, ZERO_TOL).unwrap();
    assert!(r2.a && !r2.b && !r2.c && r2.d);
    // neither variable is positive, so the fifth statement does not apply
    assert!(r1.e.is_none() && r2.e.is_none());
    assert!(!adjoint_mean_zero(&f.psi2, &f.nu2, ZERO_TOL).unwrap().left_condition);
}

#[test]
fn mean_zero_shift_realizes_a_without_d() {
    let nu = povm(11, 3, 2, None);
    let mut rng = rng_for(11, FixtureKind::GeneralQrv);
    let psi: QuantumRandomVariable = generate::mean_zero_qrv(&mut rng, &nu).unwrap().unwrap();
    let r = classify_mean_zero(&psi, &nu, ZERO_TOL).unwrap();
    assert!(r.a && !r.d);
}
