//! Quantum expectation and its continuity properties.
//!
//! On a finite space the quantum expectation is the quantum average
//! `E[psi] = sum_x nu_x^{1/2} psi(x) nu_x^{1/2}`; equivalently
//! `sum_x mu(x) (psi boxtimes w)(x)` with `w` the principal derivative.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, DensityOperator, HermitianMatrix, Spectrum};
use crate::povm::Povm;
use crate::variable::{ProbeStateSet, QuantumRandomVariable};

/// Number of trailing terms inspected by the Cauchy convergence test.
pub const CAUCHY_WINDOW: usize = 5;
/// Smallest eigenvalue admitted by the effect series.
pub const EPS_INV: f64 = 1e-6;

fn require_same(psi: &QuantumRandomVariable, nu: &Povm) -> Result<()> {
    if psi.space() != nu.space() {
        return Err(Error::SpaceMismatch(format!(
            "variable has {} points, POVM has {}",
            psi.len(),
            nu.len()
        )));
    }
    if psi.dim() != nu.dim() {
        return Err(Error::SpaceMismatch(format!(
            "variable has dim {}, POVM has dim {}",
            psi.dim(),
            nu.dim()
        )));
    }
    Ok(())
}

/// Pointwise `w^{1/2} psi w^{1/2}` for an arbitrary PSD-valued `w`.
pub fn boxtimes_with(psi: &QuantumRandomVariable, w: &QuantumRandomVariable) -> Result<QuantumRandomVariable> {
    psi.require_compatible(w)?;
    let roots = w
        .values()
        .iter()
        .map(linalg::sqrt_psd)
        .collect::<Result<Vec<_>>>()?;
    Ok(psi.map(|i, v| v.congruence(&roots[i])))
}

/// `psi boxtimes dnu/dmu`.
pub fn boxtimes(psi: &QuantumRandomVariable, nu: &Povm) -> Result<QuantumRandomVariable> {
    require_same(psi, nu)?;
    boxtimes_with(psi, &nu.principal_rn())
}

/// `psi boxtimes dnu2/dnu1 = G W1^{1/2} psi W1^{1/2} G` with
/// `G = W1^{-1} # dnu2/dnu1`, pseudoinverse for singular `W1`.
pub fn general_boxtimes(
    psi: &QuantumRandomVariable,
    nu2: &Povm,
    nu1: &Povm,
) -> Result<QuantumRandomVariable> {
    require_same(psi, nu1)?;
    nu1.require_probability()?;
    nu2.require_probability()?;
    let rn = nu2.nonprincipal_rn(nu1)?;
    let w1 = nu1.principal_rn();
    let mut values = Vec::with_capacity(psi.len());
    for i in 0..psi.len() {
        if !nu1.is_positive_atom(i) {
            values.push(HermitianMatrix::zeros(psi.dim()));
            continue;
        }
        let g = linalg::geometric_mean(&linalg::pinv_psd(w1.value(i))?, rn.derivative.value(i))?;
        let inner = psi.value(i).congruence(&linalg::sqrt_psd(w1.value(i))?);
        values.push(inner.congruence(&g));
    }
    QuantumRandomVariable::new(psi.space().clone(), values)
}

/// The classical function `x -> tr(rho (psi boxtimes w)(x))`.
pub fn psi_rho(psi: &QuantumRandomVariable, rho: &DensityOperator, nu: &Povm) -> Result<Vec<f64>> {
    if rho.dim() != psi.dim() {
        return Err(Error::DimMismatch {
            expected: psi.dim(),
            found: rho.dim(),
        });
    }
    let bx = boxtimes(psi, nu)?;
    bx.values()
        .iter()
        .map(|v| linalg::trace_pair(rho, v).map(|z| z.re))
        .collect()
}

/// `E_nu[psi] = sum_x nu_x^{1/2} psi(x) nu_x^{1/2}`.
pub fn expectation(psi: &QuantumRandomVariable, nu: &Povm) -> Result<HermitianMatrix> {
    require_same(psi, nu)?;
    nu.require_probability()?;
    let mut acc = HermitianMatrix::zeros(psi.dim());
    for (i, v) in psi.values().iter().enumerate() {
        if nu.is_positive_atom(i) {
            acc += &v.congruence(&linalg::sqrt_psd(nu.effect(i))?);
        }
    }
    Ok(acc)
}

/// `sum_x mu(x) (psi boxtimes dnu/dmu)(x)`; equal to [`expectation`].
pub fn expectation_via_density(psi: &QuantumRandomVariable, nu: &Povm) -> Result<HermitianMatrix> {
    nu.require_probability()?;
    let bx = boxtimes(psi, nu)?;
    let mu = nu.induced_measure();
    let mut acc = HermitianMatrix::zeros(psi.dim());
    for (i, v) in bx.values().iter().enumerate() {
        acc += &v.scale(mu.weight(i));
    }
    Ok(acc)
}

/// Block diagonal Choi matrix of `psi -> E_nu[psi]`.
///
/// The domain is the direct sum of one copy of `B(H)` per atom, so the Choi
/// matrix is the direct sum of the Choi matrices `sum_ij E_ij (x) K E_ij K`
/// with `K = nu_x^{1/2}`. Each block is `d^2 x d^2`.
#[derive(Clone, Debug)]
pub struct ChoiMatrix {
    pub blocks: Vec<CMatrix>,
}

impl ChoiMatrix {
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| Spectrum::of(b).min())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn size(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }
}

pub fn choi_matrix(nu: &Povm) -> Result<ChoiMatrix> {
    nu.require_probability()?;
    let d = nu.dim();
    let mut blocks = Vec::with_capacity(nu.len());
    for e in nu.effects() {
        let k = linalg::sqrt_psd(e)?;
        let mut c = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let mut unit = CMatrix::zeros(d, d);
                unit[(i, j)] = Complex64::new(1.0, 0.0);
                let image = k.as_matrix() * unit * k.as_matrix();
                for a in 0..d {
                    for b in 0..d {
                        c[(i * d + a, j * d + b)] = image[(a, b)];
                    }
                }
            }
        }
        blocks.push(c);
    }
    Ok(ChoiMatrix { blocks })
}

/// Ultraweak limit of a sequence, certified on a spanning probe set.
///
/// Every scalar sequence `tr(rho psi_n(x))` must vary by less than `tol`
/// over the last [`CAUCHY_WINDOW`] terms; the final term is returned as the
/// limit candidate.
pub fn uw_as_limit(
    seq: &[QuantumRandomVariable],
    probes: &ProbeStateSet,
    tol: f64,
) -> Result<QuantumRandomVariable> {
    let last = seq.last().ok_or(Error::EmptySequence)?;
    for q in seq {
        last.require_compatible(q)?;
    }
    if probes.dim() != last.dim() {
        return Err(Error::DimMismatch {
            expected: last.dim(),
            found: probes.dim(),
        });
    }
    let window = &seq[seq.len().saturating_sub(CAUCHY_WINDOW)..];
    let mut worst = (0.0, 0, 0);
    for x in 0..last.len() {
        let end = probes.traces(last.value(x));
        for q in window {
            for (k, t) in probes.traces(q.value(x)).iter().enumerate() {
                let r = (t - end[k]).abs();
                if r > worst.0 || r.is_nan() {
                    worst = (r, k, x);
                }
            }
        }
    }
    // NaN residuals count as not converged
    if worst.0.is_nan() || worst.0 >= tol {
        return Err(Error::NotConverged {
            residual: worst.0,
            probe: worst.1,
            atom: last.space().label(worst.2).to_string(),
        });
    }
    Ok(last.clone())
}

/// Result of a dominated convergence experiment.
#[derive(Clone, Debug)]
pub struct DctReport {
    /// `Z(x) = sup_{n, rho} |tr(rho (psi_n boxtimes w)(x))|`.
    pub envelope: Vec<f64>,
    pub limit: QuantumRandomVariable,
    pub limit_expectation: HermitianMatrix,
    /// `max_rho |tr(rho E[psi_n]) - tr(rho E[psi])|` for each `n`.
    pub residuals: Vec<f64>,
    /// Least-squares slope of `log residual` against `log n` over the second half.
    pub rate: Option<f64>,
    pub converged: bool,
}

impl DctReport {
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("nonempty sequence")
    }
}

/// Continuity of quantum expectation along `seq`.
///
/// The limit is taken from `limit` when supplied, otherwise certified by
/// [`uw_as_limit`].
pub fn dct_check(
    seq: &[QuantumRandomVariable],
    nu: &Povm,
    probes: &ProbeStateSet,
    limit: Option<&QuantumRandomVariable>,
    tol: f64,
) -> Result<DctReport> {
    let limit = match limit {
        Some(l) => l.clone(),
        None => uw_as_limit(seq, probes, tol)?,
    };
    let limit_expectation = expectation(&limit, nu)?;
    let target = probes.traces(&limit_expectation);
    let mut envelope = vec![0.0f64; nu.len()];
    let mut residuals = Vec::with_capacity(seq.len());
    for q in seq {
        let bx = boxtimes(q, nu)?;
        for (x, v) in bx.values().iter().enumerate() {
            for t in probes.traces(v) {
                envelope[x] = envelope[x].max(t.abs());
            }
        }
        let e = expectation(q, nu)?;
        let r = probes
            .traces(&e)
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        residuals.push(r);
    }
    let rate = fitted_rate(&residuals);
    let converged = residuals.last().is_some_and(|&r| r < tol);
    Ok(DctReport {
        envelope,
        limit,
        limit_expectation,
        residuals,
        rate,
        converged,
    })
}

fn fitted_rate(residuals: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = residuals
        .iter()
        .enumerate()
        .skip(residuals.len() / 2)
        .filter(|(_, &r)| r > 0.0)
        .map(|(k, &r)| (((k + 1) as f64).ln(), r.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Both sides of `E[sum psi_n] = sum E[psi_n]`.
#[derive(Clone, Debug)]
pub struct SeriesReport {
    pub sum_of_expectations: HermitianMatrix,
    pub expectation_of_sum: HermitianMatrix,
    pub terms_used: usize,
    pub agreement: f64,
}

/// Sums a series of quantum random variables both ways.
///
/// Lists shorter than the Cauchy window are finite sums. Longer lists are
/// truncated at the first index where the trailing window of partial sums is
/// Cauchy within `tol`; if that never happens the series is rejected.
pub fn series_expectation(terms: &[QuantumRandomVariable], nu: &Povm, tol: f64) -> Result<SeriesReport> {
    let first = terms.first().ok_or(Error::EmptySequence)?;
    let probes = ProbeStateSet::standard(first.dim());
    let mut partial: Vec<QuantumRandomVariable> = Vec::new();
    let mut sum_e = HermitianMatrix::zeros(first.dim());
    let mut step_norms: Vec<f64> = Vec::new();
    let mut used = 0;
    for t in terms {
        let e = expectation(t, nu)?;
        sum_e += &e;
        let next = match partial.last() {
            Some(p) => p.add(t)?,
            None => t.clone(),
        };
        if next.values().iter().any(|v| !v.max_abs().is_finite()) {
            return Err(Error::PartialSumsDiverge("non-finite partial sum".into()));
        }
        partial.push(next);
        // measured on the probes, like the convergence test below
        let step = t
            .values()
            .iter()
            .flat_map(|v| probes.traces(v))
            .fold(0.0f64, |m, x| m.max(x.abs()));
        step_norms.push(step);
        used += 1;
        let tail = &step_norms[step_norms.len().saturating_sub(CAUCHY_WINDOW - 1)..];
        if partial.len() >= CAUCHY_WINDOW && tail.iter().sum::<f64>() < tol {
            break;
        }
    }
    let limit = if terms.len() < CAUCHY_WINDOW {
        partial.last().expect("nonempty").clone()
    } else {
        uw_as_limit(&partial, &probes, tol).map_err(|e| match e {
            Error::NotConverged { residual, .. } => Error::PartialSumsDiverge(format!(
                "partial sums still move by {residual:e} after {used} terms"
            )),
            other => other,
        })?
    };
    let expectation_of_sum = expectation(&limit, nu)?;
    let agreement = sum_e.max_dist(&expectation_of_sum);
    Ok(SeriesReport {
        sum_of_expectations: sum_e,
        expectation_of_sum,
        terms_used: used,
        agreement,
    })
}

/// A-priori truncation for the effect series: smallest `n` with
/// `(1 + l^2)^{-n} < tol * l^2`, `l` the smallest eigenvalue.
pub fn effect_series_n_max(lambda_min: f64, tol: f64) -> usize {
    let l2 = lambda_min * lambda_min;
    let q = 1.0 / (1.0 + l2);
    let target = tol * l2;
    let mut n = ((target.ln() / q.ln()).floor().max(1.0)) as usize;
    while q.powi(n as i32) >= target {
        n += 1;
    }
    n
}

#[derive(Clone, Debug)]
pub struct EffectSeriesReport {
    pub n_max: usize,
    pub sum: HermitianMatrix,
    /// `|sum - 1|_max`.
    pub residual: f64,
    pub passed: bool,
}

/// Evaluates `sum_{n=1}^{n_max} E[psi M^n psi]` with `M = 1 - (1 + psi^{-2})^{-1}`.
///
/// `psi` must be effect valued with every eigenvalue at least [`EPS_INV`];
/// `n_max` defaults to [`effect_series_n_max`].
pub fn effect_series_identity(
    psi: &QuantumRandomVariable,
    nu: &Povm,
    n_max: Option<usize>,
    tol: f64,
) -> Result<EffectSeriesReport> {
    require_same(psi, nu)?;
    nu.require_probability()?;
    let d = psi.dim();
    let mut lambda_min = f64::INFINITY;
    for (i, v) in psi.values().iter().enumerate() {
        let spec = v.spectrum();
        let label = psi.space().label(i).to_string();
        if spec.min() < EPS_INV {
            return Err(Error::NotStrictlyPositiveEffect {
                label,
                min_eigenvalue: spec.min(),
                required: EPS_INV,
            });
        }
        if spec.max() > 1.0 + linalg::PSD_TOL {
            return Err(Error::NotAnEffect {
                label,
                reason: format!("eigenvalue {} exceeds 1", spec.max()),
            });
        }
        lambda_min = lambda_min.min(spec.min());
    }
    let n_max = n_max.unwrap_or_else(|| effect_series_n_max(lambda_min, tol));

    let id = CMatrix::identity(d, d);
    let mut roots = Vec::with_capacity(psi.len());
    let mut ms = Vec::with_capacity(psi.len());
    for (i, v) in psi.values().iter().enumerate() {
        roots.push(linalg::sqrt_psd(nu.effect(i))?);
        let inv_sq = v.spectrum().apply(|l| 1.0 / (l * l));
        let inner = (&id + inv_sq)
            .try_inverse()
            .ok_or_else(|| Error::InvalidMatrix("1 + psi^-2 not invertible".into()))?;
        ms.push(&id - inner);
    }

    let mut powers: Vec<CMatrix> = ms.clone();
    let mut sum = CMatrix::zeros(d, d);
    for n in 1..=n_max {
        for (i, v) in psi.values().iter().enumerate() {
            if !nu.is_positive_atom(i) {
                continue;
            }
            if n > 1 {
                powers[i] = &powers[i] * &ms[i];
            }
            let term = v.as_matrix() * &powers[i] * v.as_matrix();
            let k = roots[i].as_matrix();
            sum += k * term * k;
        }
    }
    let sum = HermitianMatrix::from_raw(sum);
    let residual = sum.max_dist(&HermitianMatrix::identity(d));
    Ok(EffectSeriesReport {
        n_max,
        sum,
        passed: residual < tol,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::SampleSpace;

    fn nu1() -> Povm {
        let half = HermitianMatrix::identity(2).scale(0.5);
        Povm::new(SampleSpace::indexed(2), vec![half.clone(), half]).unwrap()
    }

    fn nu2() -> Povm {
        Povm::new(
            SampleSpace::indexed(2),
            vec![HermitianMatrix::diag(&[1.0, 0.0]), HermitianMatrix::diag(&[0.0, 1.0])],
        )
        .unwrap()
    }

    fn psi1() -> QuantumRandomVariable {
        let id = HermitianMatrix::identity(2);
        QuantumRandomVariable::new(SampleSpace::indexed(2), vec![id.clone(), -&id]).unwrap()
    }

    fn psi2() -> QuantumRandomVariable {
        QuantumRandomVariable::new(
            SampleSpace::indexed(2),
            vec![
                HermitianMatrix::from_real(2, &[0.0, 1.0, 1.0, 1.0]).unwrap(),
                HermitianMatrix::from_real(2, &[1.0, 1.0, 1.0, 0.0]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn boxtimes_fixtures() {
        let b = boxtimes(&psi1(), &nu1()).unwrap();
        assert!(b.value(0).max_dist(&HermitianMatrix::identity(2)) < 1e-15);
        assert!(b.value(1).max_dist(&-&HermitianMatrix::identity(2)) < 1e-15);
        let b = boxtimes(&psi2(), &nu2()).unwrap();
        assert!(b.value(0).is_zero(1e-15) && b.value(1).is_zero(1e-15));
    }

    #[test]
    fn expectation_fixture_is_zero() {
        assert!(expectation(&psi1(), &nu1()).unwrap().is_zero(1e-15));
    }

    #[test]
    fn unital() {
        let one = QuantumRandomVariable::constant(SampleSpace::indexed(2), HermitianMatrix::identity(2));
        for nu in [nu1(), nu2()] {
            assert!(expectation(&one, &nu).unwrap().max_dist(&HermitianMatrix::identity(2)) < 1e-14);
        }
    }

    #[test]
    fn expectation_rejects_subnormalized() {
        let sub = Povm::new(SampleSpace::indexed(1), vec![HermitianMatrix::identity(2).scale(0.5)]).unwrap();
        let one = QuantumRandomVariable::constant(SampleSpace::indexed(1), HermitianMatrix::identity(2));
        assert!(matches!(expectation(&one, &sub), Err(Error::NotProbabilityMeasure { .. })));
    }

    #[test]
    fn psi_rho_examples() {
        let rho = DensityOperator::maximally_mixed(2);
        let v = psi_rho(&psi1(), &rho, &nu1()).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15 && (v[1] + 1.0).abs() < 1e-15);
        let z = psi_rho(&psi2(), &rho, &nu2()).unwrap();
        assert!(z.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn general_boxtimes_reductions() {
        // nu2 = nu1: dnu2/dnu1 = 1 and the product returns psi.
        let nu = Povm::new(
            SampleSpace::indexed(2),
            vec![HermitianMatrix::diag(&[0.7, 0.2]), HermitianMatrix::diag(&[0.3, 0.8])],
        )
        .unwrap();
        let psi = psi2();
        let g = general_boxtimes(&psi, &nu, &nu).unwrap();
        assert!(g.max_dist(&psi) < 1e-12);
        // reference mu * 1 with mu the induced measure: ordinary boxtimes.
        let mu = nu.induced_measure();
        let flat = Povm::scalar(SampleSpace::indexed(2), mu.weights(), 2).unwrap();
        let g = general_boxtimes(&psi, &nu, &flat).unwrap();
        assert!(g.max_dist(&boxtimes(&psi, &nu).unwrap()) < 1e-12);
    }

    #[test]
    fn choi_of_identity_map() {
        let p = Povm::new(SampleSpace::indexed(1), vec![HermitianMatrix::identity(2)]).unwrap();
        let c = choi_matrix(&p).unwrap();
        // d |Omega><Omega| with |Omega> = sum_i e_i (x) e_i / sqrt d
        let b = &c.blocks[0];
        assert_eq!(b[(0, 3)], Complex64::new(1.0, 0.0));
        assert_eq!(b[(1, 1)], Complex64::new(0.0, 0.0));
        assert!((c.min_eigenvalue()).abs() < 1e-14);
        assert!(choi_matrix(&nu2()).unwrap().min_eigenvalue() > -1e-14);
    }

    #[test]
    fn uw_limit_examples() {
        let s = SampleSpace::indexed(2);
        let psi = psi2();
        let probes = ProbeStateSet::standard(2);
        let id = HermitianMatrix::identity(2);
        let seq: Vec<_> = (1..=10_000)
            .map(|n| psi.add(&QuantumRandomVariable::constant(s.clone(), id.scale(1.0 / n as f64))).unwrap())
            .collect();
        let lim = uw_as_limit(&seq, &probes, 1e-6).unwrap();
        assert!(lim.max_dist(&psi) < 1e-3);
        assert!(uw_as_limit(&seq[..10], &probes, 1e-6).is_err());
        let constant = vec![psi.clone(); 3];
        assert_eq!(uw_as_limit(&constant, &probes, 1e-12).unwrap(), psi);
        assert!(matches!(uw_as_limit(&[], &probes, 1.0), Err(Error::EmptySequence)));
    }

    #[test]
    fn dct_linear_rate() {
        let psi = psi2();
        let seq: Vec<_> = (1..=1000).map(|n| psi.scale(1.0 - 1.0 / n as f64)).collect();
        let probes = ProbeStateSet::standard(2);
        let rep = dct_check(&seq, &nu1(), &probes, Some(&psi), 1e-2).unwrap();
        assert!(rep.converged);
        let rate = rep.rate.unwrap();
        assert!((rate + 1.0).abs() < 0.05, "rate {rate}");
        let constant = vec![psi.clone(); 6];
        let rep = dct_check(&constant, &nu1(), &probes, None, 1e-12).unwrap();
        assert!(rep.residuals.iter().all(|&r| r < 1e-15));
    }

    #[test]
    fn geometric_scalar_series() {
        let s = SampleSpace::indexed(2);
        let id = HermitianMatrix::identity(2);
        let terms: Vec<_> = (1..=60)
            .map(|n| QuantumRandomVariable::constant(s.clone(), id.scale(0.5f64.powi(n))))
            .collect();
        let r = series_expectation(&terms, &nu1(), 1e-10).unwrap();
        assert!(r.sum_of_expectations.max_dist(&id) < 1e-9);
        assert!(r.agreement < 1e-9);
        let single = series_expectation(&terms[..1], &nu1(), 1e-10).unwrap();
        assert!(single.sum_of_expectations.max_dist(&id.scale(0.5)) < 1e-15);
        let growing: Vec<_> = (1..=10).map(|_| QuantumRandomVariable::constant(s.clone(), id.clone())).collect();
        assert!(matches!(
            series_expectation(&growing, &nu1(), 1e-10),
            Err(Error::PartialSumsDiverge(_))
        ));
    }

    #[test]
    fn effect_series_examples() {
        let one_point = SampleSpace::indexed(1);
        let nu = Povm::new(one_point.clone(), vec![HermitianMatrix::identity(2)]).unwrap();
        let psi = QuantumRandomVariable::constant(one_point.clone(), HermitianMatrix::diag(&[0.5, 1.0 / 3.0]));
        let r = effect_series_identity(&psi, &nu, None, 1e-10).unwrap();
        assert!(r.passed, "residual {}", r.residual);
        let half = QuantumRandomVariable::constant(one_point.clone(), HermitianMatrix::identity(2).scale(0.5));
        assert!(effect_series_identity(&half, &nu, None, 1e-10).unwrap().passed);
        let singular = QuantumRandomVariable::constant(one_point, HermitianMatrix::diag(&[0.5, 0.0]));
        assert!(matches!(
            effect_series_identity(&singular, &nu, None, 1e-10),
            Err(Error::NotStrictlyPositiveEffect { .. })
        ));
    }

    #[test]
    fn n_max_is_smallest() {
        let n = effect_series_n_max(0.05, 1e-8);
        let q: f64 = 1.0 / (1.0 + 0.0025);
        assert!(q.powi(n as i32) < 1e-8 * 0.0025);
        assert!(q.powi(n as i32 - 1) >= 1e-8 * 0.0025);
    }
}
