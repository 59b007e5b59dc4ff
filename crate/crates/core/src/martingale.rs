//! Quantum martingales obtained by conditioning, and their limits.
//!
//! Limits are identified only up to `Phi` with `Phi boxtimes w = 0`
//! ("Gamma-equivalence"): where the principal derivative is singular the
//! martingale cannot see the kernel, so the limit need not equal `psi`
//! entrywise.

use serde::Serialize;

use crate::cond::{conditional_expectation, CondOptions, ConditionalSolve};
use crate::error::{Error, Result};
use crate::expect::{boxtimes, expectation, uw_as_limit, CAUCHY_WINDOW};
use crate::linalg::HermitianMatrix;
use crate::povm::Povm;
use crate::space::{Filtration, Partition};
use crate::variable::{ProbeStateSet, QuantumRandomVariable};

/// Default Gamma tolerance, scaled by `max(1, |psi|_max)` in [`qmct_run`].
pub const GAMMA_TOL: f64 = 1e-9;

/// `phi_j = E[psi | F_j]` for every stage.
pub fn build_martingale(
    psi: &QuantumRandomVariable,
    nu: &Povm,
    filtration: &Filtration,
    opts: CondOptions,
) -> Result<Vec<ConditionalSolve>> {
    filtration
        .stages()
        .iter()
        .map(|f| conditional_expectation(psi, nu, f, opts))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct MartingaleVerdict {
    /// (a): each `phi_j` is constant on the blocks of `F_j`.
    pub adapted: bool,
    /// First violation of (a): stage and two points of one block.
    pub adapted_witness: Option<(usize, String, String)>,
    /// (b): always true on a finite space.
    pub integrable: bool,
    /// (c): `|E[phi_{j+1} | F_j] - phi_j|_max` for each consecutive pair.
    pub step_residuals: Vec<f64>,
    pub passed: bool,
}

pub fn is_martingale(
    seq: &[QuantumRandomVariable],
    nu: &Povm,
    filtration: &Filtration,
    tol: f64,
) -> Result<MartingaleVerdict> {
    if seq.len() != filtration.len() {
        return Err(Error::InvalidFiltration(format!(
            "{} variables for {} stages",
            seq.len(),
            filtration.len()
        )));
    }
    let mut witness = None;
    for (j, (phi, f)) in seq.iter().zip(filtration.stages()).enumerate() {
        if f.n_points() != phi.len() {
            return Err(Error::SpaceMismatch(format!("stage {j} has a different point count")));
        }
        if let Some((a, b)) = f.measurability_witness(phi.values(), HermitianMatrix::max_dist, tol) {
            let label = |i| phi.space().label(i).to_string();
            witness = Some((j, label(a), label(b)));
            break;
        }
    }
    let opts = CondOptions {
        strict: false,
        ..CondOptions::default()
    };
    let mut residuals = Vec::with_capacity(seq.len().saturating_sub(1));
    for j in 0..seq.len().saturating_sub(1) {
        let back = conditional_expectation(&seq[j + 1], nu, &filtration.stages()[j], opts)?;
        residuals.push(back.to_qrv().max_dist(&seq[j]));
    }
    let adapted = witness.is_none();
    let passed = adapted && residuals.iter().all(|&r| r < tol);
    Ok(MartingaleVerdict {
        adapted,
        adapted_witness: witness,
        integrable: true,
        step_residuals: residuals,
        passed,
    })
}

/// `max over positive atoms of |((a - b) boxtimes w)(x)|_max`.
pub fn gamma_distance(a: &QuantumRandomVariable, b: &QuantumRandomVariable, nu: &Povm) -> Result<f64> {
    let diff = a.sub(b)?;
    let bx = boxtimes(&diff, nu)?;
    Ok((0..bx.len())
        .filter(|&x| nu.is_positive_atom(x))
        .map(|x| bx.value(x).max_abs())
        .fold(0.0, f64::max))
}

/// `(a - b) boxtimes dnu/dmu = 0` on positive atoms.
pub fn gamma_equiv(a: &QuantumRandomVariable, b: &QuantumRandomVariable, nu: &Povm, tol: f64) -> Result<bool> {
    Ok(gamma_distance(a, b, nu)? < tol)
}

/// `|E[candidate - E[psi | sigma_inf]]|_max`.
pub fn sigma_distance(
    candidate: &QuantumRandomVariable,
    psi: &QuantumRandomVariable,
    nu: &Povm,
    sigma_inf: &Partition,
) -> Result<f64> {
    let opts = CondOptions {
        strict: false,
        ..CondOptions::default()
    };
    let base = conditional_expectation(psi, nu, sigma_inf, opts)?.to_qrv();
    Ok(expectation(&candidate.sub(&base)?, nu)?.max_abs())
}

/// `E[candidate - E[psi | sigma_inf]] = 0`.
pub fn sigma_member(
    candidate: &QuantumRandomVariable,
    psi: &QuantumRandomVariable,
    nu: &Povm,
    sigma_inf: &Partition,
    tol: f64,
) -> Result<bool> {
    Ok(sigma_distance(candidate, psi, nu, sigma_inf)? < tol)
}

/// Everything observed in one martingale convergence experiment.
#[derive(Clone, Debug, Serialize)]
pub struct MartingaleRun {
    pub stages: Vec<QuantumRandomVariable>,
    pub limit: QuantumRandomVariable,
    /// `E[psi | F_inf]`.
    pub conditional_limit: QuantumRandomVariable,
    /// Blocks of `F_inf` as point indices.
    pub limit_blocks: Vec<Vec<usize>>,
    /// `probe_traces[probe][atom][stage] = tr(rho phi_j(x))`.
    pub probe_traces: Vec<Vec<Vec<f64>>>,
    /// `max_{rho, x} |tr(rho phi_j(x)) - tr(rho phi_inf(x))|` per stage.
    pub residual_history: Vec<f64>,
    pub martingale: MartingaleVerdict,
    pub clamped_stages: Vec<usize>,
    /// (ii): the limit is `F_inf`-measurable.
    pub limit_measurable: bool,
    /// (iii): limit Gamma-equivalent to `E[psi | F_inf]`.
    pub gamma_verdict: bool,
    pub gamma_distance: f64,
    /// Limit Gamma-equivalent to `psi`; only evaluated when `F_inf` is
    /// discrete or `psi` is `F_inf`-measurable.
    pub psi_gamma_verdict: Option<bool>,
    /// Limit lies in the larger class with mean-zero difference.
    pub sigma_verdict: bool,
    /// `|phi_inf - psi|_max`; positive values exhibit non-identifiability.
    pub entrywise_gap: f64,
    pub tol: f64,
}

impl MartingaleRun {
    pub fn passed(&self) -> bool {
        self.martingale.passed
            && self.limit_measurable
            && self.gamma_verdict
            && self.sigma_verdict
            && self.psi_gamma_verdict.unwrap_or(true)
    }
}

pub fn qmct_run(
    psi: &QuantumRandomVariable,
    nu: &Povm,
    filtration: &Filtration,
    probes: &ProbeStateSet,
    tol: f64,
) -> Result<MartingaleRun> {
    let opts = CondOptions::default();
    let solves = build_martingale(psi, nu, filtration, opts)?;
    let clamped_stages = solves
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.clamped_blocks.is_empty())
        .map(|(j, _)| j)
        .collect();
    let stages: Vec<QuantumRandomVariable> = solves.iter().map(ConditionalSolve::to_qrv).collect();
    let scaled = tol * psi.max_abs().max(1.0);
    let martingale = is_martingale(&stages, nu, filtration, scaled)?;

    // a finite filtration is constant after its last stage
    let mut padded = stages.clone();
    padded.extend(std::iter::repeat_n(stages[stages.len() - 1].clone(), CAUCHY_WINDOW));
    let limit = uw_as_limit(&padded, probes, scaled)?;

    let f_inf = filtration.limit();
    let limit_measurable = f_inf
        .measurability_witness(limit.values(), HermitianMatrix::max_dist, scaled)
        .is_none();
    let conditional_limit = conditional_expectation(psi, nu, &f_inf, opts)?.to_qrv();
    let gdist = gamma_distance(&limit, &conditional_limit, nu)?;
    let psi_measurable = f_inf
        .measurability_witness(psi.values(), HermitianMatrix::max_dist, scaled)
        .is_none();
    let psi_gamma_verdict = if f_inf.is_discrete() || psi_measurable {
        Some(gamma_equiv(&limit, psi, nu, scaled)?)
    } else {
        None
    };
    let sigma_verdict = sigma_member(&limit, psi, nu, &f_inf, scaled)?;

    let limit_traces: Vec<Vec<f64>> = limit.values().iter().map(|v| probes.traces(v)).collect();
    let mut probe_traces = vec![vec![Vec::with_capacity(stages.len()); psi.len()]; probes.len()];
    let mut residual_history = Vec::with_capacity(stages.len());
    for phi in &stages {
        let mut worst = 0.0f64;
        for x in 0..psi.len() {
            for (r, t) in probes.traces(phi.value(x)).into_iter().enumerate() {
                worst = worst.max((t - limit_traces[x][r]).abs());
                probe_traces[r][x].push(t);
            }
        }
        residual_history.push(worst);
    }

    Ok(MartingaleRun {
        entrywise_gap: limit.max_dist(psi),
        stages,
        limit,
        conditional_limit,
        limit_blocks: f_inf.blocks().to_vec(),
        probe_traces,
        residual_history,
        martingale,
        clamped_stages,
        limit_measurable,
        gamma_verdict: gdist < scaled,
        gamma_distance: gdist,
        psi_gamma_verdict,
        sigma_verdict,
        tol: scaled,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityReport {
    /// `max_{rho, x} |tr(rho E[psi_n|F](x)) - tr(rho E[psi|F](x))|` per term.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

/// Conditional expectations along `seq` against that of its limit `psi`.
pub fn cond_continuity_check(
    seq: &[QuantumRandomVariable],
    psi: &QuantumRandomVariable,
    nu: &Povm,
    sigma: &Partition,
    probes: &ProbeStateSet,
    tol: f64,
) -> Result<ContinuityReport> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let opts = CondOptions::default();
    let target = conditional_expectation(psi, nu, sigma, opts)?.to_qrv();
    let target_traces: Vec<Vec<f64>> = target.values().iter().map(|v| probes.traces(v)).collect();
    let mut residuals = Vec::with_capacity(seq.len());
    for q in seq {
        let phi = conditional_expectation(q, nu, sigma, opts)?.to_qrv();
        let mut worst = 0.0f64;
        for (v, target) in phi.values().iter().zip(&target_traces) {
            for (t, want) in probes.traces(v).into_iter().zip(target) {
                worst = worst.max((t - want).abs());
            }
        }
        residuals.push(worst);
    }
    let converged = residuals.last().is_some_and(|&r| r < tol);
    Ok(ContinuityReport { residuals, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::SampleSpace;

    fn nu() -> Povm {
        Povm::new(
            SampleSpace::indexed(4),
            vec![
                HermitianMatrix::diag(&[0.4, 0.1]),
                HermitianMatrix::diag(&[0.1, 0.4]),
                HermitianMatrix::from_real(2, &[0.25, 0.1, 0.1, 0.25]).unwrap(),
                HermitianMatrix::from_real(2, &[0.25, -0.1, -0.1, 0.25]).unwrap(),
            ],
        )
        .unwrap()
    }

    fn psi() -> QuantumRandomVariable {
        QuantumRandomVariable::new(
            SampleSpace::indexed(4),
            vec![
                HermitianMatrix::diag(&[1.0, 2.0]),
                HermitianMatrix::from_real(2, &[2.0, 1.0, 1.0, 2.0]).unwrap(),
                HermitianMatrix::diag(&[3.0, 0.5]),
                HermitianMatrix::identity(2),
            ],
        )
        .unwrap()
    }

    fn filtration() -> Filtration {
        Filtration::new(vec![
            Partition::trivial(4),
            Partition::from_blocks(4, vec![vec![0, 1], vec![2, 3]]).unwrap(),
            Partition::discrete(4),
        ])
        .unwrap()
    }

    #[test]
    fn conditioning_builds_a_martingale() {
        let stages: Vec<_> = build_martingale(&psi(), &nu(), &filtration(), CondOptions::default())
            .unwrap()
            .iter()
            .map(ConditionalSolve::to_qrv)
            .collect();
        assert!(stages[2].max_dist(&psi()) < 1e-12);
        let v = is_martingale(&stages, &nu(), &filtration(), 1e-9).unwrap();
        assert!(v.passed, "{v:?}");
    }

    #[test]
    fn non_adapted_sequence_fails_with_witness() {
        let bad = vec![psi(), psi(), psi()];
        let v = is_martingale(&bad, &nu(), &filtration(), 1e-9).unwrap();
        assert!(!v.adapted);
        assert_eq!(v.adapted_witness.as_ref().unwrap().0, 0);
    }

    #[test]
    fn run_to_singletons() {
        let run = qmct_run(&psi(), &nu(), &filtration(), &ProbeStateSet::standard(2), GAMMA_TOL).unwrap();
        assert!(run.passed(), "{run:?}");
        assert_eq!(run.psi_gamma_verdict, Some(true));
    }

    #[test]
    fn constant_trivial_filtration() {
        let f = Filtration::new(vec![Partition::trivial(4); 3]).unwrap();
        let run = qmct_run(&psi(), &nu(), &f, &ProbeStateSet::standard(2), GAMMA_TOL).unwrap();
        assert!(run.gamma_verdict && run.psi_gamma_verdict.is_none());
        assert!(run.residual_history.iter().all(|&r| r < 1e-12));
    }

    #[test]
    fn gamma_examples() {
        let a = psi();
        assert!(gamma_equiv(&a, &a, &nu(), 1e-9).unwrap());
        let id = QuantumRandomVariable::constant(a.space().clone(), HermitianMatrix::identity(2));
        assert!(!gamma_equiv(&a, &a.add(&id).unwrap(), &nu(), 1e-9).unwrap());
        // w singular: diag(1,0) and diag(0,1) effects; kernel perturbation is invisible
        let sing = Povm::new(
            SampleSpace::indexed(2),
            vec![HermitianMatrix::diag(&[1.0, 0.0]), HermitianMatrix::diag(&[0.0, 1.0])],
        )
        .unwrap();
        let base = QuantumRandomVariable::constant(SampleSpace::indexed(2), HermitianMatrix::identity(2));
        let phi = QuantumRandomVariable::new(
            SampleSpace::indexed(2),
            vec![HermitianMatrix::diag(&[0.0, 5.0]), HermitianMatrix::diag(&[7.0, 0.0])],
        )
        .unwrap();
        let moved = base.add(&phi).unwrap();
        assert!(gamma_equiv(&base, &moved, &sing, 1e-9).unwrap());
        assert!(moved.max_dist(&base) > 1.0);
    }

    #[test]
    fn sigma_examples() {
        let f = Partition::from_blocks(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let opts = CondOptions::default();
        let base = conditional_expectation(&psi(), &nu(), &f, opts).unwrap().to_qrv();
        assert!(sigma_member(&base, &psi(), &nu(), &f, 1e-9).unwrap());
        let id = QuantumRandomVariable::constant(base.space().clone(), HermitianMatrix::identity(2));
        assert!(!sigma_member(&base.add(&id).unwrap(), &psi(), &nu(), &f, 1e-9).unwrap());
    }

    #[test]
    fn continuity_rate() {
        let p = psi();
        let seq: Vec<_> = (1..=200).map(|n| p.scale(1.0 + 1.0 / n as f64)).collect();
        let f = Partition::from_blocks(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let rep = cond_continuity_check(&seq, &p, &nu(), &f, &ProbeStateSet::standard(2), 1e-1).unwrap();
        assert!(rep.converged);
        let r100 = rep.residuals[99];
        let r200 = rep.residuals[199];
        assert!((r100 / r200 - 2.0).abs() < 1e-6);
        let constant = vec![p.clone(); 3];
        let rep = cond_continuity_check(&constant, &p, &nu(), &f, &ProbeStateSet::standard(2), 1e-12).unwrap();
        assert!(rep.residuals.iter().all(|&r| r < 1e-12));
    }
}
