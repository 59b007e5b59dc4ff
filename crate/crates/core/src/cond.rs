//! Quantum conditional expectation on partition sigma-algebras.
//!
//! `phi = E[psi | F]` is the `F`-measurable variable with
//! `E[phi chi_B] = E[psi chi_B]` for every block `B`. On a block this reads
//! `T_B(Y) = S_B` with
//!
//! ```text
//! T_B(Y) = sum_{x in B} nu_x^{1/2} Y nu_x^{1/2},   S_B = T_B applied pointwise to psi.
//! ```
//!
//! `T_B` maps Hermitian matrices to Hermitian matrices, so the equation is
//! solved as a real `d^2 x d^2` least-squares problem in orthonormal
//! Hermitian coordinates. Rank-deficient effects make `T_B` singular; the
//! minimum-norm solution is taken.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expect::expectation;
use crate::linalg::{self, CMatrix, HermitianMatrix, RANK_TOL};
use crate::povm::Povm;
use crate::space::{Partition, SampleSpace};
use crate::variable::{ProbeStateSet, QuantumRandomVariable};

/// Default per-block residual threshold.
pub const SOLVER_TOL: f64 = 1e-9;
/// Block solutions with an eigenvalue below this are replaced by zero.
pub const CLAMP_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug)]
pub struct CondOptions {
    /// Reject `psi` with `E[psi] = 0`.
    pub strict: bool,
    /// Replace non-positive block solutions of positive `psi` by zero.
    pub clamp: bool,
    pub solver_tol: f64,
}

impl Default for CondOptions {
    fn default() -> Self {
        CondOptions {
            strict: true,
            clamp: true,
            solver_tol: SOLVER_TOL,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionalSolve {
    #[serde(skip)]
    pub space: SampleSpace,
    #[serde(skip)]
    pub sigma: Partition,
    pub block_values: Vec<HermitianMatrix>,
    /// `|E[phi chi_B] - E[psi chi_B]|_max` per block.
    pub residuals: Vec<f64>,
    /// Blocks whose solution was not positive and was set to zero.
    pub clamped_blocks: Vec<usize>,
    /// `psi` was not positive, so existence of a positive version is not guaranteed.
    pub beyond_hypothesis: bool,
}

impl ConditionalSolve {
    /// The solution as a function on the sample space.
    pub fn to_qrv(&self) -> QuantumRandomVariable {
        let values = (0..self.space.len())
            .map(|x| self.block_values[self.sigma.block_of(x)].clone())
            .collect();
        QuantumRandomVariable::new(self.space.clone(), values).expect("block values share a dim")
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Every unclamped block meets `tol`.
    pub fn satisfies(&self, tol: f64) -> bool {
        self.residuals
            .iter()
            .enumerate()
            .all(|(k, &r)| r < tol || self.clamped_blocks.contains(&k))
    }
}

/// The real matrix of `Y -> sum_k K_k Y K_k` on Hermitian coordinates.
fn block_operator(roots: &[&HermitianMatrix], d: usize) -> DMatrix<f64> {
    let n = d * d;
    let mut t = DMatrix::zeros(n, n);
    let mut unit = vec![0.0; n];
    for col in 0..n {
        unit[col] = 1.0;
        let basis = linalg::from_hermitian_coords(d, &unit);
        unit[col] = 0.0;
        let mut image = CMatrix::zeros(d, d);
        for k in roots {
            image += k.as_matrix() * &basis * k.as_matrix();
        }
        for (row, v) in linalg::hermitian_coords(&image).into_iter().enumerate() {
            t[(row, col)] = v;
        }
    }
    t
}

fn apply_block(roots: &[&HermitianMatrix], y: &HermitianMatrix) -> HermitianMatrix {
    let mut acc = HermitianMatrix::zeros(y.dim());
    for k in roots {
        acc += &y.congruence(k);
    }
    acc
}

/// Minimum-norm least-squares solution of `T_B(Y) = S_B`.
///
/// The coordinates are orthonormal for the trace inner product, so `T_B` is
/// a symmetric PSD matrix and its eigendecomposition gives the
/// pseudo-inverse. (nalgebra's SVD loses accuracy on these highly
/// rank-deficient operators.)
fn solve_block(roots: &[&HermitianMatrix], target: &HermitianMatrix) -> HermitianMatrix {
    let d = target.dim();
    let t = block_operator(roots, d);
    let t = (&t + t.transpose()) * 0.5;
    let rhs = DVector::from_vec(linalg::hermitian_coords(target.as_matrix()));
    let eig = t.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut y = DVector::zeros(rhs.len());
    if lmax > 0.0 {
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l > RANK_TOL * lmax {
                let v = eig.eigenvectors.column(k);
                y += v * (v.dot(&rhs) / l);
            }
        }
    }
    HermitianMatrix::from_raw(linalg::from_hermitian_coords(d, y.as_slice()))
}

/// `E_nu[psi | sigma]`.
pub fn conditional_expectation(
    psi: &QuantumRandomVariable,
    nu: &Povm,
    sigma: &Partition,
    opts: CondOptions,
) -> Result<ConditionalSolve> {
    let e_psi = expectation(psi, nu)?;
    if sigma.n_points() != psi.len() {
        return Err(Error::SpaceMismatch(format!(
            "partition of {} points for a space of {}",
            sigma.n_points(),
            psi.len()
        )));
    }
    if opts.strict && e_psi.max_abs() < opts.solver_tol {
        return Err(Error::ZeroExpectation);
    }
    let roots = nu
        .effects()
        .iter()
        .map(linalg::sqrt_psd)
        .collect::<Result<Vec<_>>>()?;
    let positive = psi.is_positive();
    let d = psi.dim();
    let mut block_values = Vec::with_capacity(sigma.blocks().len());
    let mut residuals = Vec::with_capacity(sigma.blocks().len());
    let mut clamped = Vec::new();
    for (k, block) in sigma.blocks().iter().enumerate() {
        let live: Vec<usize> = block.iter().copied().filter(|&x| nu.is_positive_atom(x)).collect();
        if live.is_empty() {
            block_values.push(HermitianMatrix::zeros(d));
            residuals.push(0.0);
            continue;
        }
        let ks: Vec<&HermitianMatrix> = live.iter().map(|&x| &roots[x]).collect();
        let mut target = HermitianMatrix::zeros(d);
        for &x in &live {
            target += &psi.value(x).congruence(&roots[x]);
        }
        let mut y = solve_block(&ks, &target);
        if opts.clamp && positive && y.min_eigenvalue() < -CLAMP_TOL {
            y = HermitianMatrix::zeros(d);
            clamped.push(k);
        }
        residuals.push(apply_block(&ks, &y).max_dist(&target));
        block_values.push(y);
    }
    Ok(ConditionalSolve {
        space: psi.space().clone(),
        sigma: sigma.clone(),
        block_values,
        residuals,
        clamped_blocks: clamped,
        beyond_hypothesis: !positive,
    })
}

/// Comparison of the quantum conditional expectation with the classical
/// conditional expectations of the scalar slices `psi_rho`.
#[derive(Clone, Debug, Serialize)]
pub struct RhoSliceReport {
    /// `max_{rho, B} |E_mu[phi_rho | F] - E_mu[psi_rho | F]|` on each block.
    pub block_deviation: f64,
    /// `max_{rho, x} |phi_rho(x) - E_mu[psi_rho | F](x)|`; nonzero whenever the
    /// principal derivative varies inside a block.
    pub pointwise_deviation: f64,
    pub clamped: bool,
}

/// Slices are `x -> tr(rho (v boxtimes w)(x))`.
pub fn rho_slice_check(
    psi: &QuantumRandomVariable,
    nu: &Povm,
    sigma: &Partition,
    probes: &ProbeStateSet,
    opts: CondOptions,
) -> Result<RhoSliceReport> {
    let solve = conditional_expectation(psi, nu, sigma, opts)?;
    let phi = solve.to_qrv();
    let mu = nu.induced_measure();
    let psi_box = crate::expect::boxtimes(psi, nu)?;
    let phi_box = crate::expect::boxtimes(&phi, nu)?;
    let psi_slices: Vec<Vec<f64>> = psi_box.values().iter().map(|v| probes.traces(v)).collect();
    let phi_slices: Vec<Vec<f64>> = phi_box.values().iter().map(|v| probes.traces(v)).collect();
    let mut block_dev = 0.0f64;
    let mut point_dev = 0.0f64;
    for block in sigma.blocks() {
        let mass = mu.event(block);
        if mass <= 0.0 {
            continue;
        }
        for r in 0..probes.len() {
            let avg = |s: &[Vec<f64>]| block.iter().map(|&x| mu.weight(x) * s[x][r]).sum::<f64>() / mass;
            let classical = avg(&psi_slices);
            block_dev = block_dev.max((avg(&phi_slices) - classical).abs());
            for &x in block.iter().filter(|&&x| nu.is_positive_atom(x)) {
                point_dev = point_dev.max((phi_slices[x][r] - classical).abs());
            }
        }
    }
    Ok(RhoSliceReport {
        block_deviation: block_dev,
        pointwise_deviation: point_dev,
        clamped: !solve.clamped_blocks.is_empty(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TowerReport {
    /// `|E[E[psi|F]|G] - E[psi|F]|_max`.
    pub inner_deviation: f64,
    /// `|E[E[psi|G]|F] - E[psi|F]|_max`.
    pub outer_deviation: f64,
    /// `|E[E[psi|F]|G] - E[E[psi|G]|F]|_max`.
    pub cross_deviation: f64,
    pub clamped: bool,
    pub passed: bool,
}

/// The tower property for `f` coarser than `g`.
pub fn tower_check(
    psi: &QuantumRandomVariable,
    nu: &Povm,
    f: &Partition,
    g: &Partition,
    tol: f64,
    opts: CondOptions,
) -> Result<TowerReport> {
    if !g.refines(f) {
        return Err(Error::NotNested("the first partition is not coarser than the second".into()));
    }
    let sf = conditional_expectation(psi, nu, f, opts)?;
    let sg = conditional_expectation(psi, nu, g, opts)?;
    let phi_f = sf.to_qrv();
    let phi_g = sg.to_qrv();
    let inner_opts = CondOptions { strict: false, ..opts };
    let s_fg = conditional_expectation(&phi_f, nu, g, inner_opts)?;
    let s_gf = conditional_expectation(&phi_g, nu, f, inner_opts)?;
    let fg = s_fg.to_qrv();
    let gf = s_gf.to_qrv();
    let inner = fg.max_dist(&phi_f);
    let outer = gf.max_dist(&phi_f);
    let cross = fg.max_dist(&gf);
    let clamped = [&sf, &sg, &s_fg, &s_gf].iter().any(|s| !s.clamped_blocks.is_empty());
    Ok(TowerReport {
        inner_deviation: inner,
        outer_deviation: outer,
        cross_deviation: cross,
        clamped,
        passed: inner < tol && outer < tol && cross < tol,
    })
}
