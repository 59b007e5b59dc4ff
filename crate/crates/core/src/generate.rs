//! Seeded random fixtures.
//!
//! One ChaCha stream per fixture kind, all derived from a single seed, so
//! changing how many POVM draws a run makes never shifts its filtrations.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::expect::expectation;
use crate::linalg::{self, CMatrix, HermitianMatrix, RANK_TOL};
use crate::povm::Povm;
use crate::space::{Filtration, Partition, SampleSpace};
use crate::variable::QuantumRandomVariable;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixtureKind {
    Povm,
    PositiveQrv,
    EffectQrv,
    RefiningFiltration,
    GeneralQrv,
}

impl FixtureKind {
    fn stream(self) -> u64 {
        match self {
            FixtureKind::Povm => 1,
            FixtureKind::PositiveQrv => 2,
            FixtureKind::EffectQrv => 3,
            FixtureKind::RefiningFiltration => 4,
            FixtureKind::GeneralQrv => 5,
        }
    }
}

pub fn rng_for(seed: u64, kind: FixtureKind) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(kind.stream());
    rng
}

/// Entries with independent standard normal real and imaginary parts.
pub fn ginibre<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_hermitian<R: Rng>(rng: &mut R, d: usize) -> HermitianMatrix {
    let g = ginibre(rng, d, d);
    HermitianMatrix::from_raw((&g + g.adjoint()).map(|z| z * 0.5))
}

/// `A* A / d` for an `r x d` Ginibre `A`: PSD of rank `min(r, d)`.
pub fn random_gram<R: Rng>(rng: &mut R, d: usize, r: usize) -> HermitianMatrix {
    let a = ginibre(rng, r, d);
    HermitianMatrix::from_raw(a.adjoint() * a / Complex64::new(d as f64, 0.0))
}

/// Haar-like unitary from the QR factorization of a Ginibre matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, d: usize) -> CMatrix {
    let qr = ginibre(rng, d, d).qr();
    let (q, r) = (qr.q(), qr.r());
    // fix column phases so the distribution does not depend on the QR convention
    let mut q = q;
    for j in 0..d {
        let z = r[(j, j)];
        let phase = if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `sum_x effect_x = 1` with `effect_x = S^{-1/2} G_x S^{-1/2}`, `G_x = A_x* A_x`.
///
/// `rank` bounds the rank of each effect (`None` for full rank); it must
/// satisfy `n * rank >= d` so that `S` is invertible.
pub fn random_povm<R: Rng>(rng: &mut R, space: SampleSpace, d: usize, rank: Option<usize>) -> Result<Povm> {
    let r = rank.unwrap_or(d).min(d);
    assert!(space.len() * r >= d, "effects of rank {r} on {} atoms cannot sum to 1", space.len());
    let grams: Vec<HermitianMatrix> = (0..space.len()).map(|_| random_gram(rng, d, r)).collect();
    let mut s = HermitianMatrix::zeros(d);
    for g in &grams {
        s += g;
    }
    let s_inv_half = linalg::pinv_sqrt_psd(&s)?;
    let effects = grams
        .iter()
        .map(|g| {
            let e = g.congruence(&s_inv_half);
            if r == d {
                return e;
            }
            // an ill-conditioned `s` leaves ~1e-13 on the kernel; restore the rank
            let spec = e.spectrum();
            let cut = RANK_TOL * spec.max_abs();
            HermitianMatrix::from_raw(spec.apply(|l| if l > cut { l } else { 0.0 }))
        })
        .collect();
    Povm::new(space, effects)
}

/// Positive values `B* B / d + shift * 1`.
pub fn random_positive_qrv<R: Rng>(rng: &mut R, space: SampleSpace, d: usize, shift: f64) -> Result<QuantumRandomVariable> {
    let id = HermitianMatrix::identity(d);
    QuantumRandomVariable::from_fn(space, |_| &random_gram(rng, d, d) + &id.scale(shift))
}

/// Effect values `U diag(lambda) U*` with `lambda` uniform in `[lambda_min, 1]`.
pub fn random_effect_qrv<R: Rng>(
    rng: &mut R,
    space: SampleSpace,
    d: usize,
    lambda_min: f64,
) -> Result<QuantumRandomVariable> {
    QuantumRandomVariable::from_fn(space, |_| {
        let u = random_unitary(rng, d);
        let lambdas: Vec<f64> = (0..d).map(|_| rng.random_range(lambda_min..=1.0)).collect();
        let diag = HermitianMatrix::diag(&lambdas);
        HermitianMatrix::from_raw(&u * diag.as_matrix() * u.adjoint())
    })
}

pub fn random_general_qrv<R: Rng>(rng: &mut R, space: SampleSpace, d: usize) -> Result<QuantumRandomVariable> {
    QuantumRandomVariable::from_fn(space, |_| random_hermitian(rng, d))
}

/// `1 - P_ran(w)`.
pub fn kernel_projector(w: &HermitianMatrix) -> HermitianMatrix {
    &HermitianMatrix::identity(w.dim()) - &linalg::range_projector(w, RANK_TOL)
}

/// Values `Q L Q` with `Q` the kernel projector of the principal derivative:
/// `ran psi(x)` lies in `ker w(x)`. `L` positive when `positive`.
pub fn kernel_supported_qrv<R: Rng>(rng: &mut R, nu: &Povm, positive: bool) -> Result<QuantumRandomVariable> {
    let w = nu.principal_rn();
    let d = nu.dim();
    QuantumRandomVariable::from_fn(nu.space().clone(), |x| {
        let q = kernel_projector(w.value(x));
        let l = if positive { random_gram(rng, d, d) } else { random_hermitian(rng, d) };
        l.congruence(&q)
    })
}

/// `P R Q + Q R* P + Q L Q`: the sandwich by `w^{1/2}` vanishes, the product
/// with `w` does not (whenever `w` is singular but nonzero).
pub fn boxtimes_null_qrv<R: Rng>(rng: &mut R, nu: &Povm) -> Result<QuantumRandomVariable> {
    let w = nu.principal_rn();
    let d = nu.dim();
    QuantumRandomVariable::from_fn(nu.space().clone(), |x| {
        let p = linalg::range_projector(w.value(x), RANK_TOL);
        let q = kernel_projector(w.value(x));
        let r = ginibre(rng, d, d);
        let off = p.as_matrix() * r * q.as_matrix();
        let l = random_hermitian(rng, d).congruence(&q);
        HermitianMatrix::from_raw(&off + off.adjoint() + l.as_matrix())
    })
}

/// A random Hermitian variable shifted at one atom so that `E[psi] = 0`.
///
/// The shifted atom must carry an invertible effect; returns `None` when
/// there is none.
pub fn mean_zero_qrv<R: Rng>(rng: &mut R, nu: &Povm) -> Result<Option<QuantumRandomVariable>> {
    let Some(x0) = (0..nu.len()).find(|&x| linalg::is_invertible_psd(nu.effect(x))) else {
        return Ok(None);
    };
    let psi = random_general_qrv(rng, nu.space().clone(), nu.dim())?;
    let e = expectation(&psi, nu)?;
    let k = linalg::pinv_sqrt_psd(nu.effect(x0))?;
    let shift = e.congruence(&k);
    Ok(Some(psi.map(|x, v| if x == x0 { v - &shift } else { v.clone() })))
}

/// Trivial first stage, random binary splits, singletons last.
///
/// `depth` counts stages; the last is always the discrete partition.
pub fn random_filtration<R: Rng>(rng: &mut R, n: usize, depth: usize) -> Filtration {
    let depth = depth.max(1);
    let mut stages = Vec::with_capacity(depth);
    let mut current = Partition::trivial(n);
    for j in 0..depth.saturating_sub(1) {
        if j > 0 {
            current = split_blocks(rng, &current);
        }
        stages.push(current.clone());
    }
    stages.push(Partition::discrete(n));
    Filtration::new(stages).expect("splits refine")
}

fn split_blocks<R: Rng>(rng: &mut R, p: &Partition) -> Partition {
    let mut blocks = Vec::new();
    for b in p.blocks() {
        if b.len() < 2 || rng.random_bool(0.25) {
            blocks.push(b.clone());
            continue;
        }
        let mut shuffled = b.clone();
        for i in (1..shuffled.len()).rev() {
            let j = rng.random_range(0..=i);
            shuffled.swap(i, j);
        }
        let cut = rng.random_range(1..shuffled.len());
        blocks.push(shuffled[..cut].to_vec());
        blocks.push(shuffled[cut..].to_vec());
    }
    Partition::from_blocks(p.n_points(), blocks).expect("split of a partition")
}
