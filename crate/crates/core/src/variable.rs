//! Quantum random variables and probe state sets.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::QrvRecord;
use crate::linalg::{self, DensityOperator, HermitianMatrix, PSD_TOL};
use crate::space::SampleSpace;

/// A Hermitian-matrix valued function on a finite sample space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QrvRecord", into = "QrvRecord")]
pub struct QuantumRandomVariable {
    space: SampleSpace,
    dim: usize,
    values: Vec<HermitianMatrix>,
    is_positive: bool,
    is_effect: bool,
}

impl QuantumRandomVariable {
    pub fn new(space: SampleSpace, values: Vec<HermitianMatrix>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::SpaceMismatch(format!(
                "{} values for {} points",
                values.len(),
                space.len()
            )));
        }
        let dim = values[0].dim();
        let mut is_positive = true;
        let mut is_effect = true;
        for v in &values {
            if v.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: v.dim(),
                });
            }
            let spec = v.spectrum();
            if spec.min() < -PSD_TOL * spec.max_abs().max(1.0) {
                is_positive = false;
            }
            if spec.max() > 1.0 + PSD_TOL {
                is_effect = false;
            }
        }
        Ok(QuantumRandomVariable {
            space,
            dim,
            is_effect: is_effect && is_positive,
            is_positive,
            values,
        })
    }

    pub fn constant(space: SampleSpace, value: HermitianMatrix) -> Self {
        let values = vec![value; space.len()];
        Self::new(space, values).expect("constant values share a dim")
    }

    pub fn from_fn(space: SampleSpace, f: impl FnMut(usize) -> HermitianMatrix) -> Result<Self> {
        let values = (0..space.len()).map(f).collect();
        Self::new(space, values)
    }

    pub fn space(&self) -> &SampleSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, i: usize) -> &HermitianMatrix {
        &self.values[i]
    }

    pub fn values(&self) -> &[HermitianMatrix] {
        &self.values
    }

    pub fn is_positive(&self) -> bool {
        self.is_positive
    }

    pub fn is_effect(&self) -> bool {
        self.is_effect
    }

    pub fn map(&self, mut f: impl FnMut(usize, &HermitianMatrix) -> HermitianMatrix) -> Self {
        let values = self.values.iter().enumerate().map(|(i, v)| f(i, v)).collect();
        Self::new(self.space.clone(), values).expect("map preserves shape")
    }

    pub(crate) fn require_compatible(&self, other: &QuantumRandomVariable) -> Result<()> {
        self.space.require_same(&other.space)?;
        if self.dim != other.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &QuantumRandomVariable) -> Result<Self> {
        self.require_compatible(other)?;
        Ok(self.map(|i, v| v + other.value(i)))
    }

    pub fn sub(&self, other: &QuantumRandomVariable) -> Result<Self> {
        self.require_compatible(other)?;
        Ok(self.map(|i, v| v - other.value(i)))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|_, v| v.scale(s))
    }

    /// `psi * chi_E`: values outside `points` set to zero.
    pub fn indicator(&self, points: &[usize]) -> Self {
        let mut keep = vec![false; self.len()];
        for &i in points {
            keep[i] = true;
        }
        self.map(|i, v| if keep[i] { v.clone() } else { HermitianMatrix::zeros(self.dim) })
    }

    /// Largest max-entry distance over all points.
    pub fn max_dist(&self, other: &QuantumRandomVariable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.max_dist(b))
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(HermitianMatrix::max_abs).fold(0.0, f64::max)
    }
}

/// Relative eigenvalue cut on the Gram matrix of probe coordinates (a
/// singular-value ratio of 1e-6).
const PROBE_RANK_TOL: f64 = 1e-12;

/// A finite set of states whose real span is all Hermitian matrices.
///
/// In finite dimensions, convergence of `tr(rho a_n)` for every probe `rho`
/// is equivalent to entrywise convergence of `a_n`.
#[derive(Clone, Debug)]
pub struct ProbeStateSet {
    states: Vec<DensityOperator>,
}

impl ProbeStateSet {
    pub fn new(states: Vec<DensityOperator>) -> Result<Self> {
        let Some(first) = states.first() else {
            return Err(Error::InvalidProbes("no states".into()));
        };
        let d = first.dim();
        if states.iter().any(|s| s.dim() != d) {
            return Err(Error::InvalidProbes("states have different dimensions".into()));
        }
        let n = d * d;
        if states.len() < n {
            return Err(Error::InvalidProbes(format!(
                "{} states cannot span the {n}-dimensional Hermitian space",
                states.len()
            )));
        }
        let coords = DMatrix::from_fn(n, states.len(), |r, c| {
            linalg::hermitian_coords(states[c].matrix().as_matrix())[r]
        });
        // rank from the Gram matrix; nalgebra's SVD is unreliable on
        // rank-deficient input
        let gram = &coords * coords.transpose();
        let eig = gram.symmetric_eigenvalues();
        let lmax = eig.max();
        let rank = eig.iter().filter(|&&l| l > PROBE_RANK_TOL * lmax).count();
        if rank < n {
            return Err(Error::InvalidProbes(format!(
                "states span only {rank} of {n} Hermitian dimensions"
            )));
        }
        Ok(ProbeStateSet { states })
    }

    /// The `d^2` states `e_i e_i*`, and for `i < j` the projections onto
    /// `(e_i + e_j)/sqrt2` and `(e_i + i e_j)/sqrt2`.
    pub fn standard(d: usize) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let mut states = Vec::with_capacity(d * d);
        let unit = |i: usize| {
            let mut v = vec![Complex64::new(0.0, 0.0); d];
            v[i] = one;
            v
        };
        for i in 0..d {
            states.push(DensityOperator::pure(&unit(i)).expect("unit vector"));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let mut v = unit(i);
                v[j] = one;
                states.push(DensityOperator::pure(&v).expect("nonzero"));
                v[j] = Complex64::new(0.0, 1.0);
                states.push(DensityOperator::pure(&v).expect("nonzero"));
            }
        }
        ProbeStateSet { states }
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// `tr(rho_k m)` for every probe (real part; `m` is Hermitian).
    pub fn traces(&self, m: &HermitianMatrix) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| linalg::trace_product(s.matrix().as_matrix(), m.as_matrix()).re)
            .collect()
    }
}
