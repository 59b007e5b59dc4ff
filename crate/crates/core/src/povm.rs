//! Positive operator valued measures on finite sample spaces.
//!
//! A POVM is stored by its atoms; the value on an event is the sum of the
//! atom effects, so finite additivity holds by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::PovmRecord;
use crate::linalg::{self, HermitianMatrix, PSD_TOL};
use crate::space::SampleSpace;
use crate::variable::QuantumRandomVariable;

/// Tolerance on `|nu(X) - 1|_max` for a quantum probability measure.
pub const PROBABILITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PovmRecord", into = "PovmRecord")]
pub struct Povm {
    space: SampleSpace,
    dim: usize,
    effects: Vec<HermitianMatrix>,
    // atoms whose effect vanishes (largest eigenvalue <= PSD_TOL)
    null: Vec<bool>,
    deviation: f64,
}

impl Povm {
    /// Validates one effect per point of `space`, in order.
    pub fn new(space: SampleSpace, effects: Vec<HermitianMatrix>) -> Result<Self> {
        if effects.len() != space.len() {
            return Err(Error::SpaceMismatch(format!(
                "{} effects for {} points",
                effects.len(),
                space.len()
            )));
        }
        let dim = effects[0].dim();
        let mut null = Vec::with_capacity(effects.len());
        for (i, e) in effects.iter().enumerate() {
            if e.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: e.dim(),
                });
            }
            let spec = e.spectrum();
            let label = space.label(i).to_string();
            if spec.min() < -PSD_TOL * spec.max_abs().max(1.0) {
                return Err(Error::NotAnEffect {
                    label,
                    reason: format!("negative eigenvalue {:e}", spec.min()),
                });
            }
            if spec.max() > 1.0 + PSD_TOL {
                return Err(Error::NotAnEffect {
                    label,
                    reason: format!("eigenvalue {} exceeds 1", spec.max()),
                });
            }
            null.push(spec.max() <= PSD_TOL);
        }
        if null.iter().all(|&n| n) {
            return Err(Error::ZeroMeasure);
        }
        let mut total = HermitianMatrix::zeros(dim);
        for e in &effects {
            total += e;
        }
        let deviation = total.max_dist(&HermitianMatrix::identity(dim));
        Ok(Povm {
            space,
            dim,
            effects,
            null,
            deviation,
        })
    }

    /// The scalar POVM `x -> weights[x] * 1`.
    pub fn scalar(space: SampleSpace, weights: &[f64], dim: usize) -> Result<Self> {
        linalg::check_dim(dim)?;
        let id = HermitianMatrix::identity(dim);
        let effects = weights.iter().map(|&w| id.scale(w)).collect();
        Self::new(space, effects)
    }

    pub fn space(&self) -> &SampleSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effect(&self, i: usize) -> &HermitianMatrix {
        &self.effects[i]
    }

    pub fn effects(&self) -> &[HermitianMatrix] {
        &self.effects
    }

    /// Whether atom `i` carries positive measure.
    pub fn is_positive_atom(&self, i: usize) -> bool {
        !self.null[i]
    }

    /// `nu(E)` for an event given by point indices.
    pub fn event(&self, points: &[usize]) -> HermitianMatrix {
        let mut acc = HermitianMatrix::zeros(self.dim);
        for &i in points {
            acc += &self.effects[i];
        }
        acc
    }

    pub fn total(&self) -> HermitianMatrix {
        self.event(&(0..self.len()).collect::<Vec<_>>())
    }

    /// `nu(X) = 1`.
    pub fn is_probability(&self) -> bool {
        self.deviation <= PROBABILITY_TOL
    }

    pub fn require_probability(&self) -> Result<()> {
        if self.is_probability() {
            Ok(())
        } else {
            Err(Error::NotProbabilityMeasure {
                deviation: self.deviation,
            })
        }
    }

    /// `mu = tr(nu) / d`.
    pub fn induced_measure(&self) -> ClassicalMeasure {
        let d = self.dim as f64;
        ClassicalMeasure {
            weights: self
                .effects
                .iter()
                .zip(&self.null)
                .map(|(e, &n)| if n { 0.0 } else { e.trace() / d })
                .collect(),
        }
    }

    /// `d nu / d mu`: `d * nu_x / tr(nu_x)` on positive atoms, zero on null atoms.
    pub fn principal_rn(&self) -> QuantumRandomVariable {
        let d = self.dim as f64;
        let values = self
            .effects
            .iter()
            .zip(&self.null)
            .map(|(e, &n)| {
                if n {
                    HermitianMatrix::zeros(self.dim)
                } else {
                    e.scale(d / e.trace())
                }
            })
            .collect();
        QuantumRandomVariable::new(self.space.clone(), values)
            .expect("derivative values share the POVM's space and dim")
    }

    fn require_compatible(&self, other: &Povm) -> Result<()> {
        self.space.require_same(&other.space)?;
        if self.dim != other.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    /// `self << reference`: every null atom of `reference` is null for `self`.
    pub fn is_abs_continuous(&self, reference: &Povm) -> Result<bool> {
        self.require_compatible(reference)?;
        Ok(self.first_violation(reference).is_none())
    }

    fn first_violation(&self, reference: &Povm) -> Option<usize> {
        (0..self.len()).find(|&i| reference.null[i] && !self.null[i])
    }

    /// `d self / d reference`.
    ///
    /// `(dmu2/dmu1) W1^{-1/2} W2 W1^{-1/2}` with `W_k` the principal derivatives.
    /// Atoms where `W1` is singular use the pseudoinverse and are flagged.
    pub fn nonprincipal_rn(&self, reference: &Povm) -> Result<NonPrincipalRn> {
        self.require_compatible(reference)?;
        if let Some(i) = self.first_violation(reference) {
            return Err(Error::NotAbsolutelyContinuous {
                label: self.space.label(i).to_string(),
            });
        }
        let mu2 = self.induced_measure();
        let mu1 = reference.induced_measure();
        let w2 = self.principal_rn();
        let w1 = reference.principal_rn();
        let mut values = Vec::with_capacity(self.len());
        let mut singular = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            if reference.null[i] {
                values.push(HermitianMatrix::zeros(self.dim));
                singular.push(false);
                continue;
            }
            let w1i = w1.value(i);
            let inv_half = linalg::pinv_sqrt_psd(w1i)?;
            let ratio = mu2.weight(i) / mu1.weight(i);
            values.push(w2.value(i).congruence(&inv_half).scale(ratio));
            singular.push(!linalg::is_invertible_psd(w1i));
        }
        Ok(NonPrincipalRn {
            derivative: QuantumRandomVariable::new(self.space.clone(), values)?,
            singular_support: singular,
        })
    }
}

/// A non-principal derivative with a per-atom flag marking where the
/// reference derivative was singular (pseudoinverse used).
#[derive(Clone, Debug)]
pub struct NonPrincipalRn {
    pub derivative: QuantumRandomVariable,
    pub singular_support: Vec<bool>,
}

impl NonPrincipalRn {
    pub fn any_singular(&self) -> bool {
        self.singular_support.iter().any(|&s| s)
    }
}

/// Nonnegative point weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalMeasure {
    weights: Vec<f64>,
}

impl ClassicalMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidSpace("weights must be finite and nonnegative".into()));
        }
        Ok(ClassicalMeasure { weights })
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn event(&self, points: &[usize]) -> f64 {
        points.iter().map(|&i| self.weights[i]).sum()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}
