//! Finite-dimensional quantum probability.
//!
//! Sample spaces are finite, so every integral is a finite sum over atoms and
//! every sigma-algebra is a partition. Operators live on `C^d` with `d <= 64`.
//!
//! ```
//! use qprob::{expectation, HermitianMatrix, Povm, QuantumRandomVariable, SampleSpace};
//!
//! let space = SampleSpace::indexed(2);
//! let half = HermitianMatrix::identity(2).scale(0.5);
//! let nu = Povm::new(space.clone(), vec![half.clone(), half]).unwrap();
//! let one = QuantumRandomVariable::constant(space, HermitianMatrix::identity(2));
//! let e = expectation(&one, &nu).unwrap();
//! assert!(e.max_dist(&HermitianMatrix::identity(2)) < 1e-12);
//! ```

pub mod cond;
pub mod error;
pub mod expect;
pub mod generate;
pub mod io;
pub mod linalg;
pub mod martingale;
pub mod meanzero;
pub mod povm;
pub mod space;
pub mod variable;

pub use cond::{conditional_expectation, CondOptions, ConditionalSolve};
pub use error::{Error, Result};
pub use expect::{boxtimes, expectation, general_boxtimes, psi_rho};
pub use linalg::{
    geometric_mean, is_psd, pinv_psd, range_projector, sqrt_psd, trace_pair, DensityOperator,
    HermitianMatrix,
};
pub use martingale::{gamma_equiv, qmct_run, MartingaleRun};
pub use meanzero::{classify_mean_zero, MeanZeroReport};
pub use povm::{ClassicalMeasure, Povm};
pub use space::{Filtration, Partition, SampleSpace};
pub use variable::{ProbeStateSet, QuantumRandomVariable};
