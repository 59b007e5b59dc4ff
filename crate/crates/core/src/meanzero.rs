//! When does a quantum random variable have zero quantum expectation?
//!
//! Five per-atom conditions are compared, `w` being the principal derivative:
//!
//! * A: `E[psi] = 0`,
//! * B: `ran psi(x)` orthogonal to `ran w(x)`,
//! * C: `psi(x)* w(x) = 0`,
//! * D: `(psi boxtimes w)(x) = 0`,
//! * E: `psi(x)^{1/2} w(x)^{1/2} = 0` (positive `psi` only).
//!
//! For positive `psi` all five agree. In general only `B <=> C => D => A`
//! holds. Conditions are checked on atoms of positive measure only.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::expect::{boxtimes, expectation};
use crate::io::MatrixRecord;
use crate::linalg::{self, max_abs, CMatrix, HermitianMatrix, RANK_TOL};
use crate::povm::Povm;
use crate::space::SampleSpace;
use crate::variable::QuantumRandomVariable;

/// Default threshold for every mean-zero test.
pub const ZERO_TOL: f64 = 1e-9;

/// Per-atom evidence.
#[derive(Clone, Debug, Serialize)]
pub struct AtomWitness {
    pub label: String,
    pub positive_atom: bool,
    /// `tr(P_psi P_w)`.
    pub range_overlap: f64,
    /// `psi(x)* w(x)`.
    #[serde(serialize_with = "ser_cmatrix")]
    pub adjoint_product: CMatrix,
    /// `(psi boxtimes w)(x)`.
    pub boxtimes: HermitianMatrix,
    /// `psi(x)^{1/2} w(x)^{1/2}` for positive `psi`.
    #[serde(serialize_with = "ser_opt_cmatrix")]
    pub root_product: Option<CMatrix>,
    /// `tr(P_{psi^{1/2}} P_{w^{1/2}})` for positive `psi`.
    pub root_range_overlap: Option<f64>,
}

pub(crate) fn cmatrix_record(m: &CMatrix) -> MatrixRecord {
    let d = m.nrows();
    let mut entries = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            entries.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    MatrixRecord { dim: d, entries }
}

fn ser_cmatrix<S: serde::Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    cmatrix_record(m).serialize(s)
}

fn ser_opt_cmatrix<S: serde::Serializer>(
    m: &Option<CMatrix>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    m.as_ref().map(cmatrix_record).serialize(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanZeroReport {
    pub tol: f64,
    pub a: bool,
    pub b: bool,
    pub c: bool,
    pub d: bool,
    /// `None` when `psi` is not positive.
    pub e: Option<bool>,
    /// E evaluated through range projectors of the square roots.
    pub e_via_ranges: Option<bool>,
    pub expectation: HermitianMatrix,
    pub atoms: Vec<AtomWitness>,
}

impl MeanZeroReport {
    /// `B <=> C`, `C => D`, `D => A`.
    pub fn implications_hold(&self) -> bool {
        self.b == self.c && (!self.c || self.d) && (!self.d || self.a)
    }

    /// All five verdicts equal (positive `psi`).
    pub fn all_agree(&self) -> bool {
        match self.e {
            Some(e) => [self.a, self.b, self.c, self.d].iter().all(|&v| v == e),
            None => false,
        }
    }
}

pub fn classify_mean_zero(psi: &QuantumRandomVariable, nu: &Povm, tol: f64) -> Result<MeanZeroReport> {
    let e_psi = expectation(psi, nu)?;
    let bx = boxtimes(psi, nu)?;
    let w = nu.principal_rn();
    let positive = psi.is_positive();
    let mut atoms = Vec::with_capacity(psi.len());
    let (mut b, mut c, mut d, mut e, mut e_ranges) = (true, true, true, true, true);
    for x in 0..psi.len() {
        let p = psi.value(x);
        let wx = w.value(x);
        let pp = linalg::range_projector(p, RANK_TOL);
        let pw = linalg::range_projector(wx, RANK_TOL);
        let range_overlap = linalg::trace_product(pp.as_matrix(), pw.as_matrix()).re;
        let adjoint_product = p.as_matrix().adjoint() * wx.as_matrix();
        let (root_product, root_range_overlap) = if positive {
            let rp = linalg::sqrt_psd(p)?;
            let rw = linalg::sqrt_psd(wx)?;
            let prp = linalg::range_projector(&rp, RANK_TOL);
            let prw = linalg::range_projector(&rw, RANK_TOL);
            (
                Some(rp.product(&rw)),
                Some(linalg::trace_product(prp.as_matrix(), prw.as_matrix()).re),
            )
        } else {
            (None, None)
        };
        let positive_atom = nu.is_positive_atom(x);
        if positive_atom {
            b &= range_overlap < tol;
            c &= max_abs(&adjoint_product) < tol;
            d &= bx.value(x).max_abs() < tol;
            if let Some(r) = &root_product {
                e &= max_abs(r) < tol;
            }
            if let Some(o) = root_range_overlap {
                e_ranges &= o < tol;
            }
        }
        atoms.push(AtomWitness {
            label: psi.space().label(x).to_string(),
            positive_atom,
            range_overlap,
            adjoint_product,
            boxtimes: bx.value(x).clone(),
            root_product,
            root_range_overlap,
        });
    }
    Ok(MeanZeroReport {
        tol,
        a: e_psi.max_abs() < tol,
        b,
        c,
        d,
        e: positive.then_some(e),
        e_via_ranges: positive.then_some(e_ranges),
        expectation: e_psi,
        atoms,
    })
}

/// Outcome of the left-multiplied test `psi(x) w(x) = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct AdjointReport {
    pub left_condition: bool,
    /// Whether `E[psi] = 0`; only asserted when the left condition holds.
    pub expectation_zero: Option<bool>,
}

impl AdjointReport {
    /// The implication held (vacuously when the hypothesis fails).
    pub fn holds(&self) -> bool {
        self.expectation_zero.unwrap_or(true)
    }
}

pub fn adjoint_mean_zero(psi: &QuantumRandomVariable, nu: &Povm, tol: f64) -> Result<AdjointReport> {
    let e_psi = expectation(psi, nu)?;
    let w = nu.principal_rn();
    let left = (0..psi.len())
        .filter(|&x| nu.is_positive_atom(x))
        .all(|x| max_abs(&psi.value(x).product(w.value(x))) < tol);
    Ok(AdjointReport {
        left_condition: left,
        expectation_zero: left.then(|| e_psi.max_abs() < tol),
    })
}

/// The two POVMs and two variables separating the mean-zero statements.
#[derive(Clone, Debug)]
pub struct Fixtures {
    pub nu1: Povm,
    pub nu2: Povm,
    pub psi1: QuantumRandomVariable,
    pub psi2: QuantumRandomVariable,
}

pub fn counterexample_fixtures() -> Fixtures {
    let space = SampleSpace::indexed(2);
    let id = HermitianMatrix::identity(2);
    let real = |v: [f64; 4]| {
        let e: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        HermitianMatrix::from_entries(2, &e).expect("symmetric fixture")
    };
    let build = |values| Povm::new(space.clone(), values).expect("fixture is a POVM");
    Fixtures {
        nu1: build(vec![id.scale(0.5), id.scale(0.5)]),
        nu2: build(vec![real([1.0, 0.0, 0.0, 0.0]), real([0.0, 0.0, 0.0, 1.0])]),
        psi1: QuantumRandomVariable::new(space.clone(), vec![id.clone(), -&id]).expect("fixture"),
        psi2: QuantumRandomVariable::new(
            space.clone(),
            vec![real([0.0, 1.0, 1.0, 1.0]), real([1.0, 1.0, 1.0, 0.0])],
        )
        .expect("fixture"),
    }
}
