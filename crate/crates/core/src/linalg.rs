//! Dense complex Hermitian matrix kernel.
//!
//! Everything downstream (effects, states, Radon-Nikodym derivatives,
//! quantum random variable values) is a [`HermitianMatrix`]. Spectral
//! functions go through a single eigendecomposition path so that the
//! clipping and rank conventions below are applied uniformly:
//!
//! * an eigenvalue below `-PSD_TOL * max(1, |lambda|_max)` makes a matrix
//!   non-positive; anything above that is clipped to zero before roots and
//!   pseudoinverses,
//! * eigenvalues below `RANK_TOL * lambda_max` are treated as zero by
//!   pseudoinverses and range projectors,
//! * eigenvalues below `NOISE_TOL * |lambda|_max` are round-off and are
//!   dropped before taking square roots.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::MatrixRecord;

/// Dense complex matrix used for intermediate, not necessarily Hermitian, values.
pub type CMatrix = DMatrix<Complex64>;

/// Negative eigenvalues down to `-PSD_TOL * max(1, |lambda|_max)` still count as PSD.
pub const PSD_TOL: f64 = 1e-10;
/// Entrywise tolerance on `m - m*` (scaled by `max(1, |m|_max)`) at construction.
pub const HERMIT_TOL: f64 = 1e-12;
/// Relative eigenvalue cut-off for pseudoinverses, ranks and invertibility.
pub const RANK_TOL: f64 = 1e-10;
/// Largest supported Hilbert space dimension.
pub const MAX_DIM: usize = 64;
/// Relative eigenvalue level treated as round-off by square roots.
pub const NOISE_TOL: f64 = 1e-13;

/// Regularization schedule for the singular geometric mean limit.
pub const MEAN_EPS_SCHEDULE: [f64; 6] = [1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12];
/// Cauchy threshold between consecutive regularized means.
pub const MEAN_CAUCHY_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Max-entry (modulus) norm of a complex matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// Eigenvalues in ascending order with matching unit eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    pub(crate) fn of(m: &CMatrix) -> Self {
        let n = m.nrows();
        let eig = m.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Spectrum { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn max_abs(&self) -> f64 {
        self.min().abs().max(self.max().abs())
    }

    fn psd_threshold(&self) -> f64 {
        PSD_TOL * self.max_abs().max(1.0)
    }

    /// `V diag(f(lambda)) V*`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let s = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        hermitian_part(&(scaled * self.vectors.adjoint()))
    }

    fn check_psd(&self) -> Result<()> {
        if self.min() < -self.psd_threshold() {
            return Err(Error::NotPositive {
                min_eigenvalue: self.min(),
            });
        }
        Ok(())
    }

    fn is_invertible_psd(&self) -> bool {
        self.max() > 0.0 && self.min() > RANK_TOL * self.max()
    }
}

/// A `d x d` complex Hermitian matrix with `1 <= d <= 64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRecord", into = "MatrixRecord")]
pub struct HermitianMatrix {
    inner: CMatrix,
}

impl HermitianMatrix {
    /// Validates shape and Hermitian symmetry, then stores the exact Hermitian part.
    pub fn new(m: CMatrix) -> Result<Self> {
        let (r, c) = m.shape();
        if r != c {
            return Err(Error::InvalidMatrix(format!("not square: {r}x{c}")));
        }
        check_dim(r)?;
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        let skew = max_abs(&(&m - m.adjoint()));
        let scale = max_abs(&m).max(1.0);
        if skew > HERMIT_TOL * scale {
            return Err(Error::InvalidMatrix(format!(
                "not Hermitian (|m - m*|_max = {skew:e})"
            )));
        }
        Ok(HermitianMatrix {
            inner: hermitian_part(&m),
        })
    }

    /// Wraps a matrix known to be Hermitian up to round-off.
    pub(crate) fn from_raw(m: CMatrix) -> Self {
        debug_assert!(m.is_square());
        HermitianMatrix {
            inner: hermitian_part(&m),
        }
    }

    /// Row-major complex entries.
    pub fn from_entries(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for dim {dim}, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::new(CMatrix::from_row_slice(dim, dim, entries))
    }

    /// Row-major real entries.
    pub fn from_real(dim: usize, entries: &[f64]) -> Result<Self> {
        let entries: Vec<Complex64> = entries.iter().map(|&x| real(x)).collect();
        Self::from_entries(dim, &entries)
    }

    pub fn diag(values: &[f64]) -> Self {
        let d = values.len();
        HermitianMatrix {
            inner: CMatrix::from_fn(d, d, |i, j| if i == j { real(values[i]) } else { ZERO }),
        }
    }

    pub fn identity(dim: usize) -> Self {
        HermitianMatrix {
            inner: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix {
            inner: CMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> CMatrix {
        self.inner
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.inner[(i, j)]
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum::of(&self.inner)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectrum().values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum().min()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.spectrum().max()
    }

    pub fn trace(&self) -> f64 {
        self.inner.diagonal().iter().map(|z| z.re).sum()
    }

    /// Max-entry norm.
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.inner)
    }

    /// Max-entry distance to `other`.
    pub fn max_dist(&self, other: &HermitianMatrix) -> f64 {
        max_abs(&(&self.inner - &other.inner))
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.max_abs() < tol
    }

    pub fn scale(&self, s: f64) -> HermitianMatrix {
        HermitianMatrix {
            inner: self.inner.map(|z| z * s),
        }
    }

    /// `k * self * k` for Hermitian `k`; stays Hermitian.
    pub fn congruence(&self, k: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix::from_raw(&k.inner * &self.inner * &k.inner)
    }

    /// `a * b` as a plain complex matrix.
    pub fn product(&self, other: &HermitianMatrix) -> CMatrix {
        &self.inner * &other.inner
    }
}

impl std::ops::Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            inner: &self.inner + &rhs.inner,
        }
    }
}

impl std::ops::Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            inner: &self.inner - &rhs.inner,
        }
    }
}

impl std::ops::Neg for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn neg(self) -> HermitianMatrix {
        HermitianMatrix {
            inner: -&self.inner,
        }
    }
}

impl std::ops::AddAssign<&HermitianMatrix> for HermitianMatrix {
    fn add_assign(&mut self, rhs: &HermitianMatrix) {
        self.inner += &rhs.inner;
    }
}

pub(crate) fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::InvalidMatrix(format!(
            "dimension {d} outside 1..={MAX_DIM}"
        )));
    }
    Ok(())
}

/// A density operator: PSD with unit trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DensityOperator {
    matrix: HermitianMatrix,
}

impl DensityOperator {
    pub fn new(matrix: HermitianMatrix) -> Result<Self> {
        let spec = matrix.spectrum();
        spec.check_psd()?;
        let tr = matrix.trace();
        if (tr - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMatrix(format!(
                "density operator must have unit trace, got {tr}"
            )));
        }
        Ok(DensityOperator { matrix })
    }

    /// `1/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        DensityOperator {
            matrix: HermitianMatrix::identity(dim).scale(1.0 / dim as f64),
        }
    }

    /// The pure state `v v* / |v|^2`.
    pub fn pure(v: &[Complex64]) -> Result<Self> {
        let d = v.len();
        check_dim(d)?;
        let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if norm2 == 0.0 {
            return Err(Error::InvalidMatrix("zero state vector".into()));
        }
        let m = CMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj() / norm2);
        Ok(DensityOperator {
            matrix: HermitianMatrix::from_raw(m),
        })
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// True iff the smallest eigenvalue is at least `-tol`.
pub fn is_psd(m: &HermitianMatrix, tol: f64) -> bool {
    m.min_eigenvalue() >= -tol
}

/// PSD square root with the clipping conventions of this module.
pub fn sqrt_psd(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    let spec = m.spectrum();
    spec.check_psd()?;
    let floor = NOISE_TOL * spec.max_abs();
    Ok(HermitianMatrix::from_raw(spec.apply(|l| {
        if l <= floor {
            0.0
        } else {
            l.sqrt()
        }
    })))
}

/// Moore-Penrose pseudoinverse of a PSD matrix.
pub fn pinv_psd(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    let spec = m.spectrum();
    spec.check_psd()?;
    let cut = RANK_TOL * spec.max();
    Ok(HermitianMatrix::from_raw(spec.apply(|l| {
        if l > cut && l > 0.0 {
            1.0 / l
        } else {
            0.0
        }
    })))
}

/// Pseudoinverse of the square root, `(m^{1/2})^+`.
pub fn pinv_sqrt_psd(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    let spec = m.spectrum();
    spec.check_psd()?;
    let cut = RANK_TOL * spec.max();
    Ok(HermitianMatrix::from_raw(spec.apply(|l| {
        if l > cut && l > 0.0 {
            1.0 / l.sqrt()
        } else {
            0.0
        }
    })))
}

/// Whether a PSD matrix is invertible at the `RANK_TOL` level.
pub fn is_invertible_psd(m: &HermitianMatrix) -> bool {
    m.spectrum().is_invertible_psd()
}

/// Orthogonal projector onto the eigenvectors with `|lambda| > tol * |lambda|_max`.
pub fn range_projector(m: &HermitianMatrix, tol: f64) -> HermitianMatrix {
    let spec = m.spectrum();
    let cut = tol * spec.max_abs();
    HermitianMatrix::from_raw(spec.apply(|l| if l.abs() > cut && l != 0.0 { 1.0 } else { 0.0 }))
}

/// `tr(rho m)`.
pub fn trace_pair(rho: &DensityOperator, m: &HermitianMatrix) -> Result<Complex64> {
    if rho.dim() != m.dim() {
        return Err(Error::DimMismatch {
            expected: rho.dim(),
            found: m.dim(),
        });
    }
    Ok(trace_product(rho.matrix.as_matrix(), m.as_matrix()))
}

/// `tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `a^{1/2} (a^{-1/2} b a^{-1/2})^{1/2} a^{1/2}` for invertible `a`.
fn mean_closed_form(a: &Spectrum, b: &CMatrix) -> CMatrix {
    let half = a.apply(f64::sqrt);
    let inv_half = a.apply(|l| 1.0 / l.sqrt());
    let inner = Spectrum::of(&hermitian_part(&(&inv_half * b * &inv_half)));
    let floor = NOISE_TOL * inner.max_abs();
    let root = inner.apply(|l| if l <= floor { 0.0 } else { l.sqrt() });
    hermitian_part(&(&half * root * &half))
}

/// Kubo-Ando geometric mean `a # b` of PSD matrices.
///
/// With an invertible argument the closed form is used (based on the better
/// conditioned argument when both are invertible). When both are singular
/// the limit `lim (a + eps)#(b + eps)` is evaluated exactly: on
/// `ran(a) (+) ker(a)` it equals `a_1 # s` on `ran(a)`, where `s` is the
/// generalized Schur complement of the `ker(a)` block of `b` (the shorted
/// operator of `b` onto `ran(a)`), and zero elsewhere.
pub fn geometric_mean(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<HermitianMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let sa = a.spectrum();
    let sb = b.spectrum();
    sa.check_psd()?;
    sb.check_psd()?;
    let cond = |s: &Spectrum| s.max() / s.min();
    let m = match (sa.is_invertible_psd(), sb.is_invertible_psd()) {
        (true, true) if cond(&sa) <= cond(&sb) => mean_closed_form(&sa, b.as_matrix()),
        (true, true) => mean_closed_form(&sb, a.as_matrix()),
        (true, false) => mean_closed_form(&sa, b.as_matrix()),
        (false, true) => mean_closed_form(&sb, a.as_matrix()),
        (false, false) => mean_shorted(&sa, b.as_matrix(), &sb),
    };
    Ok(HermitianMatrix::from_raw(m))
}

fn mean_shorted(sa: &Spectrum, b: &CMatrix, sb: &Spectrum) -> CMatrix {
    let d = sa.values.len();
    if sa.max() <= 0.0 || sb.max() <= 0.0 {
        return CMatrix::zeros(d, d);
    }
    let cut = RANK_TOL * sa.max();
    let range: Vec<usize> = (0..d).filter(|&k| sa.values[k] > cut).collect();
    let kernel: Vec<usize> = (0..d).filter(|&k| sa.values[k] <= cut).collect();
    let v1 = sa.vectors.select_columns(&range);
    let v0 = sa.vectors.select_columns(&kernel);

    let b11 = v1.adjoint() * b * &v1;
    let b10 = v1.adjoint() * b * &v0;
    let b00 = hermitian_part(&(v0.adjoint() * b * &v0));
    let b00_pinv = Spectrum::of(&b00).apply(|l| {
        if l > RANK_TOL * sb.max() {
            1.0 / l
        } else {
            0.0
        }
    });
    let shorted = hermitian_part(&(b11 - &b10 * b00_pinv * b10.adjoint()));
    // the complement is often exactly zero; drop its round-off before the root
    // amplifies it to sqrt(eps)
    let shorted = Spectrum::of(&shorted).apply(|l| if l > RANK_TOL * sb.max() { l } else { 0.0 });

    let a1 = Spectrum {
        values: range.iter().map(|&k| sa.values[k]).collect(),
        vectors: CMatrix::identity(range.len(), range.len()),
    };
    let m1 = mean_closed_form(&a1, &shorted);
    hermitian_part(&(&v1 * m1 * v1.adjoint()))
}

/// The regularized limit `lim (a + eps)#(b + eps)` along an explicit
/// schedule, accepted once two consecutive iterates differ by less than
/// `cauchy_tol` in max-entry norm.
pub fn geometric_mean_regularized(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    schedule: &[f64],
    cauchy_tol: f64,
) -> Result<HermitianMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    a.spectrum().check_psd()?;
    b.spectrum().check_psd()?;
    let id = HermitianMatrix::identity(a.dim());
    let mut previous: Option<CMatrix> = None;
    let mut step = f64::INFINITY;
    for &eps in schedule {
        let ae = a + &id.scale(eps);
        let be = b + &id.scale(eps);
        let current = mean_closed_form(&ae.spectrum(), be.as_matrix());
        if let Some(prev) = previous.take() {
            step = max_abs(&(&current - &prev));
            if step < cauchy_tol {
                return Ok(HermitianMatrix::from_raw(current));
            }
        }
        previous = Some(current);
    }
    let last = previous.unwrap_or_else(|| CMatrix::zeros(a.dim(), a.dim()));
    Err(Error::MeanDidNotConverge {
        step,
        previous: Box::new(last.clone()),
        last: Box::new(last),
    })
}

/// Orthonormal real coordinates of a Hermitian matrix in the Hilbert-Schmidt
/// basis `E_ii`, `(E_ij + E_ji)/sqrt2`, `i(E_ij - E_ji)/sqrt2` for `i < j`.
pub fn hermitian_coords(m: &CMatrix) -> Vec<f64> {
    let d = m.nrows();
    let s = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        out.push(m[(i, i)].re);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            out.push(m[(i, j)].re * s);
            out.push(-m[(i, j)].im * s);
        }
    }
    out
}

/// Inverse of [`hermitian_coords`].
pub fn from_hermitian_coords(d: usize, coords: &[f64]) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = real(coords[i]);
    }
    let mut k = d;
    for i in 0..d {
        for j in (i + 1)..d {
            let z = Complex64::new(coords[k] * s, -coords[k + 1] * s);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    m
}
