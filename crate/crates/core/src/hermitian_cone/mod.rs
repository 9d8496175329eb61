//! Pointwise Hermitian-matrix algebra.
//!
//! A (1,1)-form at a point is an `n x n` Hermitian matrix. The equations in
//! this crate only ever see a form through its eigenvalues relative to a
//! reference form (the roots of `det(omega - lambda chi) = 0`), so the core
//! object here is [`SpectrumRel`] together with the cone tests and the dHYM
//! operator built on it.

mod dense;
pub mod lemmas;
pub mod sampling;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub use dense::ComplexMatrix;
pub(crate) use dense::Entries;

/// Relative tolerance used for every positive-definiteness check.
pub const POSITIVITY_TOL: f64 = 1e-12;

/// Tolerance for the Hermitian-symmetry check on construction.
const HERMITIAN_TOL: f64 = 1e-10;

/// An `n x n` complex Hermitian matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    entries: Entries,
}

impl HermitianMatrix {
    /// Builds a matrix from row-major entries.
    ///
    /// The input must be Hermitian up to `1e-10` relative to its largest entry;
    /// the stored matrix is the exact Hermitian part.
    pub fn new(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Usage("matrix dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::Usage(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Data("matrix has non-finite entries".into()));
        }
        let scale = entries.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(1.0);
        let mut out: Entries = SmallVec::from_slice(entries);
        for i in 0..dim {
            for j in i..dim {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i].conj();
                if (a - b).norm() > HERMITIAN_TOL * scale {
                    return Err(Error::Domain(format!(
                        "matrix is not Hermitian at ({i}, {j})"
                    )));
                }
                let avg = (a + b) * 0.5;
                out[i * dim + j] = avg;
                out[j * dim + i] = avg.conj();
            }
        }
        Ok(Self { dim, entries: out })
    }

    /// Builds a real symmetric matrix from row-major real entries.
    pub fn from_real(dim: usize, entries: &[f64]) -> Result<Self> {
        let c: Vec<Complex64> = entries.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::new(dim, &c)
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut entries: Entries = SmallVec::from_elem(Complex64::new(0.0, 0.0), dim * dim);
        for (i, &d) in diag.iter().enumerate() {
            entries[i * dim + i] = Complex64::new(d, 0.0);
        }
        Self { dim, entries }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: SmallVec::from_elem(Complex64::new(0.0, 0.0), dim * dim) }
    }

    /// Wraps entries that are Hermitian by construction. No checks.
    pub(crate) fn from_entries_unchecked(dim: usize, entries: Entries) -> Self {
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn to_complex_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_rows(self.dim, self.dim, &self.entries).expect("square storage")
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.entries[i * self.dim + i].re).sum()
    }

    /// Real determinant (LU with partial pivoting).
    pub fn det(&self) -> f64 {
        dense::lu_det(self.dim, self.entries.clone()).re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect(),
        })
    }

    /// `s * self + t * other`.
    pub fn combine(&self, s: f64, other: &Self, t: f64) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a * s + b * t).collect(),
        })
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Usage(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> SmallVec<[f64; 6]> {
        dense::jacobi_eigh(self.dim, &self.entries, false).0
    }

    /// Positive definite with smallest eigenvalue above `1e-12` times the
    /// largest entry.
    pub fn is_positive(&self) -> bool {
        let scale = self.entries.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
        if scale == 0.0 {
            return false;
        }
        self.eigenvalues()[0] > POSITIVITY_TOL * scale
    }

    /// Inverse of a positive definite matrix.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.dim;
        let l = dense::cholesky(n, &self.entries, POSITIVITY_TOL)?;
        let mut x: Entries = SmallVec::from_elem(Complex64::new(0.0, 0.0), n * n);
        for i in 0..n {
            x[i * n + i] = Complex64::new(1.0, 0.0);
        }
        dense::forward_solve(n, &l, &mut x, n);
        dense::backward_solve_adjoint(n, &l, &mut x, n);
        let mut m = Self { dim: n, entries: x };
        m.symmetrize();
        Ok(m)
    }

    /// `S^H M S` for a (possibly rectangular) `S`.
    pub fn congruence(&self, s: &ComplexMatrix) -> Result<Self> {
        let m = s.adjoint().matmul(&self.to_complex_matrix())?.matmul(s)?;
        let mut out = Self { dim: m.rows(), entries: SmallVec::from_slice(m.as_slice()) };
        out.symmetrize();
        Ok(out)
    }

    /// Principal submatrix on the given (distinct, in-range) indices.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() || idx.iter().any(|&i| i >= self.dim) {
            return Err(Error::Usage("principal submatrix index out of range".into()));
        }
        let k = idx.len();
        let mut entries: Entries = SmallVec::with_capacity(k * k);
        for &i in idx {
            for &j in idx {
                entries.push(self.get(i, j));
            }
        }
        Ok(Self { dim: k, entries })
    }

    /// Assembles the block matrix `[[A, C], [C^H, B]]`.
    pub fn from_blocks(a: &Self, b: &Self, c: &ComplexMatrix) -> Result<Self> {
        let (k, m) = (a.dim, b.dim);
        if c.rows() != k || c.cols() != m {
            return Err(Error::Usage(format!(
                "off-diagonal block is {}x{}, expected {k}x{m}",
                c.rows(),
                c.cols()
            )));
        }
        let n = k + m;
        let mut out = Self::zeros(n);
        for i in 0..k {
            for j in 0..k {
                out.entries[i * n + j] = a.get(i, j);
            }
            for j in 0..m {
                out.entries[i * n + k + j] = c[(i, j)];
                out.entries[(k + j) * n + i] = c[(i, j)].conj();
            }
        }
        for i in 0..m {
            for j in 0..m {
                out.entries[(k + i) * n + k + j] = b.get(i, j);
            }
        }
        Ok(out)
    }

    fn symmetrize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            self.entries[i * n + i].im = 0.0;
            for j in (i + 1)..n {
                let avg = (self.entries[i * n + j] + self.entries[j * n + i].conj()) * 0.5;
                self.entries[i * n + j] = avg;
                self.entries[j * n + i] = avg.conj();
            }
        }
    }
}

impl Serialize for HermitianMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| [self.get(i, j).re, self.get(i, j).im]).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianMatrix {
    /// Rows of `[re, im]` pairs; plain real numbers are accepted as well.
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Entry {
            Real(f64),
            Pair([f64; 2]),
        }
        let rows: Vec<Vec<Entry>> = Vec::deserialize(d)?;
        let n = rows.len();
        let mut flat = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(serde::de::Error::custom("matrix rows must form a square"));
            }
            for e in row {
                flat.push(match e {
                    Entry::Real(x) => Complex64::new(x, 0.0),
                    Entry::Pair([re, im]) => Complex64::new(re, im),
                });
            }
        }
        HermitianMatrix::new(n, &flat).map_err(serde::de::Error::custom)
    }
}

/// Ascending positive eigenvalues of one form relative to another.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRel {
    values: SmallVec<[f64; 6]>,
}

impl SpectrumRel {
    /// Sorts the values; all must be finite and strictly positive.
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Usage("spectrum must be nonempty".into()));
        }
        if values.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::Domain("spectrum must be finite and positive".into()));
        }
        let mut values: SmallVec<[f64; 6]> = SmallVec::from_slice(values);
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `prod lambda_i`, i.e. `det omega / det chi`.
    pub fn product(&self) -> f64 {
        self.values.iter().product()
    }
}

/// Which cone a spectrum is tested against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConeSpec {
    J { c: f64, slack: f64 },
    Dhym { theta0: f64, slack: f64 },
}

impl ConeSpec {
    pub fn j(c: f64, slack: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("J-cone constant must be positive, got {c}")));
        }
        check_slack(slack)?;
        Ok(ConeSpec::J { c, slack })
    }

    pub fn dhym(theta0: f64, slack: f64) -> Result<Self> {
        check_theta0(theta0)?;
        check_slack(slack)?;
        Ok(ConeSpec::Dhym { theta0, slack })
    }

    pub fn slack(&self) -> f64 {
        match *self {
            ConeSpec::J { slack, .. } | ConeSpec::Dhym { slack, .. } => slack,
        }
    }
}

fn check_slack(slack: f64) -> Result<()> {
    if !(slack >= 0.0 && slack.is_finite()) {
        return Err(Error::Domain(format!("slack must be non-negative, got {slack}")));
    }
    Ok(())
}

pub(crate) fn check_theta0(theta0: f64) -> Result<()> {
    if !(theta0 > 0.0 && theta0 < std::f64::consts::FRAC_PI_4) {
        return Err(Error::Domain(format!("theta0 must lie in (0, pi/4), got {theta0}")));
    }
    Ok(())
}

/// Generalized eigen-decomposition `omega v = lambda chi v`.
///
/// `vectors` holds the eigenvectors column-wise, normalized so that
/// `V^H chi V = I` and hence `V^H omega V = diag(lambda)`. The first-order
/// variation of a symmetric spectral function `G(lambda)` under `omega ->
/// omega + U` is `tr(V diag(dG) V^H U)`, which is what the linearizations use.
#[derive(Debug, Clone)]
pub struct RelativeEigen {
    pub spectrum: SpectrumRel,
    pub vectors: ComplexMatrix,
}

impl RelativeEigen {

    /// `V diag(d) V^H`.
    pub fn weighted_outer(&self, d: &[f64]) -> HermitianMatrix {
        let n = self.spectrum.dim();
        let v = &self.vectors;
        let mut out: Entries = SmallVec::from_elem(Complex64::new(0.0, 0.0), n * n);
        for i in 0..n {
            for j in i..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    s += v[(i, k)] * v[(j, k)].conj() * d[k];
                }
                out[i * n + j] = s;
                out[j * n + i] = s.conj();
            }
            out[i * n + i].im = 0.0;
        }
        HermitianMatrix { dim: n, entries: out }
    }
}

fn reduce_pair(chi: &HermitianMatrix, omega: &HermitianMatrix) -> Result<(Entries, Entries)> {
    if chi.dim != omega.dim {
        return Err(Error::Usage(format!(
            "dimension mismatch: chi is {0}x{0}, omega is {1}x{1}",
            chi.dim, omega.dim
        )));
    }
    let n = chi.dim;
    let l = dense::cholesky(n, &chi.entries, POSITIVITY_TOL)
        .map_err(|_| Error::Domain("reference form chi is not positive definite".into()))?;
    // M = L^{-1} omega L^{-H}
    let mut m: Entries = omega.entries.clone();
    dense::forward_solve(n, &l, &mut m, n);
    let mut mt: Entries = SmallVec::from_elem(Complex64::new(0.0, 0.0), n * n);
    for i in 0..n {
        for j in 0..n {
            mt[i * n + j] = m[j * n + i].conj();
        }
    }
    dense::forward_solve(n, &l, &mut mt, n);
    // mt = L^{-1} (L^{-1} omega)^H = L^{-1} omega L^{-H} since omega is Hermitian
    for i in 0..n {
        mt[i * n + i].im = 0.0;
        for j in (i + 1)..n {
            let avg = (mt[i * n + j] + mt[j * n + i].conj()) * 0.5;
            mt[i * n + j] = avg;
            mt[j * n + i] = avg.conj();
        }
    }
    Ok((l, mt))
}

fn check_positive_spectrum(values: &[f64], omega: &HermitianMatrix) -> Result<()> {
    let top = values.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    if !(values[0] > POSITIVITY_TOL * top) || !omega.entries.iter().all(|z| z.re.is_finite()) {
        return Err(Error::Domain(format!(
            "form omega is not positive definite (smallest relative eigenvalue {:.3e})",
            values[0]
        )));
    }
    Ok(())
}

/// Roots of `det(omega - lambda chi) = 0`, ascending.
pub fn relative_spectrum(chi: &HermitianMatrix, omega: &HermitianMatrix) -> Result<SpectrumRel> {
    let (values, _) = relative_eigen_raw(chi, omega, false)?;
    check_positive_spectrum(&values, omega)?;
    Ok(SpectrumRel { values })
}

/// Relative spectrum together with `chi`-orthonormal eigenvectors.
pub fn relative_eigen(chi: &HermitianMatrix, omega: &HermitianMatrix) -> Result<RelativeEigen> {
    let (values, vectors) = relative_eigen_raw(chi, omega, true)?;
    check_positive_spectrum(&values, omega)?;
    Ok(RelativeEigen { spectrum: SpectrumRel { values }, vectors })
}

/// Generalized eigenvalues (and optionally `chi`-orthonormal eigenvectors)
/// without requiring `omega` to be positive. `chi` must be positive definite.
pub(crate) fn relative_eigen_raw(
    chi: &HermitianMatrix,
    omega: &HermitianMatrix,
    want_vectors: bool,
) -> Result<(SmallVec<[f64; 6]>, ComplexMatrix)> {
    let n = chi.dim;
    let (l, m) = reduce_pair(chi, omega)?;
    let (values, mut w) = dense::jacobi_eigh(n, &m, want_vectors);
    if !want_vectors {
        return Ok((values, ComplexMatrix::zeros(0, 0)));
    }
    // V = L^{-H} W
    dense::backward_solve_adjoint(n, &l, &mut w, n);
    Ok((values, ComplexMatrix::from_rows(n, n, &w)?))
}

/// `tr_omega chi = sum 1/lambda_i`.
pub fn trace_relative(spec: &SpectrumRel) -> f64 {
    spec.values.iter().map(|l| 1.0 / l).sum()
}

/// Largest leave-one-out sum of `1/lambda_j`; zero when `n = 1`.
pub fn p_level(spec: &SpectrumRel) -> f64 {
    if spec.dim() == 1 {
        return 0.0;
    }
    // dropping 1/lambda_max, the smallest reciprocal, leaves the largest sum
    spec.values.iter().rev().skip(1).map(|l| 1.0 / l).sum()
}

/// Largest leave-one-out sum of `arctan(1/lambda_j)`; zero when `n = 1`.
pub fn p_level_arctan(spec: &SpectrumRel) -> f64 {
    if spec.dim() == 1 {
        return 0.0;
    }
    spec.values.iter().rev().skip(1).map(|l| (1.0 / l).atan()).sum()
}

/// `sum arctan(1/lambda_i)`.
pub fn q_level(spec: &SpectrumRel) -> f64 {
    spec.values.iter().map(|l| (1.0 / l).atan()).sum()
}

/// Boundary tolerance shared by the cone tests.
fn boundary_tol(bound: f64) -> f64 {
    1e-12 * bound.abs().max(1.0)
}

/// Worst `p`-subset reciprocal sum against `c - (n - p) slack`.
///
/// Non-strict: `worst <= bound` (up to a `1e-12` relative boundary tolerance).
/// Strict: `worst < bound` by more than that tolerance.
pub fn cone_test_j(spec: &SpectrumRel, cone: &ConeSpec, p: usize, strict: bool) -> Result<bool> {
    let ConeSpec::J { c, slack } = *cone else {
        return Err(Error::Usage("cone_test_j needs a J cone".into()));
    };
    let n = spec.dim();
    if p == 0 || p > n {
        return Err(Error::Usage(format!("subset size p = {p} outside 1..={n}")));
    }
    let worst: f64 = spec.values[..p].iter().map(|l| 1.0 / l).sum();
    let bound = c - (n - p) as f64 * slack;
    Ok(compare(worst, bound, strict))
}

/// Leave-one-out arctan sums against `theta0 - slack`.
pub fn cone_test_dhym(spec: &SpectrumRel, cone: &ConeSpec, strict: bool) -> Result<bool> {
    let ConeSpec::Dhym { theta0, slack } = *cone else {
        return Err(Error::Usage("cone_test_dhym needs a dHYM cone".into()));
    };
    Ok(compare(p_level_arctan(spec), theta0 - slack, strict))
}

fn compare(worst: f64, bound: f64, strict: bool) -> bool {
    let tol = boundary_tol(bound);
    if strict {
        worst < bound - tol
    } else {
        worst <= bound + tol
    }
}

/// `c - P(lambda)`: positive exactly when the J-equation is elliptic here.
pub fn j_cone_margin(spec: &SpectrumRel, c: f64) -> f64 {
    c - p_level(spec)
}

/// `theta0 - P_arctan(lambda)`: positive exactly inside the dHYM region.
pub fn dhym_cone_margin(spec: &SpectrumRel, theta0: f64) -> f64 {
    theta0 - p_level_arctan(spec)
}

/// `A - C B^{-1} C^H` for positive definite `B`.
pub fn schur_complement(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    c: &ComplexMatrix,
) -> Result<HermitianMatrix> {
    let (k, m) = (a.dim, b.dim);
    if c.rows() != k || c.cols() != m {
        return Err(Error::Usage(format!(
            "off-diagonal block is {}x{}, expected {k}x{m}",
            c.rows(),
            c.cols()
        )));
    }
    let l = dense::cholesky(m, &b.entries, POSITIVITY_TOL)
        .map_err(|_| Error::Domain("Schur complement needs positive definite B".into()))?;
    // Y = L^{-1} C^H, then C B^{-1} C^H = Y^H Y
    let ch = c.adjoint();
    let mut y: Entries = SmallVec::from_slice(ch.as_slice());
    dense::forward_solve(m, &l, &mut y, k);
    let mut out = a.clone();
    for i in 0..k {
        for j in 0..k {
            let mut s = Complex64::new(0.0, 0.0);
            for r in 0..m {
                s += y[r * k + i].conj() * y[r * k + j];
            }
            out.entries[i * k + j] -= s;
        }
    }
    out.symmetrize();
    Ok(out)
}

/// Smallest `f` admitted by the dHYM operator: `-1/(100 n)`.
pub fn dhym_f_floor(n: usize) -> f64 {
    -1.0 / (100.0 * n as f64)
}

/// Smallest `f` admitted by the generalized J-equation: `-(1/2n) (1/c)^{n-1}`.
pub fn j_f_floor(n: usize, c: f64) -> f64 {
    -(1.0 / (2.0 * n as f64)) * (1.0 / c).powi(n as i32 - 1)
}

fn check_dhym_args(f: f64, n: usize, theta0: f64) -> Result<()> {
    check_theta0(theta0)?;
    let floor = dhym_f_floor(n);
    if !(f > floor) || !f.is_finite() {
        return Err(Error::Domain(format!("f = {f} must exceed {floor}")));
    }
    Ok(())
}

/// `F(f, lambda) = sin(theta0 - Q) - f cos(theta0) / prod sqrt(lambda_i^2 + 1)`.
pub fn f_value(f: f64, spec: &SpectrumRel, theta0: f64) -> Result<f64> {
    check_dhym_args(f, spec.dim(), theta0)?;
    Ok(f_value_unchecked(f, spec.values(), theta0))
}

pub(crate) fn f_value_unchecked(f: f64, lambda: &[f64], theta0: f64) -> f64 {
    let q: f64 = lambda.iter().map(|l| (1.0 / l).atan()).sum();
    let rho: f64 = lambda.iter().map(|l| 1.0 / (l * l + 1.0).sqrt()).product();
    (theta0 - q).sin() - f * theta0.cos() * rho
}

/// Gradient of `F` in `lambda`; defined on the dHYM region only.
pub fn f_gradient(f: f64, spec: &SpectrumRel, theta0: f64) -> Result<Vec<f64>> {
    check_dhym_args(f, spec.dim(), theta0)?;
    let margin = dhym_cone_margin(spec, theta0);
    if !(margin > 0.0) {
        return Err(Error::Domain(format!(
            "spectrum outside the dHYM region (margin {margin:.3e})"
        )));
    }
    Ok(f_gradient_unchecked(f, spec.values(), theta0))
}

pub(crate) fn f_gradient_unchecked(f: f64, lambda: &[f64], theta0: f64) -> Vec<f64> {
    let q: f64 = lambda.iter().map(|l| (1.0 / l).atan()).sum();
    let rho: f64 = lambda.iter().map(|l| 1.0 / (l * l + 1.0).sqrt()).product();
    let cq = (theta0 - q).cos();
    let k = f * theta0.cos() * rho;
    lambda
        .iter()
        .map(|&l| {
            let qi = 1.0 / (l * l + 1.0);
            cq * qi + k * l * qi
        })
        .collect()
}

/// Hessian of `F` in `lambda`, row-major `n x n`.
pub fn f_hessian(f: f64, spec: &SpectrumRel, theta0: f64) -> Result<Vec<f64>> {
    check_dhym_args(f, spec.dim(), theta0)?;
    let lambda = spec.values();
    let n = lambda.len();
    let q: f64 = lambda.iter().map(|l| (1.0 / l).atan()).sum();
    let rho: f64 = lambda.iter().map(|l| 1.0 / (l * l + 1.0).sqrt()).product();
    let (sq, cq) = (theta0 - q).sin_cos();
    let k = f * theta0.cos() * rho;
    let qs: Vec<f64> = lambda.iter().map(|l| 1.0 / (l * l + 1.0)).collect();
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut v = -sq * qs[i] * qs[j] - k * lambda[i] * qs[i] * lambda[j] * qs[j];
            if i == j {
                let (l, qi) = (lambda[i], qs[i]);
                v += -2.0 * l * qi * qi * cq + k * (qi - 2.0 * l * l * qi * qi);
            }
            h[i * n + j] = v;
        }
    }
    Ok(h)
}

/// Replaces each `lambda_i` by `min(lambda_i, cap)`.
pub fn truncate_spectrum(spec: &SpectrumRel, cap: f64) -> Result<SpectrumRel> {
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::Domain(format!("truncation cap must be positive, got {cap}")));
    }
    Ok(SpectrumRel { values: spec.values.iter().map(|&l| l.min(cap)).collect() })
}

/// Mixed discriminant of `n` Hermitian `n x n` matrices, with `D(A,..,A) = det A`.
pub fn mixed_discriminant(mats: &[&HermitianMatrix]) -> Result<f64> {
    let n = mats.len();
    if n == 0 || mats.iter().any(|m| m.dim != n) {
        return Err(Error::Usage("mixed discriminant needs n matrices of size n".into()));
    }
    let slices: SmallVec<[&[Complex64]; 6]> = mats.iter().map(|m| m.as_slice()).collect();
    Ok(dense::mixed_discriminant(n, &slices).re)
}

pub(crate) fn mixed_discriminant_raw(n: usize, mats: &[&[Complex64]]) -> f64 {
    dense::mixed_discriminant(n, mats).re
}

#[cfg(test)]
mod tests;
