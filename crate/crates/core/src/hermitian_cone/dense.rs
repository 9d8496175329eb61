//! Small dense complex linear algebra.
//!
//! Everything here targets matrices of dimension at most ~10 (pointwise
//! coefficients of (1,1)-forms and the block matrices of the subadditivity
//! lemmas), so plain row-major storage and O(n^3) routines are the right tool.

use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub(crate) type Entries = SmallVec<[Complex64; 9]>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// A general rectangular complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Entries,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: SmallVec::from_elem(ZERO, rows * cols) }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: &[Complex64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Usage(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data: SmallVec::from_slice(data) })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Usage(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> Result<Complex64> {
        if self.rows != self.cols {
            return Err(Error::Usage("determinant of a non-square matrix".into()));
        }
        Ok(lu_det(self.rows, self.data.clone()))
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

pub(crate) fn lu_det(n: usize, mut a: Entries) -> Complex64 {
    let mut det = ONE;
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].norm();
        for r in (k + 1)..n {
            let v = a[r * n + k].norm();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return ZERO;
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            det = -det;
        }
        let d = a[k * n + k];
        det *= d;
        for r in (k + 1)..n {
            let factor = a[r * n + k] / d;
            if factor == ZERO {
                continue;
            }
            for c in (k + 1)..n {
                let v = a[k * n + c];
                a[r * n + c] -= factor * v;
            }
        }
    }
    det
}

/// Lower-triangular Cholesky factor `L` with `m = L L^H`.
///
/// Fails when a pivot drops below `rel_tol` times the largest diagonal entry.
pub(crate) fn cholesky(n: usize, m: &[Complex64], rel_tol: f64) -> Result<Entries> {
    let scale = (0..n).map(|i| m[i * n + i].re.abs()).fold(0.0_f64, f64::max);
    let floor = rel_tol * scale.max(f64::MIN_POSITIVE);
    let mut l: Entries = SmallVec::from_elem(ZERO, n * n);
    for j in 0..n {
        let mut d = m[j * n + j].re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > floor) {
            return Err(Error::Domain(format!(
                "matrix is not positive definite (pivot {j} = {d:.3e})"
            )));
        }
        let djj = d.sqrt();
        l[j * n + j] = Complex64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L X = B` in place for lower-triangular `L` (n x n) and `B` (n x m).
pub(crate) fn forward_solve(n: usize, l: &[Complex64], b: &mut [Complex64], m: usize) {
    for c in 0..m {
        for i in 0..n {
            let mut s = b[i * m + c];
            for k in 0..i {
                s -= l[i * n + k] * b[k * m + c];
            }
            b[i * m + c] = s / l[i * n + i];
        }
    }
}

/// Solves `L^H X = B` in place.
pub(crate) fn backward_solve_adjoint(n: usize, l: &[Complex64], b: &mut [Complex64], m: usize) {
    for c in 0..m {
        for i in (0..n).rev() {
            let mut s = b[i * m + c];
            for k in (i + 1)..n {
                s -= l[k * n + i].conj() * b[k * m + c];
            }
            b[i * m + c] = s / l[i * n + i].conj();
        }
    }
}

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi sweeps.
///
/// Returns eigenvalues in ascending order and, if requested, the matching
/// orthonormal eigenvectors stored column-wise (row-major `n x n`).
pub(crate) fn jacobi_eigh(n: usize, m: &[Complex64], want_vectors: bool) -> (SmallVec<[f64; 6]>, Entries) {
    let mut a: Entries = SmallVec::from_slice(m);
    let mut v: Entries = if want_vectors {
        let mut id = SmallVec::from_elem(ZERO, n * n);
        for i in 0..n {
            id[i * n + i] = ONE;
        }
        id
    } else {
        SmallVec::new()
    };

    let frob: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let eps = 1e-17 * frob.max(f64::MIN_POSITIVE);

    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q].norm_sqr();
            }
        }
        if off.sqrt() <= eps {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let r = apq.norm();
                if r <= eps * 1e-3 {
                    continue;
                }
                let phase = apq / r; // e^{i alpha}
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // V = diag(1, e^{-i alpha}) * [[c, s], [-s, c]]
                let vpp = Complex64::new(c, 0.0);
                let vpq = Complex64::new(s, 0.0);
                let vqp = -phase.conj() * s;
                let vqq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * vpp + akq * vqp;
                    a[k * n + q] = akp * vpq + akq * vqq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = vpp.conj() * apk + vqp.conj() * aqk;
                    a[q * n + k] = vpq.conj() * apk + vqq.conj() * aqk;
                }
                a[p * n + q] = ZERO;
                a[q * n + p] = ZERO;
                a[p * n + p].im = 0.0;
                a[q * n + q].im = 0.0;
                if want_vectors {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = vkp * vpp + vkq * vqp;
                        v[k * n + q] = vkp * vpq + vkq * vqq;
                    }
                }
            }
        }
    }

    let mut order: SmallVec<[usize; 6]> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re));
    let values = order.iter().map(|&i| a[i * n + i].re).collect();
    let vectors = if want_vectors {
        let mut sorted: Entries = SmallVec::from_elem(ZERO, n * n);
        for (new_col, &old_col) in order.iter().enumerate() {
            for k in 0..n {
                sorted[k * n + new_col] = v[k * n + old_col];
            }
        }
        sorted
    } else {
        SmallVec::new()
    };
    (values, vectors)
}

/// Mixed discriminant `D(A_1, ..., A_n)`, normalized so that `D(A, ..., A) = det A`.
///
/// Expanded over permutations: column `j` of the `sigma`-th summand is taken
/// from `A_{sigma(j)}`.
pub(crate) fn mixed_discriminant(n: usize, mats: &[&[Complex64]]) -> Complex64 {
    debug_assert_eq!(mats.len(), n);
    if n == 0 {
        return ONE;
    }
    let mut perm: SmallVec<[usize; 6]> = (0..n).collect();
    let mut total = ZERO;
    let mut count = 0usize;
    let mut buf: Entries = SmallVec::from_elem(ZERO, n * n);
    permutations(&mut perm, 0, &mut |p| {
        for j in 0..n {
            let src = mats[p[j]];
            for i in 0..n {
                buf[i * n + j] = src[i * n + j];
            }
        }
        total += lu_det(n, buf.clone());
        count += 1;
    });
    total / count as f64
}

fn permutations(perm: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permutations(perm, k + 1, visit);
        perm.swap(k, i);
    }
}
