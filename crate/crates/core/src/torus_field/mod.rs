//! Periodic grids on the flat complex torus `C^n / Z^{2n}`.
//!
//! Real coordinates are ordered `(x1, y1, ..., xn, yn)` with `z_j = x_j + i y_j`,
//! each of period one, sampled on `N` points per axis in row-major order.
//!
//! Density convention: the top power of a (1,1)-form `omega = i g_{jk} dz^j ^ dz^k`
//! is `omega^n = n! det(g) dV`, and more generally
//! `alpha_1 ^ ... ^ alpha_n = n! D(a_1, ..., a_n) dV` with `D` the mixed
//! discriminant. Here `dV` is Lebesgue measure on the unit cube, so the
//! torus has volume one.

pub(crate) mod fft;
mod io;
mod mollify;
mod regmax;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::hermitian_cone::{relative_spectrum, HermitianMatrix};

pub use io::{read_field, write_field, write_field_csv, FieldHeader};
pub use mollify::{kernel_profile, mollify, mollify_components};
pub use regmax::{regularized_max, regularized_max_scalar};

/// Grid shape: complex dimension `n` and `N` points per real axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGeometry {
    n: usize,
    #[serde(rename = "N")]
    grid: usize,
}

/// Largest grid (in points) accepted; keeps every field under a few hundred MB.
const MAX_POINTS: usize = 1 << 24;

impl TorusGeometry {
    pub fn new(n: usize, grid: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::Usage(format!("complex dimension must be 1..=3, got {n}")));
        }
        if grid < 8 || !grid.is_power_of_two() {
            return Err(Error::Usage(format!(
                "grid size must be a power of two >= 8, got {grid}"
            )));
        }
        let total = (grid as u128).pow(2 * n as u32);
        if total > MAX_POINTS as u128 {
            return Err(Error::Usage(format!(
                "grid {grid}^{} = {total} points exceeds the limit of {MAX_POINTS}",
                2 * n
            )));
        }
        Ok(Self { n, grid })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Points per real axis.
    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn real_dims(&self) -> usize {
        2 * self.n
    }

    /// Total number of grid points `N^{2n}`.
    pub fn len(&self) -> usize {
        self.grid.pow(2 * self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Real coordinates of a grid point.
    pub fn coords(&self, mut idx: usize) -> SmallVec<[f64; 6]> {
        let d = self.real_dims();
        let mut out: SmallVec<[f64; 6]> = SmallVec::from_elem(0.0, d);
        for a in (0..d).rev() {
            out[a] = (idx % self.grid) as f64 / self.grid as f64;
            idx /= self.grid;
        }
        out
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self != other {
            return Err(Error::Usage(format!(
                "geometry mismatch: (n={}, N={}) vs (n={}, N={})",
                self.n, self.grid, other.n, other.grid
            )));
        }
        Ok(())
    }
}

/// Deterministic parallel sum: fixed chunks, partial sums added in order.
pub(crate) fn det_sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    const CHUNK: usize = 4096;
    let chunks = len.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let hi = ((c + 1) * CHUNK).min(len);
            (c * CHUNK..hi).map(&f).sum()
        })
        .collect();
    partial.iter().sum()
}

/// A real function sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    geometry: TorusGeometry,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(geometry: TorusGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::Data(format!(
                "field has {} values, grid has {} points",
                values.len(),
                geometry.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite field value at grid point {i}")));
        }
        Ok(Self { geometry, values })
    }

    pub fn zeros(geometry: TorusGeometry) -> Self {
        Self::constant(geometry, 0.0)
    }

    pub fn constant(geometry: TorusGeometry, value: f64) -> Self {
        Self { geometry, values: vec![value; geometry.len()] }
    }

    /// Samples `f` at every grid point; `f` receives `(x1, y1, ..., xn, yn)`.
    pub fn from_fn<F>(geometry: TorusGeometry, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let values = (0..geometry.len())
            .into_par_iter()
            .map(|i| f(&geometry.coords(i)))
            .collect();
        Self::new(geometry, values)
    }

    /// `sum_terms amplitude * cos(2 pi k.x + phase)`.
    pub fn from_trig(geometry: TorusGeometry, terms: &[TrigTerm]) -> Result<Self> {
        let d = geometry.real_dims();
        for t in terms {
            if t.freq.len() != d {
                return Err(Error::Config(format!(
                    "trig term frequency has {} components, expected {d}",
                    t.freq.len()
                )));
            }
            if t.freq.iter().any(|k| k.unsigned_abs() as usize >= geometry.grid() / 2) {
                return Err(Error::Config(format!(
                    "trig frequency {:?} is not below the Nyquist limit {}",
                    t.freq,
                    geometry.grid() / 2
                )));
            }
        }
        Self::from_fn(geometry, |x| {
            terms
                .iter()
                .map(|t| {
                    let dot: f64 = t.freq.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum();
                    t.amplitude * (2.0 * std::f64::consts::PI * dot + t.phase).cos()
                })
                .sum()
        })
    }

    pub(crate) fn from_raw(geometry: TorusGeometry, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), geometry.len());
        Self { geometry, values }
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Grid average, i.e. the integral over the unit-volume torus.
    pub fn mean(&self) -> f64 {
        det_sum(self.values.len(), |i| self.values[i]) / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// `max - min`.
    pub fn oscillation(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn map<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> Self {
        Self { geometry: self.geometry, values: self.values.par_iter().map(|&v| f(v)).collect() }
    }

    pub fn add_constant(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// `s * self + t * other`.
    pub fn combine(&self, s: f64, other: &Self, t: f64) -> Result<Self> {
        self.geometry.check_same(&other.geometry)?;
        Ok(Self {
            geometry: self.geometry,
            values: self
                .values
                .par_iter()
                .zip(&other.values)
                .map(|(a, b)| s * a + t * b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(1.0, other, 1.0)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.geometry.check_same(&other.geometry)?;
        Ok(Self {
            geometry: self.geometry,
            values: self.values.par_iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    /// Copy with the grid mean removed.
    pub fn mean_zero(&self) -> Self {
        self.add_constant(-self.mean())
    }
}

/// One term `amplitude * cos(2 pi freq.x + phase)` of a trigonometric potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    /// Integer frequencies along `(x1, y1, ..., xn, yn)`.
    pub freq: Vec<i64>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Hermitian-matrix-valued data on the grid, packed `n^2` reals per point:
/// the `n` diagonal entries, then `(re, im)` of each entry above the diagonal.
///
/// This carries no closedness guarantee; see [`FormField`] for (1,1)-forms.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianField {
    geometry: TorusGeometry,
    data: Vec<f64>,
}

/// Position of the upper entry `(i, j)`, `i < j`, within the packed block.
#[inline]
pub(crate) fn packed_offdiag(n: usize, i: usize, j: usize) -> usize {
    // entries above the diagonal enumerated row by row
    let before: usize = (0..i).map(|r| n - 1 - r).sum();
    n + 2 * (before + (j - i - 1))
}

impl HermitianField {
    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub(crate) fn packed(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn from_packed(geometry: TorusGeometry, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), geometry.len() * geometry.n() * geometry.n());
        Self { geometry, data }
    }

    /// The same matrix at every point.
    pub fn constant(geometry: TorusGeometry, m: &HermitianMatrix) -> Result<Self> {
        let n = geometry.n();
        if m.dim() != n {
            return Err(Error::Usage(format!("matrix is {0}x{0}, torus has n = {n}", m.dim())));
        }
        let block = pack(m);
        let mut data = Vec::with_capacity(geometry.len() * n * n);
        for _ in 0..geometry.len() {
            data.extend_from_slice(&block);
        }
        Ok(Self { geometry, data })
    }

    /// Matrix at grid point `idx`.
    pub fn at(&self, idx: usize) -> HermitianMatrix {
        let n = self.geometry.n();
        unpack(n, &self.data[idx * n * n..(idx + 1) * n * n])
    }

    /// `s * self + t * other`.
    pub fn combine(&self, s: f64, other: &Self, t: f64) -> Result<Self> {
        self.geometry.check_same(&other.geometry)?;
        Ok(Self {
            geometry: self.geometry,
            data: self.data.par_iter().zip(&other.data).map(|(a, b)| s * a + t * b).collect(),
        })
    }

    /// Adds a constant matrix at every point.
    pub fn shift(&self, m: &HermitianMatrix) -> Result<Self> {
        let n = self.geometry.n();
        if m.dim() != n {
            return Err(Error::Usage("shift matrix has the wrong size".into()));
        }
        let block = pack(m);
        let mut data = self.data.clone();
        data.par_chunks_mut(n * n).for_each(|c| {
            for (x, b) in c.iter_mut().zip(&block) {
                *x += b;
            }
        });
        Ok(Self { geometry: self.geometry, data })
    }

    /// Largest absolute difference of any packed component.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.geometry.check_same(&other.geometry)?;
        Ok(self.data.iter().zip(&other.data).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs())))
    }

    /// Smallest eigenvalue over the grid and where it occurs.
    pub fn min_eigenvalue(&self) -> (f64, usize) {
        (0..self.geometry.len())
            .into_par_iter()
            .map(|i| (self.at(i).eigenvalues()[0], i))
            .reduce(|| (f64::INFINITY, usize::MAX), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
    }

    /// `P_ij = d_{z_i} phi * conj(d_{z_j} phi)`, the coefficient of `i dphi ^ dbar phi`.
    pub fn gradient_product(phi: &ScalarField) -> Self {
        let geom = *phi.geometry();
        let n = geom.n();
        let grads = complex_gradient(phi);
        let mut data = vec![0.0; geom.len() * n * n];
        data.par_chunks_mut(n * n).enumerate().for_each(|(p, c)| {
            for i in 0..n {
                c[i] = grads[i][p].norm_sqr();
                for j in (i + 1)..n {
                    let v = grads[i][p] * grads[j][p].conj();
                    let o = packed_offdiag(n, i, j);
                    c[o] = v.re;
                    c[o + 1] = v.im;
                }
            }
        });
        Self { geometry: geom, data }
    }
}

pub(crate) fn pack(m: &HermitianMatrix) -> SmallVec<[f64; 9]> {
    let n = m.dim();
    let mut out: SmallVec<[f64; 9]> = SmallVec::from_elem(0.0, n * n);
    for i in 0..n {
        out[i] = m.get(i, i).re;
        for j in (i + 1)..n {
            let o = packed_offdiag(n, i, j);
            out[o] = m.get(i, j).re;
            out[o + 1] = m.get(i, j).im;
        }
    }
    out
}

pub(crate) fn unpack_entries(n: usize, c: &[f64]) -> crate::hermitian_cone::Entries {
    let mut e: crate::hermitian_cone::Entries = SmallVec::from_elem(Complex64::new(0.0, 0.0), n * n);
    for i in 0..n {
        e[i * n + i] = Complex64::new(c[i], 0.0);
        for j in (i + 1)..n {
            let o = packed_offdiag(n, i, j);
            let v = Complex64::new(c[o], c[o + 1]);
            e[i * n + j] = v;
            e[j * n + i] = v.conj();
        }
    }
    e
}

pub(crate) fn unpack(n: usize, c: &[f64]) -> HermitianMatrix {
    HermitianMatrix::from_entries_unchecked(n, unpack_entries(n, c))
}

/// `(d phi / d z_j)` for each `j`, by spectral differentiation.
pub fn complex_gradient(phi: &ScalarField) -> Vec<Vec<Complex64>> {
    let geom = *phi.geometry();
    let mut hat = fft::to_complex(phi.values());
    fft::fft_nd(&geom, &mut hat, false);
    (0..geom.n())
        .map(|j| {
            let mut b = hat.clone();
            fft::apply_symbol(&geom, &mut b, |z| std::f64::consts::PI * z[j]);
            fft::fft_nd(&geom, &mut b, true);
            b
        })
        .collect()
}

/// `d^2 phi / (d z_i d zbar_j)` at every grid point.
///
/// Spectral symbol `-pi^2 zeta_i conj(zeta_j)`; Nyquist modes are dropped so
/// the result is Hermitian for any real input.
pub fn complex_hessian_field(phi: &ScalarField) -> HermitianField {
    let geom = *phi.geometry();
    let mut hat = fft::to_complex(phi.values());
    fft::fft_nd(&geom, &mut hat, false);
    hessian_from_spectrum(&geom, &hat)
}

pub(crate) fn hessian_from_spectrum(geom: &TorusGeometry, hat: &[Complex64]) -> HermitianField {
    let n = geom.n();
    let len = geom.len();
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let mut data = vec![0.0; len * n * n];

    // two real diagonal components per complex transform
    let mut i = 0;
    while i < n {
        let j = if i + 1 < n { Some(i + 1) } else { None };
        let mut b = hat.to_vec();
        fft::apply_symbol(geom, &mut b, |z| {
            let a = -pi2 * z[i].norm_sqr();
            let c = j.map_or(0.0, |j| -pi2 * z[j].norm_sqr());
            Complex64::new(a, c)
        });
        fft::fft_nd(geom, &mut b, true);
        data.par_chunks_mut(n * n).zip(b.par_iter()).for_each(|(c, v)| {
            c[i] = v.re;
            if let Some(j) = j {
                c[j] = v.im;
            }
        });
        i += 2;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut b = hat.to_vec();
            fft::apply_symbol(geom, &mut b, |z| -pi2 * z[i] * z[j].conj());
            fft::fft_nd(geom, &mut b, true);
            let o = packed_offdiag(n, i, j);
            data.par_chunks_mut(n * n).zip(b.par_iter()).for_each(|(c, v)| {
                c[o] = v.re;
                c[o + 1] = v.im;
            });
        }
    }
    HermitianField { geometry: *geom, data }
}

/// A closed (1,1)-form `base + i ddbar potential`.
///
/// The only way to build one is from a constant matrix and a potential, so
/// closedness holds by construction; linear combinations stay closed.
#[derive(Debug, Clone, PartialEq)]
pub struct FormField {
    base: HermitianMatrix,
    potential: ScalarField,
    values: HermitianField,
}

impl FormField {
    pub fn new(base: HermitianMatrix, potential: ScalarField) -> Result<Self> {
        let n = potential.geometry().n();
        if base.dim() != n {
            return Err(Error::Usage(format!(
                "base matrix is {0}x{0}, torus has n = {n}",
                base.dim()
            )));
        }
        let values = complex_hessian_field(&potential).shift(&base)?;
        Ok(Self { base, potential, values })
    }

    /// Constant-coefficient form.
    pub fn constant(geometry: TorusGeometry, base: HermitianMatrix) -> Result<Self> {
        Self::new(base, ScalarField::zeros(geometry))
    }

    pub fn geometry(&self) -> &TorusGeometry {
        self.potential.geometry()
    }

    pub fn base(&self) -> &HermitianMatrix {
        &self.base
    }

    pub fn potential(&self) -> &ScalarField {
        &self.potential
    }

    pub fn field(&self) -> &HermitianField {
        &self.values
    }

    pub fn at(&self, idx: usize) -> HermitianMatrix {
        self.values.at(idx)
    }

    /// `s * self + t * other`, combining bases and potentials.
    pub fn combine(&self, s: f64, other: &Self, t: f64) -> Result<Self> {
        Ok(Self {
            base: self.base.combine(s, &other.base, t)?,
            potential: self.potential.combine(s, &other.potential, t)?,
            values: self.values.combine(s, &other.values, t)?,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            base: self.base.scale(s),
            potential: self.potential.scale(s),
            values: HermitianField {
                geometry: self.values.geometry,
                data: self.values.data.par_iter().map(|v| v * s).collect(),
            },
        }
    }

    /// Adds `i ddbar phi` to the form.
    pub fn add_potential(&self, phi: &ScalarField) -> Result<Self> {
        Self::new(self.base.clone(), self.potential.add(phi)?)
    }

    /// Smallest eigenvalue over the grid and its location.
    pub fn positivity_margin(&self) -> (f64, usize) {
        self.values.min_eigenvalue()
    }
}

/// `d^2 phi / (d z_i d zbar_j)` as a form with zero base.
pub fn complex_hessian(phi: &ScalarField) -> Result<FormField> {
    let n = phi.geometry().n();
    FormField::new(HermitianMatrix::zeros(n), phi.clone())
}

/// `omega_phi = base + i ddbar phi` together with its positivity margin
/// (smallest eigenvalue over the grid).
pub fn kahler_form(base: &HermitianMatrix, phi: &ScalarField) -> Result<(FormField, f64)> {
    if !base.is_positive() {
        return Err(Error::Domain("base matrix is not positive definite".into()));
    }
    let form = FormField::new(base.clone(), phi.clone())?;
    let (margin, point) = form.positivity_margin();
    if !(margin > 0.0) {
        return Err(Error::NotKahler { point, margin });
    }
    Ok((form, margin))
}

/// `int s * (a_1^{k_1} ^ ... ^ a_m^{k_m})` with `sum k_i = n`, using the
/// density convention of this module.
pub fn integrate(s: &ScalarField, wedge: &[(&HermitianField, usize)]) -> Result<f64> {
    let geom = *s.geometry();
    let n = geom.n();
    let total: usize = wedge.iter().map(|w| w.1).sum();
    if total != n {
        return Err(Error::Usage(format!("wedge has total degree {total}, expected {n}")));
    }
    for (f, _) in wedge {
        geom.check_same(f.geometry())?;
    }
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let nn = n * n;
    let sum = det_sum(geom.len(), |p| {
        let mats: SmallVec<[crate::hermitian_cone::Entries; 3]> = wedge
            .iter()
            .filter(|w| w.1 > 0)
            .map(|(f, _)| unpack_entries(n, &f.packed()[p * nn..(p + 1) * nn]))
            .collect();
        let mut refs: SmallVec<[&[Complex64]; 3]> = SmallVec::new();
        for ((_, k), m) in wedge.iter().filter(|w| w.1 > 0).zip(&mats) {
            for _ in 0..*k {
                refs.push(m.as_slice());
            }
        }
        s.values()[p] * crate::hermitian_cone::mixed_discriminant_raw(n, &refs)
    });
    Ok(fact * sum * geom.cell_volume())
}

/// `int s dV`.
pub fn integrate_plain(s: &ScalarField) -> f64 {
    s.mean()
}

/// Relative spectrum of `omega` against `chi` at one grid point.
pub fn spectrum_at(
    chi: &HermitianField,
    omega: &HermitianField,
    idx: usize,
) -> Result<crate::hermitian_cone::SpectrumRel> {
    relative_spectrum(&chi.at(idx), &omega.at(idx))
}

#[cfg(test)]
mod tests;
