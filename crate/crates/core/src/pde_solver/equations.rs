//! Pointwise residuals and linearization coefficients for both equations.
//!
//! Every evaluation reduces to the relative spectrum `lambda` of `omega_phi`
//! against `chi` at each grid point. A residual `R(lambda)` that is a symmetric
//! function of the spectrum has derivative `tr(B ddbar u)` with
//! `B = V diag(dR/dlambda) V^H`, where `V` holds the `chi`-orthonormal
//! eigenvectors. This is exact also when eigenvalues coincide.

use num_complex::Complex64;
use rayon::prelude::*;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::hermitian_cone::{
    check_theta0, dhym_f_floor, f_gradient_unchecked, f_value_unchecked, j_f_floor, relative_eigen_raw,
    ComplexMatrix, POSITIVITY_TOL,
};
use crate::torus_field::{
    complex_hessian_field, packed_offdiag, unpack, FormField, HermitianField, ScalarField, TorusGeometry,
};

/// Everything Newton needs from one residual evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub(crate) residual: Vec<f64>,
    /// Packed coefficient matrix `B` per point.
    pub(crate) coeffs: Vec<f64>,
    /// Density `w` with `int R w` independent of `phi`.
    pub(crate) weight: Vec<f64>,
    pub(crate) margin: f64,
    pub(crate) margin_point: usize,
    /// Largest `tr_chi omega_phi` over the grid.
    pub(crate) trace_max: f64,
}

impl Evaluation {
    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    /// Smallest cone margin over the grid.
    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn margin_point(&self) -> usize {
        self.margin_point
    }
}

mod sealed {
    pub trait Sealed {}
}

/// A fully nonlinear equation `R(phi) = 0` on the torus, solvable by
/// [`newton_solve`](super::newton_solve).
pub trait Equation: sealed::Sealed + Sync {
    fn geometry(&self) -> &TorusGeometry;

    /// Residual and linearization data at `phi`. Fails with `NotKahler` when
    /// `omega_phi` is not positive somewhere.
    fn evaluate(&self, phi: &ScalarField) -> Result<Evaluation>;

    /// `det omega_0` per grid point, the gauge weight.
    fn gauge_density(&self) -> &[f64];
}

struct PointData {
    residual: f64,
    coeffs: SmallVec<[f64; 9]>,
    weight: f64,
    margin: f64,
    trace: f64,
}

/// `V diag(d) V^H`, packed.
fn packed_outer(n: usize, v: &ComplexMatrix, d: &[f64]) -> SmallVec<[f64; 9]> {
    let mut out: SmallVec<[f64; 9]> = SmallVec::from_elem(0.0, n * n);
    for i in 0..n {
        out[i] = (0..n).map(|k| d[k] * v[(i, k)].norm_sqr()).sum();
        for j in (i + 1)..n {
            let z: Complex64 = (0..n).map(|k| v[(i, k)] * v[(j, k)].conj() * d[k]).sum();
            let o = packed_offdiag(n, i, j);
            out[o] = z.re;
            out[o + 1] = z.im;
        }
    }
    out
}

/// `tr(B U)` for packed Hermitian `B`, `U`.
#[inline]
pub(crate) fn contract(n: usize, b: &[f64], u: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        s += b[i] * u[i];
    }
    for k in n..n * n {
        s += 2.0 * b[k] * u[k];
    }
    s
}

fn det_field(field: &HermitianField) -> Vec<f64> {
    (0..field.geometry().len()).into_par_iter().map(|p| field.at(p).det()).collect()
}

/// Runs `point` at every grid point and assembles an [`Evaluation`]. The
/// first (lowest-index) failure wins, so errors are deterministic.
fn evaluate_pointwise<F>(chi: &HermitianField, omega: &HermitianField, point: F) -> Result<Evaluation>
where
    F: Fn(usize, &[f64], &ComplexMatrix, f64) -> PointData + Sync,
{
    let geom = *chi.geometry();
    let n = geom.n();
    let nn = n * n;
    let results: Vec<Result<PointData>> = (0..geom.len())
        .into_par_iter()
        .map(|p| {
            let c = unpack(n, &chi.packed()[p * nn..(p + 1) * nn]);
            let g = unpack(n, &omega.packed()[p * nn..(p + 1) * nn]);
            let (lambda, v) = relative_eigen_raw(&c, &g, true)?;
            let top = lambda[n - 1].abs().max(1.0);
            if !(lambda[0] > POSITIVITY_TOL * top) {
                return Err(Error::NotKahler { point: p, margin: lambda[0] });
            }
            Ok(point(p, &lambda, &v, c.det()))
        })
        .collect();

    let mut eval = Evaluation {
        residual: Vec::with_capacity(geom.len()),
        coeffs: Vec::with_capacity(geom.len() * nn),
        weight: Vec::with_capacity(geom.len()),
        margin: f64::INFINITY,
        margin_point: 0,
        trace_max: 0.0,
    };
    for (p, r) in results.into_iter().enumerate() {
        let d = r?;
        eval.residual.push(d.residual);
        eval.coeffs.extend_from_slice(&d.coeffs);
        eval.weight.push(d.weight);
        if d.margin < eval.margin {
            eval.margin = d.margin;
            eval.margin_point = p;
        }
        eval.trace_max = eval.trace_max.max(d.trace);
    }
    Ok(eval)
}

fn omega_phi(omega0: &FormField, phi: &ScalarField) -> Result<HermitianField> {
    omega0.geometry().check_same(phi.geometry())?;
    let h = complex_hessian_field(phi);
    omega0.field().combine(1.0, &h, 1.0)
}

/// `tr_{omega_phi} chi + f chi^n / omega_phi^n = c`.
#[derive(Debug, Clone)]
pub struct JEquation {
    chi: FormField,
    omega0: FormField,
    f: ScalarField,
    c: f64,
    gauge: Vec<f64>,
}

impl JEquation {
    /// Checks that `chi` and `omega0` are Kähler and that `f` stays above
    /// `-(1/2n)(1/c)^{n-1}`.
    pub fn new(chi: FormField, omega0: FormField, f: ScalarField, c: f64) -> Result<Self> {
        let geom = *chi.geometry();
        geom.check_same(omega0.geometry())?;
        geom.check_same(f.geometry())?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("c must be positive, got {c}")));
        }
        check_kahler(&chi, "chi")?;
        check_kahler(&omega0, "omega0")?;
        let floor = j_f_floor(geom.n(), c);
        if let Some((p, v)) = f.values().iter().enumerate().find(|(_, &v)| !(v > floor)) {
            return Err(Error::Domain(format!("f = {v} at point {p} is not above {floor}")));
        }
        let gauge = det_field(omega0.field());
        Ok(Self { chi, omega0, f, c, gauge })
    }

    pub fn chi(&self) -> &FormField {
        &self.chi
    }

    pub fn omega0(&self) -> &FormField {
        &self.omega0
    }

    pub fn f(&self) -> &ScalarField {
        &self.f
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

fn check_kahler(form: &FormField, name: &str) -> Result<()> {
    let (margin, point) = form.positivity_margin();
    if !(margin > 0.0) {
        return Err(Error::Domain(format!(
            "{name} is not positive at point {point} (smallest eigenvalue {margin:e})"
        )));
    }
    Ok(())
}

impl sealed::Sealed for JEquation {}

impl Equation for JEquation {
    fn geometry(&self) -> &TorusGeometry {
        self.chi.geometry()
    }

    fn evaluate(&self, phi: &ScalarField) -> Result<Evaluation> {
        let g = omega_phi(&self.omega0, phi)?;
        let n = phi.geometry().n();
        let c = self.c;
        let f = self.f.values();
        evaluate_pointwise(self.chi.field(), &g, |p, lambda, v, det_chi| {
            let inv: SmallVec<[f64; 6]> = lambda.iter().map(|l| 1.0 / l).collect();
            let ratio: f64 = inv.iter().product();
            let sum: f64 = inv.iter().sum();
            let d: SmallVec<[f64; 6]> = inv.iter().map(|&r| -r * r - f[p] * ratio * r).collect();
            // leave out the largest eigenvalue's reciprocal, which is inv[n-1]
            let p_level = if n == 1 { 0.0 } else { sum - inv[n - 1] };
            PointData {
                residual: sum + f[p] * ratio - c,
                coeffs: packed_outer(n, v, &d),
                weight: det_chi / ratio,
                margin: c - p_level,
                trace: lambda.iter().sum(),
            }
        })
    }

    fn gauge_density(&self) -> &[f64] {
        &self.gauge
    }
}

/// `sin(theta0 - sum arctan(1/lambda_i)) = f cos(theta0) / prod sqrt(lambda_i^2 + 1)`.
#[derive(Debug, Clone)]
pub struct DhymEquation {
    chi: FormField,
    omega0: FormField,
    f: ScalarField,
    theta0: f64,
    gauge: Vec<f64>,
}

impl DhymEquation {
    /// Checks `theta0 in (0, pi/4)`, Kähler `chi`/`omega0`, and `f > -1/(100n)`.
    pub fn new(chi: FormField, omega0: FormField, f: ScalarField, theta0: f64) -> Result<Self> {
        let geom = *chi.geometry();
        geom.check_same(omega0.geometry())?;
        geom.check_same(f.geometry())?;
        check_theta0(theta0)?;
        check_kahler(&chi, "chi")?;
        check_kahler(&omega0, "omega0")?;
        let floor = dhym_f_floor(geom.n());
        if let Some((p, v)) = f.values().iter().enumerate().find(|(_, &v)| !(v > floor)) {
            return Err(Error::Domain(format!("f = {v} at point {p} is not above {floor}")));
        }
        let gauge = det_field(omega0.field());
        Ok(Self { chi, omega0, f, theta0, gauge })
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn chi(&self) -> &FormField {
        &self.chi
    }

    pub fn omega0(&self) -> &FormField {
        &self.omega0
    }

    pub fn f(&self) -> &ScalarField {
        &self.f
    }
}

impl sealed::Sealed for DhymEquation {}

impl Equation for DhymEquation {
    fn geometry(&self) -> &TorusGeometry {
        self.chi.geometry()
    }

    fn evaluate(&self, phi: &ScalarField) -> Result<Evaluation> {
        let g = omega_phi(&self.omega0, phi)?;
        let n = phi.geometry().n();
        let theta0 = self.theta0;
        let f = self.f.values();
        evaluate_pointwise(self.chi.field(), &g, |p, lambda, v, det_chi| {
            let d = f_gradient_unchecked(f[p], lambda, theta0);
            // Gamma: the n-1 largest angles, those of the n-1 smallest
            // eigenvalues, sum below theta0
            let angles: f64 = lambda[..n - 1].iter().map(|l| (1.0 / l).atan()).sum();
            let modulus: f64 = lambda.iter().map(|l| (l * l + 1.0).sqrt()).product();
            PointData {
                residual: f_value_unchecked(f[p], lambda, theta0),
                coeffs: packed_outer(n, v, &d),
                weight: det_chi * modulus,
                margin: theta0 - angles,
                trace: lambda.iter().sum(),
            }
        })
    }

    fn gauge_density(&self) -> &[f64] {
        &self.gauge
    }
}

/// `tr(B ddbar u)` pointwise for an evaluation's coefficients.
pub(crate) fn apply_coefficients(eval: &Evaluation, u: &ScalarField) -> Vec<f64> {
    let n = u.geometry().n();
    let nn = n * n;
    let h = complex_hessian_field(u);
    h.packed()
        .par_chunks(nn)
        .zip(eval.coeffs.par_chunks(nn))
        .map(|(hu, b)| contract(n, b, hu))
        .collect()
}

/// Pointwise `tr_{omega_phi} chi + f chi^n/omega_phi^n - c`.
pub fn j_residual(
    chi: &FormField,
    omega0: &FormField,
    phi: &ScalarField,
    f: &ScalarField,
    c: f64,
) -> Result<ScalarField> {
    let eq = JEquation::new(chi.clone(), omega0.clone(), f.clone(), c)?;
    let eval = eq.evaluate(phi)?;
    ScalarField::new(*phi.geometry(), eval.residual)
}

/// Directional derivative of [`j_residual`] at `phi` along `u`.
///
/// Fails with `EllipticityLost` unless `omega_phi` lies strictly inside the
/// J-cone `{sum over any n-1 eigenvalues of 1/lambda < c}`.
pub fn j_linearization_apply(
    chi: &FormField,
    omega0: &FormField,
    phi: &ScalarField,
    f: &ScalarField,
    c: f64,
    u: &ScalarField,
) -> Result<ScalarField> {
    let eq = JEquation::new(chi.clone(), omega0.clone(), f.clone(), c)?;
    linearization(&eq, phi, u)
}

/// Pointwise `F(f, lambda)` of `omega_phi` relative to `chi`.
pub fn dhym_residual(
    chi: &FormField,
    omega0: &FormField,
    phi: &ScalarField,
    f: &ScalarField,
    theta0: f64,
) -> Result<ScalarField> {
    let eq = DhymEquation::new(chi.clone(), omega0.clone(), f.clone(), theta0)?;
    let eval = eq.evaluate(phi)?;
    ScalarField::new(*phi.geometry(), eval.residual)
}

/// The same equation written through determinants:
/// `-(Im det(g + i chi) + f det chi - tan(theta0) Re det(g + i chi)) cos(theta0) / |det(g + i chi)|`,
/// where `g` is `omega_phi`. Agrees with [`dhym_residual`] identically.
pub fn dhym_residual_imre(
    chi: &FormField,
    omega0: &FormField,
    phi: &ScalarField,
    f: &ScalarField,
    theta0: f64,
) -> Result<ScalarField> {
    // validate through the same constructor
    let eq = DhymEquation::new(chi.clone(), omega0.clone(), f.clone(), theta0)?;
    let g = omega_phi(eq.omega0(), phi)?;
    let geom = *phi.geometry();
    let n = geom.n();
    let (s, co) = theta0.sin_cos();
    let values: Vec<Result<f64>> = (0..geom.len())
        .into_par_iter()
        .map(|p| {
            let gm = g.at(p);
            if !gm.is_positive() {
                return Err(Error::NotKahler { point: p, margin: gm.eigenvalues()[0] });
            }
            let cm = chi.at(p);
            let entries: Vec<Complex64> = gm
                .as_slice()
                .iter()
                .zip(cm.as_slice())
                .map(|(a, b)| a + Complex64::i() * b)
                .collect();
            let z = ComplexMatrix::from_rows(n, n, &entries)?.det()?;
            let e = z.im + f.values()[p] * cm.det() - s / co * z.re;
            Ok(-e * co / z.norm())
        })
        .collect();
    ScalarField::new(geom, values.into_iter().collect::<Result<Vec<_>>>()?)
}

/// Directional derivative of [`dhym_residual`] at `phi` along `u`. Requires
/// `omega_phi` strictly inside `Gamma`.
pub fn dhym_linearization_apply(
    chi: &FormField,
    omega0: &FormField,
    phi: &ScalarField,
    f: &ScalarField,
    theta0: f64,
    u: &ScalarField,
) -> Result<ScalarField> {
    let eq = DhymEquation::new(chi.clone(), omega0.clone(), f.clone(), theta0)?;
    linearization(&eq, phi, u)
}

fn linearization(eq: &dyn Equation, phi: &ScalarField, u: &ScalarField) -> Result<ScalarField> {
    phi.geometry().check_same(u.geometry())?;
    let eval = eq.evaluate(phi)?;
    if !(eval.margin > 0.0) {
        return Err(Error::EllipticityLost { point: eval.margin_point, margin: eval.margin });
    }
    ScalarField::new(*u.geometry(), apply_coefficients(&eval, u))
}
