//! Energy functionals on potentials: `c0`, `J_chi`, Aubin's `I` and `J_omega0`.
//!
//! Wedge products are integrated with the density convention of
//! [`torus_field`](crate::torus_field): `int a^k ^ b^{n-k} / n!` is the grid sum
//! of the mixed discriminant `D(a, .., b, ..)`.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermitian_cone::mixed_discriminant;
use crate::torus_field::{integrate, FormField, HermitianField, ScalarField};

/// Default number of Simpson panels for the `t`-integral of `J_omega0`.
pub const DEFAULT_T_STEPS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalReport {
    pub c0: f64,
    pub j_chi: f64,
    pub aubin_i: f64,
    pub j_omega0: f64,
    pub coercivity: CoercivityProbe,
}

/// Scatter of `(J_omega0, J_chi)` over sample potentials.
///
/// Both functionals are invariant under adding constants, so no
/// normalization of the samples is needed. This is a diagnostic: a finite
/// sample cannot establish coercivity.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CoercivityProbe {
    pub points: Vec<(f64, f64)>,
    /// Samples that could not be evaluated, by index.
    pub errors: Vec<(usize, String)>,
    /// Least-squares slope of `J_chi` against `J_omega0`, if defined.
    pub fitted_slope: Option<f64>,
}

impl CoercivityProbe {
    /// Writes the scatter as CSV with columns `j_omega0, j_chi`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(["j_omega0", "j_chi"]).map_err(|e| Error::Io(e.to_string()))?;
        for (a, b) in &self.points {
            w.write_record([format!("{a:e}"), format!("{b:e}")]).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn check_positive(form: &FormField, name: &str) -> Result<()> {
    let (margin, point) = form.positivity_margin();
    if !(margin > 0.0) {
        return Err(Error::Domain(format!(
            "{name} is not Kähler at point {point} (smallest eigenvalue {margin:e})"
        )));
    }
    Ok(())
}

fn kahler_potential(omega0: &FormField, phi: &ScalarField, name: &str) -> Result<FormField> {
    let form = omega0.add_potential(phi)?;
    check_positive(&form, name)?;
    Ok(form)
}

/// `int s a_1^{k_1} ^ ... / n!`, skipping zero powers.
fn wedge(s: &ScalarField, parts: &[(&HermitianField, usize)]) -> Result<f64> {
    let n = s.geometry().n();
    let parts: Vec<(&HermitianField, usize)> = parts.iter().copied().filter(|p| p.1 > 0).collect();
    Ok(integrate(s, &parts)? / factorial(n))
}

/// `c0` with `int chi ^ omega0^{n-1}/(n-1)! = c0 int omega0^n/n!`, which
/// reduces to `tr(omega0^{-1} chi)` on the base matrices.
pub fn compute_c0(chi: &FormField, omega0: &FormField) -> Result<f64> {
    chi.geometry().check_same(omega0.geometry())?;
    check_positive(chi, "chi")?;
    check_positive(omega0, "omega0")?;
    let n = chi.geometry().n();
    let (a, b) = (chi.base(), omega0.base());
    let mut mixed: Vec<_> = vec![b; n];
    mixed[0] = a;
    let top = n as f64 * mixed_discriminant(&mixed)?;
    Ok(top / b.det())
}

/// `J_chi(phi) = (1/n!) int phi sum_{k<n} chi ^ omega0^k ^ omega_phi^{n-1-k}
///  - (c0/(n+1)!) int phi sum_{k<=n} omega0^k ^ omega_phi^{n-k}`.
pub fn j_chi_functional(chi: &FormField, omega0: &FormField, phi: &ScalarField, c0: f64) -> Result<f64> {
    chi.geometry().check_same(omega0.geometry())?;
    let w = kahler_potential(omega0, phi, "omega_phi")?;
    let n = phi.geometry().n();
    let (c, o, p) = (chi.field(), omega0.field(), w.field());
    let mut first = 0.0;
    for k in 0..n {
        first += wedge(phi, &[(c, 1), (o, k), (p, n - 1 - k)])?;
    }
    let mut second = 0.0;
    for k in 0..=n {
        second += wedge(phi, &[(o, k), (p, n - k)])?;
    }
    Ok(first - c0 * second / (n + 1) as f64)
}

/// `dJ_chi(phi)[u] = int u (chi ^ omega_phi^{n-1}/(n-1)! - c0 omega_phi^n/n!)`.
pub fn j_chi_differential(
    chi: &FormField,
    omega0: &FormField,
    phi: &ScalarField,
    u: &ScalarField,
    c0: f64,
) -> Result<f64> {
    let w = kahler_potential(omega0, phi, "omega_phi")?;
    let n = phi.geometry().n();
    let a = wedge(u, &[(chi.field(), 1), (w.field(), n - 1)])? * n as f64;
    let b = wedge(u, &[(w.field(), n)])?;
    Ok(a - c0 * b)
}

/// Aubin's `I(phi) = int phi (omega0^n - omega_phi^n)`.
pub fn aubin_i(omega0: &FormField, phi: &ScalarField) -> Result<f64> {
    let w = kahler_potential(omega0, phi, "omega_phi")?;
    let n = phi.geometry().n();
    let f = factorial(n);
    Ok(f * (wedge(phi, &[(omega0.field(), n)])? - wedge(phi, &[(w.field(), n)])?))
}

/// `I(phi)` through `i int dphi ^ dbar phi ^ sum_{k<n} omega0^k ^ omega_phi^{n-1-k}`.
pub fn aubin_i_gradient_form(omega0: &FormField, phi: &ScalarField) -> Result<f64> {
    let w = kahler_potential(omega0, phi, "omega_phi")?;
    let n = phi.geometry().n();
    let grad = HermitianField::gradient_product(phi);
    let one = ScalarField::constant(*phi.geometry(), 1.0);
    let mut sum = 0.0;
    for k in 0..n {
        sum += wedge(&one, &[(&grad, 1), (omega0.field(), k), (w.field(), n - 1 - k)])?;
    }
    Ok(factorial(n) * sum)
}

/// Composite Simpson over `[0, 1]` with `panels` (even) panels.
fn simpson<F>(panels: usize, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if panels < 2 || panels % 2 != 0 {
        return Err(Error::Usage(format!("Simpson needs an even number of panels, got {panels}")));
    }
    let h = 1.0 / panels as f64;
    let mut sum = 0.0;
    for i in 0..=panels {
        let w = if i == 0 || i == panels {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * f(i as f64 * h)?;
    }
    Ok(sum * h / 3.0)
}

fn path_form(omega0: &FormField, phi: &ScalarField, t: f64) -> Result<FormField> {
    let form = omega0.add_potential(&phi.scale(t))?;
    let (margin, point) = form.positivity_margin();
    if !(margin > 0.0) {
        return Err(Error::Domain(format!(
            "omega_(t phi) leaves the Kähler cone at t = {t} (point {point}, eigenvalue {margin:e})"
        )));
    }
    Ok(form)
}

/// `J_omega0(phi) = int_0^1 int phi (omega0 ^ omega_t^{n-1}/(n-1)! - n omega_t^n/n!) dt`
/// with `omega_t = omega0 + t i ddbar phi`.
pub fn j_omega0_functional(omega0: &FormField, phi: &ScalarField, t_steps: usize) -> Result<f64> {
    let n = phi.geometry().n();
    simpson(t_steps, |t| {
        let w = path_form(omega0, phi, t)?;
        let a = wedge(phi, &[(omega0.field(), 1), (w.field(), n - 1)])? * n as f64;
        let b = wedge(phi, &[(w.field(), n)])? * n as f64;
        Ok(a - b)
    })
}

/// `J_omega0(phi) = int_0^1 t (i int dphi ^ dbar phi ^ omega_t^{n-1}/(n-1)!) dt`.
pub fn j_omega0_gradient_form(omega0: &FormField, phi: &ScalarField, t_steps: usize) -> Result<f64> {
    let n = phi.geometry().n();
    let grad = HermitianField::gradient_product(phi);
    let one = ScalarField::constant(*phi.geometry(), 1.0);
    simpson(t_steps, |t| {
        let w = path_form(omega0, phi, t)?;
        Ok(t * n as f64 * wedge(&one, &[(&grad, 1), (w.field(), n - 1)])?)
    })
}

/// Evaluates `(J_omega0, J_chi)` on each sample; failures are collected.
pub fn coercivity_probe(chi: &FormField, omega0: &FormField, samples: &[ScalarField]) -> Result<CoercivityProbe> {
    let c0 = compute_c0(chi, omega0)?;
    let mut probe = CoercivityProbe::default();
    for (i, phi) in samples.iter().enumerate() {
        let pair = j_omega0_functional(omega0, phi, DEFAULT_T_STEPS)
            .and_then(|a| Ok((a, j_chi_functional(chi, omega0, phi, c0)?)));
        match pair {
            Ok(p) => probe.points.push(p),
            Err(e) => probe.errors.push((i, e.to_string())),
        }
    }
    probe.fitted_slope = least_squares_slope(&probe.points);
    Ok(probe)
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// All functionals at `phi`, plus the probe over `samples`.
pub fn functional_report(
    chi: &FormField,
    omega0: &FormField,
    phi: &ScalarField,
    samples: &[ScalarField],
    t_steps: usize,
) -> Result<FunctionalReport> {
    let c0 = compute_c0(chi, omega0)?;
    Ok(FunctionalReport {
        c0,
        j_chi: j_chi_functional(chi, omega0, phi, c0)?,
        aubin_i: aubin_i(omega0, phi)?,
        j_omega0: j_omega0_functional(omega0, phi, t_steps)?,
        coercivity: coercivity_probe(chi, omega0, samples)?,
    })
}
