//! Continuity paths from an explicit solution to the target equation.

use super::{newton_solve, Equation, PathStep, SolveFailure, SolveReport, SolverConfig};
use crate::error::{Error, Result};
use crate::hermitian_cone::{dhym_f_floor, relative_spectrum};
use crate::torus_field::{integrate, FormField, ScalarField};

type Outcome = std::result::Result<SolveReport, SolveFailure>;

/// Maximum number of times a path step is halved after a failed solve.
pub const MAX_REFINEMENTS: usize = 8;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `int a^k ^ b^{n-k} / n!` as a grid sum.
fn wedge_integral(a: &FormField, k: usize, b: &FormField) -> Result<f64> {
    let n = a.geometry().n();
    let one = ScalarField::constant(*a.geometry(), 1.0);
    Ok(integrate(&one, &[(a.field(), k), (b.field(), n - k)])? / factorial(n))
}

fn binom(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Marches `tau` from 0 to 1 in `steps` uniform steps, halving a step up to
/// [`MAX_REFINEMENTS`] times when its solve fails. Each solve starts from
/// the previous solution.
fn march(
    stage: u8,
    steps: usize,
    phi0: ScalarField,
    config: &SolverConfig,
    build: &dyn Fn(f64) -> Result<Box<dyn Equation>>,
    param: &dyn Fn(f64) -> f64,
    path: &mut Vec<PathStep>,
) -> Outcome {
    let mut phi = phi0;
    let mut tau = 0.0;
    let mut h = 1.0 / steps as f64;
    let mut refinements = 0;
    let mut last: Option<SolveReport> = None;
    while tau < 1.0 {
        let next = (tau + h).min(1.0);
        // snap to the endpoint to avoid a sliver step from rounding
        let next = if 1.0 - next < 1e-12 { 1.0 } else { next };
        let eq = build(next)?;
        match newton_solve(eq.as_ref(), &phi, config) {
            Ok(rep) => {
                path.push(PathStep {
                    stage,
                    t: param(next),
                    newton_iterations: rep.newton_iterations,
                    residual: rep.final_residual(),
                    cone_margin: rep.cone_margin_min,
                    solvability_integral: rep.solvability_integral,
                });
                phi = rep.phi.clone();
                tau = next;
                last = Some(rep);
            }
            Err(fail) => {
                if refinements == MAX_REFINEMENTS {
                    let msg = format!(
                        "stage {stage} failed at t = {} after {MAX_REFINEMENTS} refinements: {}",
                        param(next),
                        fail.error
                    );
                    let error = match fail.error {
                        Error::ConeBreach(_) => Error::ConeBreach(msg),
                        Error::EllipticityLost { point, margin } => Error::EllipticityLost { point, margin },
                        _ => Error::NoConvergence(msg),
                    };
                    let report = fail.report.map(|mut r| {
                        r.path = std::mem::take(path);
                        r.failure = Some(error.to_string());
                        r
                    });
                    return Err(SolveFailure { error, report });
                }
                refinements += 1;
                h *= 0.5;
            }
        }
    }
    Ok(last.expect("at least one step is taken"))
}

fn finish(mut report: SolveReport, path: Vec<PathStep>) -> SolveReport {
    report.cone_margin_min = path.iter().map(|s| s.cone_margin).fold(f64::INFINITY, f64::min);
    report.path = path;
    report
}

/// Solves `tr_{omega_phi} chi + f chi^n/omega_phi^n = c` by continuation.
///
/// Stage 1 deforms `chi_t = t chi + (1-t)(c/n) omega0` with the constant
/// `f_t` fixed by integrability, starting from the explicit solution `phi = 0`
/// at `t = 0`. Stage 2 moves `f` linearly from that constant to `f_target`.
pub fn continuity_path_j(
    chi: &FormField,
    omega0: &FormField,
    f_target: &ScalarField,
    c: f64,
    config: &SolverConfig,
) -> Outcome {
    config.validate()?;
    let geom = *chi.geometry();
    geom.check_same(omega0.geometry())?;
    geom.check_same(f_target.geometry())?;
    let n = geom.n();
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("c must be positive, got {c}")).into());
    }

    // c int omega0^n/n! - int chi ^ omega0^{n-1}/(n-1)!, which must equal int f chi^n/n!
    let volume = wedge_integral(omega0, 0, omega0)?;
    let mixed = |form: &FormField| -> Result<f64> {
        Ok(wedge_integral(form, 1, omega0)? * n as f64)
    };
    let rhs = c * volume - mixed(chi)?;
    let scale = (c * volume).abs().max(1.0);
    if rhs < -1e-12 * scale {
        return Err(Error::Precondition(format!(
            "integrability fails: c vol(omega0) - int chi ^ omega0^(n-1) = {rhs:e} < 0"
        ))
        .into());
    }
    let one = ScalarField::constant(geom, 1.0);
    let chi_volume = integrate(&one, &[(chi.field(), n)])? / factorial(n);
    let target = integrate(f_target, &[(chi.field(), n)])? / factorial(n);
    if (target - rhs).abs() > 1e-8 * scale {
        return Err(Error::Precondition(format!(
            "integrability fails: int f chi^n/n! = {target:e}, expected {rhs:e}"
        ))
        .into());
    }

    let scaled = omega0.scale(c / n as f64);
    let chi_t = |t: f64| chi.combine(t, &scaled, 1.0 - t);
    let f_const = |t: f64| -> Result<f64> {
        let ct = chi_t(t)?;
        let vol_t = integrate(&one, &[(ct.field(), n)])? / factorial(n);
        Ok((c * volume - mixed(&ct)?) / vol_t)
    };

    let mut path = Vec::new();
    let build1 = |t: f64| -> Result<Box<dyn Equation>> {
        let f = ScalarField::constant(geom, f_const(t)?.max(0.0));
        Ok(Box::new(super::JEquation::new(chi_t(t)?, omega0.clone(), f, c)?))
    };
    // t = 0: chi_0 = (c/n) omega0 and phi = 0 solve the equation exactly
    let start = newton_solve(build1(0.0)?.as_ref(), &ScalarField::zeros(geom), config)?;
    path.push(PathStep {
        stage: 1,
        t: 0.0,
        newton_iterations: start.newton_iterations,
        residual: start.final_residual(),
        cone_margin: start.cone_margin_min,
        solvability_integral: start.solvability_integral,
    });
    let stage1 = march(1, config.path_steps, start.phi, config, &build1, &|t| t, &mut path)?;

    let f1 = rhs / chi_volume;
    let build2 = |s: f64| -> Result<Box<dyn Equation>> {
        let f = ScalarField::constant(geom, f1).combine(1.0 - s, f_target, s)?;
        Ok(Box::new(super::JEquation::new(chi.clone(), omega0.clone(), f, c)?))
    };
    let stage2 = march(2, config.path_steps, stage1.phi, config, &build2, &|s| s, &mut path)?;
    Ok(finish(stage2, path))
}

/// `(tan(theta0) int Re(w + i chi)^n - int Im(w + i chi)^n) / int chi^n`,
/// the constant `f` compatible with `w`.
pub(crate) fn dhym_constant(chi: &FormField, omega: &FormField, theta0: f64) -> Result<f64> {
    let n = chi.geometry().n();
    let (mut re, mut im) = (0.0, 0.0);
    for k in 0..=n {
        // i^k chi^k omega^{n-k} with multiplicity binom(n, k)
        let term = binom(n, k) * wedge_integral(chi, k, omega)?;
        match k % 4 {
            0 => re += term,
            1 => im += term,
            2 => re -= term,
            _ => im -= term,
        }
    }
    let vol = wedge_integral(chi, n, omega)?;
    Ok((theta0.tan() * re - im) / vol)
}

/// Solves the dHYM equation for `omega0_target` and `f_target` in three
/// stages: from `cot(theta0/n) chi` to the enlarged `K omega0_target`, then
/// scaling `K omega0_target` down to `omega0_target` (both with constant
/// `f`), then moving `f` linearly to `f_target`.
pub fn continuity_path_dhym(
    chi: &FormField,
    omega0_target: &FormField,
    f_target: &ScalarField,
    theta0: f64,
    config: &SolverConfig,
) -> Outcome {
    config.validate()?;
    let geom = *chi.geometry();
    geom.check_same(omega0_target.geometry())?;
    geom.check_same(f_target.geometry())?;
    let n = geom.n();
    crate::hermitian_cone::check_theta0(theta0)?;

    // hypothesis on the target: omega0_target inside Gamma at every point
    let zeros = ScalarField::zeros(geom);
    let probe = super::DhymEquation::new(chi.clone(), omega0_target.clone(), zeros.clone(), theta0)?;
    let eval = probe.evaluate(&zeros)?;
    if !(eval.margin > 0.0) {
        return Err(Error::Precondition(format!(
            "omega0_target leaves Gamma at point {} (margin {:e})",
            eval.margin_point, eval.margin
        ))
        .into());
    }
    let mut lowest = f64::INFINITY;
    for p in 0..geom.len() {
        lowest = lowest.min(relative_spectrum(&chi.at(p), &omega0_target.at(p))?.min());
    }
    let cot = 1.0 / (theta0 / n as f64).tan();
    let k_scale = cot / lowest + 1.0;

    let f0 = dhym_constant(chi, omega0_target, theta0)?;
    let chi_volume = wedge_integral(chi, n, chi)?;
    let target = integrate(f_target, &[(chi.field(), n)])? / factorial(n);
    if (target - f0 * chi_volume).abs() > 1e-8 * chi_volume.abs().max(1.0) {
        return Err(Error::Precondition(format!(
            "f_target violates integrability: int f chi^n/n! = {target:e}, expected {:e}",
            f0 * chi_volume
        ))
        .into());
    }

    let floor = dhym_f_floor(n);
    let constant_eq = |omega: FormField, stage: u8, t: f64| -> Result<Box<dyn Equation>> {
        let f = dhym_constant(chi, &omega, theta0)?;
        if !(f > floor) {
            return Err(Error::Precondition(format!(
                "stage {stage}: integrability constant f = {f:e} at t = {t} is not above {floor}"
            )));
        }
        Ok(Box::new(super::DhymEquation::new(chi.clone(), omega, ScalarField::constant(geom, f), theta0)?))
    };

    let start_form = chi.scale(cot);
    let enlarged = omega0_target.scale(k_scale);
    let mut path = Vec::new();

    // stage 1: omega0 = t cot(theta0/n) chi + (1-t) K omega0_target, t from 1 to 0
    let build1 = |tau: f64| constant_eq(start_form.combine(1.0 - tau, &enlarged, tau)?, 1, 1.0 - tau);
    let start = newton_solve(build1(0.0)?.as_ref(), &zeros, config)?;
    path.push(PathStep {
        stage: 1,
        t: 1.0,
        newton_iterations: start.newton_iterations,
        residual: start.final_residual(),
        cone_margin: start.cone_margin_min,
        solvability_integral: start.solvability_integral,
    });
    let s1 = march(1, config.path_steps, start.phi, config, &build1, &|tau| 1.0 - tau, &mut path)?;

    // stage 2: omega0 = s omega0_target, s from K down to 1
    let s_of = |tau: f64| k_scale + (1.0 - k_scale) * tau;
    let build2 = |tau: f64| constant_eq(omega0_target.scale(s_of(tau)), 2, s_of(tau));
    let s2 = march(2, config.path_steps, s1.phi, config, &build2, &s_of, &mut path)?;

    // stage 3: f = t f_target + (1-t) f0
    let build3 = |t: f64| -> Result<Box<dyn Equation>> {
        let f = ScalarField::constant(geom, f0).combine(1.0 - t, f_target, t)?;
        Ok(Box::new(super::DhymEquation::new(chi.clone(), omega0_target.clone(), f, theta0)?))
    };
    let s3 = march(3, config.path_steps, s2.phi, config, &build3, &|t| t, &mut path)?;
    Ok(finish(s3, path))
}
