//! Residuals, linearizations, a damped Newton corrector and continuity paths
//! for the J-equation and the dHYM equation on the flat torus.

mod equations;
mod krylov;
mod paths;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian_cone::ConeSpec;
use crate::torus_field::{det_sum, ScalarField};

pub use equations::{
    dhym_linearization_apply, dhym_residual, dhym_residual_imre, j_linearization_apply, j_residual,
    DhymEquation, Equation, Evaluation, JEquation,
};
pub use paths::{continuity_path_dhym, continuity_path_j};
pub(crate) use paths::dhym_constant;

/// Maximum number of step halvings in the Newton line search.
pub const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Sup-norm residual target.
    pub tolerance: f64,
    pub max_newton: usize,
    /// Initial step length of every Newton update, in `(0, 1]`.
    pub damping: f64,
    pub path_steps: usize,
    /// Optional cone description; only its slack is used by the solver, as
    /// the margin every accepted iterate must exceed.
    pub cone: Option<ConeSpec>,
    /// Floor for the relative tolerance of the inner linear solve.
    pub linear_tol: f64,
    pub linear_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_newton: 30,
            damping: 1.0,
            path_steps: 4,
            cone: None,
            linear_tol: 1e-12,
            linear_max_iter: 200,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance >= 1e-12 && self.tolerance.is_finite()) {
            return Err(Error::Config(format!("tolerance must be at least 1e-12, got {}", self.tolerance)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if self.path_steps == 0 {
            return Err(Error::Config("path_steps must be at least 1".into()));
        }
        if !(self.linear_tol > 0.0 && self.linear_tol < 1.0) {
            return Err(Error::Config(format!("linear_tol must lie in (0, 1), got {}", self.linear_tol)));
        }
        if self.linear_max_iter == 0 {
            return Err(Error::Config("linear_max_iter must be at least 1".into()));
        }
        Ok(())
    }

    fn cone_floor(&self) -> f64 {
        self.cone.as_ref().map_or(0.0, |c| c.slack().max(0.0))
    }
}

/// One accepted step of a continuity path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathStep {
    pub stage: u8,
    /// Path parameter of the stage.
    pub t: f64,
    pub newton_iterations: usize,
    pub residual: f64,
    pub cone_margin: f64,
    /// `int R w dV` with `w` the solvability density.
    pub solvability_integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub phi: ScalarField,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub cone_margin_min: f64,
    /// Largest `tr_chi omega_phi` over the grid at the final iterate.
    pub c2_diagnostic: f64,
    /// Oscillation of `phi`.
    pub c0_diagnostic: f64,
    /// Weighted mean of the residual removed before each linear solve.
    pub multiplier: f64,
    pub solvability_integral: f64,
    pub newton_iterations: usize,
    pub linear_iterations: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<PathStep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// A failed solve: the error plus the report up to the failure, when one exists.
#[derive(Debug)]
pub struct SolveFailure {
    pub error: Error,
    pub report: Option<Box<SolveReport>>,
}

impl SolveFailure {
    fn with_report(error: Error, mut report: SolveReport) -> Self {
        report.converged = false;
        report.failure = Some(error.to_string());
        Self { error, report: Some(Box::new(report)) }
    }
}

impl fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for SolveFailure {}

impl From<Error> for SolveFailure {
    fn from(error: Error) -> Self {
        Self { error, report: None }
    }
}

impl From<SolveFailure> for Error {
    fn from(f: SolveFailure) -> Self {
        f.error
    }
}

fn weighted_mean(values: &[f64], weight: &[f64]) -> f64 {
    let num = det_sum(values.len(), |i| values[i] * weight[i]);
    let den = det_sum(values.len(), |i| weight[i]);
    num / den
}

struct Merit {
    sup: f64,
    projected_sup: f64,
    projected_rms: f64,
    mu: f64,
    integral: f64,
}

fn merit(eval: &Evaluation, cell: f64) -> Merit {
    let r = &eval.residual;
    let mu = weighted_mean(r, &eval.weight);
    let len = r.len();
    Merit {
        sup: r.iter().fold(0.0_f64, |a, v| a.max(v.abs())),
        projected_sup: r.iter().fold(0.0_f64, |a, v| a.max((v - mu).abs())),
        projected_rms: (det_sum(len, |i| (r[i] - mu).powi(2)) / len as f64).sqrt(),
        mu,
        integral: det_sum(len, |i| r[i] * eval.weight[i]) * cell,
    }
}

fn cone_breach(message: String) -> Error {
    Error::ConeBreach(message)
}

/// Damped Newton iteration for `eq` from `phi0`.
///
/// Each step removes the solvability-weighted mean from the residual (its
/// size is reported as `multiplier`), solves the linearized equation with a
/// preconditioned Krylov method, fixes the constant by the `det omega_0`-
/// weighted mean, and halves the step until the iterate stays strictly inside
/// the cone and the projected residual decreases.
pub fn newton_solve(
    eq: &dyn Equation,
    phi0: &ScalarField,
    config: &SolverConfig,
) -> std::result::Result<SolveReport, SolveFailure> {
    config.validate()?;
    let geom = *eq.geometry();
    geom.check_same(phi0.geometry())?;
    let cell = geom.cell_volume();
    let floor = config.cone_floor();

    let mut phi = phi0.clone();
    let mut eval = match eq.evaluate(&phi) {
        Ok(e) => e,
        Err(Error::NotKahler { point, margin }) => {
            return Err(cone_breach(format!(
                "initial guess is not Kähler at point {point} (eigenvalue {margin:e})"
            ))
            .into())
        }
        Err(e) => return Err(e.into()),
    };
    if !(eval.margin > floor) {
        return Err(cone_breach(format!(
            "initial guess outside the cone at point {} (margin {:e})",
            eval.margin_point, eval.margin
        ))
        .into());
    }

    let mut report = SolveReport {
        phi: phi.clone(),
        converged: false,
        residual_history: Vec::new(),
        cone_margin_min: eval.margin,
        c2_diagnostic: eval.trace_max,
        c0_diagnostic: phi.oscillation(),
        multiplier: 0.0,
        solvability_integral: 0.0,
        newton_iterations: 0,
        linear_iterations: Vec::new(),
        path: Vec::new(),
        failure: None,
    };
    let mut m = merit(&eval, cell);

    for iteration in 0..=config.max_newton {
        report.residual_history.push(m.sup);
        report.multiplier = m.mu.abs();
        report.solvability_integral = m.integral;
        report.newton_iterations = iteration;
        report.c2_diagnostic = eval.trace_max;
        report.c0_diagnostic = phi.oscillation();

        if m.sup <= config.tolerance && m.mu.abs() <= 10.0 * config.tolerance {
            if !(eval.margin > config.tolerance.max(floor)) {
                let e = cone_breach(format!("solution margin {:e} is not above tolerance", eval.margin));
                report.phi = phi;
                return Err(SolveFailure::with_report(e, report));
            }
            report.phi = phi;
            report.converged = true;
            return Ok(report);
        }
        if m.projected_sup <= config.tolerance {
            let e = Error::NoConvergence(format!(
                "residual is constant {:e} over the grid; the data violate the solvability identity",
                m.mu
            ));
            report.phi = phi;
            return Err(SolveFailure::with_report(e, report));
        }
        if iteration == config.max_newton {
            break;
        }

        let b: Vec<f64> = eval.residual.iter().map(|r| m.mu - r).collect();
        let (update, linear_its) = {
            let op = krylov::SpectralOperator::new(geom, &eval);
            let rhs = op.rhs(&b);
            let forcing = m.sup.min(0.01).max(config.linear_tol);
            let out = krylov::bicgstab(&op, &rhs, forcing, config.linear_max_iter);
            (op.to_real(out.solution), out.iterations)
        };
        report.linear_iterations.push(linear_its);
        if update.iter().any(|v| !v.is_finite()) {
            let e = Error::NoConvergence("linear solve produced non-finite values".into());
            report.phi = phi;
            return Err(SolveFailure::with_report(e, report));
        }
        let gauge = eq.gauge_density();
        let shift = weighted_mean(&update, gauge);
        let update = ScalarField::new(geom, update.into_iter().map(|v| v - shift).collect())?;

        let mut step = config.damping;
        let mut accepted = None;
        let mut inside = false;
        for _ in 0..=MAX_HALVINGS {
            let trial = phi.combine(1.0, &update, step)?;
            match eq.evaluate(&trial) {
                Ok(e) if e.margin > floor => {
                    inside = true;
                    let tm = merit(&e, cell);
                    if tm.projected_rms <= (1.0 - 1e-4 * step) * m.projected_rms
                        || tm.projected_sup <= config.tolerance
                    {
                        accepted = Some((trial, e, tm));
                        break;
                    }
                }
                Ok(_) | Err(Error::NotKahler { .. }) => {}
                Err(e) => return Err(e.into()),
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, e, tm)) => {
                phi = trial;
                report.cone_margin_min = report.cone_margin_min.min(e.margin);
                eval = e;
                m = tm;
            }
            None => {
                let e = if inside {
                    Error::NoConvergence(format!(
                        "line search stalled after {MAX_HALVINGS} halvings at iteration {iteration}"
                    ))
                } else {
                    cone_breach(format!(
                        "every step left the cone after {MAX_HALVINGS} halvings at iteration {iteration}"
                    ))
                };
                report.phi = phi;
                return Err(SolveFailure::with_report(e, report));
            }
        }
    }
    let e = Error::NoConvergence(format!(
        "residual {:e} above tolerance after {} Newton iterations",
        m.sup, config.max_newton
    ));
    report.phi = phi;
    Err(SolveFailure::with_report(e, report))
}

#[cfg(test)]
mod tests;
