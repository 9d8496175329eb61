//! Slope J-stability and dHYM angle-branch checks on intersection numbers.
//!
//! A subvariety `V` of dimension `p` enters only through the vector
//! `a_k = int_V chi^k ^ omega0^{p-k}`, `k = 0..=p`. The omega0-leading order
//! `a'_k = int_V omega0^k ^ chi^{p-k} = a_{p-k}` is used internally; the
//! conversion lives in [`IntersectionData::omega_leading`] and nowhere else.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian_cone::{mixed_discriminant, HermitianMatrix};

/// Default upper end of the sampled ray.
pub const DEFAULT_T_MAX: f64 = 1e4;
/// Default number of log-spaced samples on `[1, t_max]`.
pub const DEFAULT_SAMPLES: usize = 512;
/// Agreement required between `theta_M(1)` and `theta_hat`.
pub const ANGLE_TOL: f64 = 1e-9;

/// A root `t` of `z` counts as real when `|Im t| <= REAL_ROOT_TOL * max(1, |t|)`.
const REAL_ROOT_TOL: f64 = 1e-8;
const MAX_SUBDIVISIONS: u32 = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionData {
    pub p: usize,
    pub n: usize,
    /// `a[k] = int_V chi^k ^ omega0^{p-k}`.
    pub a: Vec<f64>,
    #[serde(default)]
    pub label: String,
}

impl IntersectionData {
    pub fn new(p: usize, n: usize, a: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let d = Self { p, n, a, label: label.into() };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.p > self.n {
            return Err(Error::Usage(format!(
                "{}: p must lie in 1..={}, got {}",
                self.label, self.n, self.p
            )));
        }
        if self.a.len() != self.p + 1 {
            return Err(Error::Data(format!(
                "{}: expected {} intersection numbers, got {}",
                self.label,
                self.p + 1,
                self.a.len()
            )));
        }
        if self.a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("{}: non-finite intersection number", self.label)));
        }
        Ok(())
    }

    /// Both classes Kähler on `V` force `a_0 > 0` and `a_p > 0`. A violation is
    /// reported, not rejected.
    pub fn positivity_warning(&self) -> Option<String> {
        let (a0, ap) = (self.a[0], self.a[self.p]);
        if a0 > 0.0 && ap > 0.0 {
            None
        } else {
            Some(format!(
                "{}: int_V omega0^p = {a0:e} and int_V chi^p = {ap:e} should both be positive",
                self.label
            ))
        }
    }

    /// `a'_k = int_V omega0^k ^ chi^{p-k}`.
    pub fn omega_leading(&self) -> Vec<f64> {
        self.a.iter().rev().copied().collect()
    }

    pub fn is_top(&self) -> bool {
        self.p == self.n
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { a: self.a.iter().map(|v| v * s).collect(), ..self.clone() }
    }
}

/// `(c - (n-p) eps) int_V omega0^p - p int_V chi ^ omega0^{p-1}`; the test
/// passes when this is nonnegative.
pub fn slope_test(data: &IntersectionData, c: f64, epsilon: f64) -> Result<f64> {
    data.validate()?;
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Usage(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let codim = (data.n - data.p) as f64;
    Ok((c - codim * epsilon) * data.a[0] - data.p as f64 * data.a[1])
}

/// Rounding band below zero still counted as a pass at `epsilon = 0`.
fn slope_band(data: &IntersectionData, c: f64) -> f64 {
    1e-12 * ((c * data.a[0]).abs() + data.p as f64 * data.a[1].abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EpsilonBound {
    /// `epsilon = None` when no dataset constrains it (all have `p = n`).
    Feasible { epsilon: Option<f64>, binding: Option<String> },
    /// A dataset fails already at `epsilon = 0`.
    Infeasible { label: String, margin: f64 },
}

impl EpsilonBound {
    pub fn epsilon(&self) -> Option<f64> {
        match self {
            EpsilonBound::Feasible { epsilon, .. } => Some(epsilon.unwrap_or(f64::INFINITY)),
            EpsilonBound::Infeasible { .. } => None,
        }
    }
}

/// Largest `epsilon` keeping every slope margin nonnegative.
pub fn max_uniform_epsilon(datasets: &[IntersectionData], c: f64) -> Result<EpsilonBound> {
    if datasets.is_empty() {
        return Err(Error::Usage("max_uniform_epsilon needs at least one dataset".into()));
    }
    let mut best: Option<(f64, &str)> = None;
    for d in datasets {
        let m0 = slope_test(d, c, 0.0)?;
        if m0 < -slope_band(d, c) {
            return Ok(EpsilonBound::Infeasible { label: d.label.clone(), margin: m0 });
        }
        if d.is_top() {
            continue;
        }
        let eps = (m0 / ((d.n - d.p) as f64 * d.a[0])).max(0.0);
        if best.is_none_or(|(b, _)| eps < b) {
            best = Some((eps, &d.label));
        }
    }
    Ok(EpsilonBound::Feasible { epsilon: best.map(|b| b.0), binding: best.map(|b| b.1.to_owned()) })
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Coefficients of `z(t) = int_V (chi + i t omega0)^p = sum_k binom(p,k) (it)^k a'_k`.
pub fn angle_polynomial(data: &IntersectionData) -> Vec<Complex64> {
    let ap = data.omega_leading();
    let i = Complex64::new(0.0, 1.0);
    (0..=data.p).map(|k| i.powu(k as u32) * binom(data.p, k) * ap[k]).collect()
}

fn horner(coeffs: &[Complex64], t: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * t + c)
}

/// All complex roots by Durand–Kerner, each polished by a few Newton steps.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let deg = match coeffs.iter().rposition(|c| c.norm() > 0.0) {
        Some(d) if d > 0 => d,
        _ => return Vec::new(),
    };
    let lead = coeffs[deg];
    let monic: Vec<Complex64> = coeffs[..=deg].iter().map(|c| c / lead).collect();
    // Cauchy bound
    let radius = 1.0 + monic[..deg].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..deg).map(|k| seed.powu(k as u32) * radius.min(2.0)).collect();
    for _ in 0..1000 {
        let mut moved = 0.0_f64;
        for k in 0..deg {
            let mut den = Complex64::new(1.0, 0.0);
            for (j, zj) in z.iter().enumerate() {
                if j != k {
                    den *= z[k] - zj;
                }
            }
            if den.norm() == 0.0 {
                den = Complex64::new(1e-300, 0.0);
            }
            let step = horner(&monic, z[k]) / den;
            z[k] -= step;
            moved = moved.max(step.norm() / (1.0 + z[k].norm()));
        }
        if moved < 1e-15 {
            break;
        }
    }
    let deriv: Vec<Complex64> = (1..=deg).map(|k| monic[k] * k as f64).collect();
    for r in &mut z {
        for _ in 0..3 {
            let d = horner(&deriv, *r);
            if d.norm() == 0.0 {
                break;
            }
            let step = horner(&monic, *r) / d;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            *r -= step;
        }
    }
    z
}

/// Real zeros of `z(t)` in `[lo, hi]`, ascending.
pub fn real_zeros(data: &IntersectionData, lo: f64, hi: f64) -> Vec<f64> {
    let mut out: Vec<f64> = polynomial_roots(&angle_polynomial(data))
        .into_iter()
        .filter(|r| r.im.abs() <= REAL_ROOT_TOL * r.norm().max(1.0))
        .map(|r| r.re)
        .filter(|&t| t >= lo && t <= hi)
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleBranch {
    /// Log-spaced, starting at 1 and ending at `t_max`.
    pub t_samples: Vec<f64>,
    pub theta: Vec<f64>,
    /// Every reported step moved the argument by less than `pi/2`.
    pub winding_consistent: bool,
    pub theta_at_1: f64,
    pub min: f64,
    pub max: f64,
    /// `|theta(t_max) - p pi/2|`.
    pub terminal_deviation: f64,
}

fn wrap(d: f64) -> f64 {
    let r = d.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Continues `theta` from `(t0, theta0)` to `t1`, subdividing while a step
/// would exceed the `pi/2` guard. Returns the new value and whether the
/// guard held.
fn track(coeffs: &[Complex64], t0: f64, theta0: f64, t1: f64, depth: u32) -> (f64, bool) {
    let arg1 = horner(coeffs, Complex64::new(t1, 0.0)).arg();
    let step = wrap(arg1 - theta0);
    if step.abs() < FRAC_PI_2 {
        return (theta0 + step, true);
    }
    if depth == MAX_SUBDIVISIONS {
        return (theta0 + step, false);
    }
    let mid = 0.5 * (t0 + t1);
    let (th_mid, ok1) = track(coeffs, t0, theta0, mid, depth + 1);
    let (th1, ok2) = track(coeffs, mid, th_mid, t1, depth + 1);
    (th1, ok1 && ok2)
}

/// Continuous branch of `theta_V(t) = arg z(t)`.
///
/// The branch is fixed by `theta_V(0) = arg int_V chi^p` (zero for positive
/// data), carried across `[0, 1]` on a uniform grid of `samples` steps and
/// then reported on `samples` log-spaced points of `[1, t_max]`. A real zero
/// of `z` in `[0, t_max]` makes the branch undefined.
pub fn angle_branch(data: &IntersectionData, t_max: f64, samples: usize) -> Result<AngleBranch> {
    data.validate()?;
    if !(t_max > 1.0 && t_max.is_finite()) {
        return Err(Error::Usage(format!("t_max must exceed 1, got {t_max}")));
    }
    if samples < 2 {
        return Err(Error::Usage("angle_branch needs at least 2 samples".into()));
    }
    let coeffs = angle_polynomial(data);
    let t_samples: Vec<f64> = (0..samples)
        .map(|j| match j {
            0 => 1.0,
            j if j == samples - 1 => t_max,
            j => t_max.powf(j as f64 / (samples - 1) as f64),
        })
        .collect();

    if let Some(&t0) = real_zeros(data, 0.0, t_max).first() {
        let (lo, hi) = if t0 <= 1.0 {
            let h = 1.0 / samples as f64;
            let j = (t0 / h).floor();
            (j * h, ((j + 1.0) * h).min(1.0))
        } else {
            let j = t_samples.partition_point(|&t| t < t0).clamp(1, samples - 1);
            (t_samples[j - 1], t_samples[j])
        };
        return Err(Error::BranchUndefined { lo, hi });
    }

    let mut consistent = true;
    let mut theta = horner(&coeffs, Complex64::new(0.0, 0.0)).arg();
    let mut t_prev = 0.0;
    for j in 1..=samples {
        let t = j as f64 / samples as f64;
        let (th, ok) = track(&coeffs, t_prev, theta, t, 0);
        theta = th;
        consistent &= ok;
        t_prev = t;
    }
    let mut values = Vec::with_capacity(samples);
    values.push(theta);
    for &t in &t_samples[1..] {
        let (th, ok) = track(&coeffs, t_prev, theta, t, 0);
        theta = th;
        consistent &= ok;
        t_prev = t;
        values.push(theta);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(AngleBranch {
        theta_at_1: values[0],
        terminal_deviation: (theta - data.p as f64 * FRAC_PI_2).abs(),
        t_samples,
        theta: values,
        winding_consistent: consistent,
        min,
        max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetVerdict {
    pub label: String,
    pub p: usize,
    pub branch_defined: bool,
    pub winding_consistent: bool,
    /// `theta_hat - (n-p) pi/2 + (n-p) epsilon`.
    pub lower: f64,
    /// `p pi/2`, excluded.
    pub upper: f64,
    pub theta_at_1: Option<f64>,
    pub theta_min: Option<f64>,
    pub theta_max: Option<f64>,
    pub in_interval: bool,
    /// First sample `(t, theta)` outside `[lower, upper)`.
    pub first_violation: Option<(f64, f64)>,
    pub terminal_deviation: Option<f64>,
    /// Leading-order tail `p a_1 / (a_0 t_max)` of the deviation.
    pub tail_estimate: f64,
    pub terminal_ok: bool,
    /// Only for `V = M`: `|theta_M(1) - theta_hat| <= ANGLE_TOL`.
    pub matches_theta_hat: Option<bool>,
    pub warning: Option<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    /// Always `"sampled check"`: the samples cover `[1, t_max]`, not the whole ray.
    pub kind: String,
    pub theta_hat: f64,
    pub epsilon: f64,
    pub t_max: f64,
    pub samples: usize,
    pub verdicts: Vec<DatasetVerdict>,
    pub passed: bool,
}

fn verdict(d: &IntersectionData, theta_hat: f64, epsilon: f64, t_max: f64, samples: usize) -> Result<DatasetVerdict> {
    let codim = (d.n - d.p) as f64;
    let lower = theta_hat - codim * FRAC_PI_2 + codim * epsilon;
    let upper = d.p as f64 * FRAC_PI_2;
    let tail_estimate = d.p as f64 * d.a[1].abs() / (d.a[0].abs() * t_max);
    let mut v = DatasetVerdict {
        label: d.label.clone(),
        p: d.p,
        branch_defined: false,
        winding_consistent: false,
        lower,
        upper,
        theta_at_1: None,
        theta_min: None,
        theta_max: None,
        in_interval: false,
        first_violation: None,
        terminal_deviation: None,
        tail_estimate,
        terminal_ok: false,
        matches_theta_hat: None,
        warning: d.positivity_warning(),
        passed: false,
    };
    let branch = match angle_branch(d, t_max, samples) {
        Ok(b) => b,
        Err(e @ Error::BranchUndefined { .. }) => {
            v.warning = Some(e.to_string());
            return Ok(v);
        }
        Err(e) => return Err(e),
    };
    let tol = 1e-12 * lower.abs().max(1.0);
    v.first_violation = branch
        .t_samples
        .iter()
        .zip(&branch.theta)
        .find(|(_, &th)| th < lower - tol || th >= upper)
        .map(|(&t, &th)| (t, th));
    v.branch_defined = true;
    v.winding_consistent = branch.winding_consistent;
    v.in_interval = v.first_violation.is_none();
    v.theta_at_1 = Some(branch.theta_at_1);
    v.theta_min = Some(branch.min);
    v.theta_max = Some(branch.max);
    v.terminal_deviation = Some(branch.terminal_deviation);
    v.terminal_ok = branch.terminal_deviation <= 2.0 * tail_estimate + 1e-12;
    if d.is_top() {
        v.matches_theta_hat = Some((branch.theta_at_1 - theta_hat).abs() <= ANGLE_TOL);
    }
    v.passed = v.winding_consistent && v.in_interval && v.terminal_ok && v.matches_theta_hat != Some(false);
    Ok(v)
}

/// Checks the angle-branch hypothesis of the dHYM existence theory on the
/// given datasets, one of which must be `V = M` (`p = n`).
pub fn dhym_hypothesis_check(
    datasets: &[IntersectionData],
    theta_hat: f64,
    epsilon: f64,
    t_max: f64,
    samples: usize,
) -> Result<HypothesisReport> {
    let top = datasets
        .iter()
        .find(|d| d.is_top())
        .ok_or_else(|| Error::Usage("dataset list must contain V = M (p = n)".into()))?;
    let n = top.n;
    if let Some(d) = datasets.iter().find(|d| d.n != n) {
        return Err(Error::Usage(format!("{}: ambient dimension {} differs from {n}", d.label, d.n)));
    }
    let lo = n as f64 * FRAC_PI_2 - 0.25 * PI;
    if !(theta_hat > lo && theta_hat < n as f64 * FRAC_PI_2) {
        return Err(Error::Domain(format!(
            "theta_hat must lie in ({lo}, {}), got {theta_hat}",
            n as f64 * FRAC_PI_2
        )));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Usage(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let verdicts = datasets
        .par_iter()
        .map(|d| verdict(d, theta_hat, epsilon, t_max, samples))
        .collect::<Result<Vec<_>>>()?;
    Ok(HypothesisReport {
        kind: "sampled check".into(),
        theta_hat,
        epsilon,
        t_max,
        samples,
        passed: verdicts.iter().all(|v| v.passed),
        verdicts,
    })
}

/// Intersection vectors of every coordinate subtorus for constant forms on a
/// unit-volume torus: `a_k = p! D(chi_S^k, omega0_S^{p-k})` on the principal
/// block `S`. The full index set is labelled `M`.
pub fn coordinate_subtori(chi: &HermitianMatrix, omega0: &HermitianMatrix) -> Result<Vec<IntersectionData>> {
    let n = chi.dim();
    if omega0.dim() != n {
        return Err(Error::Usage("chi and omega0 must have the same size".into()));
    }
    let mut out = Vec::with_capacity((1 << n) - 1);
    for mask in 1usize..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let p = idx.len();
        let cs = chi.principal_submatrix(&idx)?;
        let os = omega0.principal_submatrix(&idx)?;
        let fact: f64 = (1..=p).map(|k| k as f64).product();
        let a = (0..=p)
            .map(|k| {
                let mats: Vec<&HermitianMatrix> = (0..p).map(|j| if j < k { &cs } else { &os }).collect();
                Ok(fact * mixed_discriminant(&mats)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = if p == n {
            "M".to_owned()
        } else {
            let names: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
            format!("V{{{}}}", names.join(","))
        };
        out.push(IntersectionData::new(p, n, a, label)?);
    }
    Ok(out)
}
