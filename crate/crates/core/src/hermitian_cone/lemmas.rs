//! Randomized property suites for the matrix inequalities the solvers rely on.
//!
//! Each suite returns the worst observed slack; a negative slack beyond the
//! tolerance is a counterexample. Used by `kahlerlab verify-lemmas`.

use rand::Rng;
use serde::Serialize;

use super::sampling::{random_above_identity, random_complex, random_dhym_point, random_positive};
use super::{
    dhym_f_floor, f_gradient, f_hessian, f_value, p_level, p_level_arctan, q_level,
    relative_spectrum, schur_complement, ComplexMatrix, HermitianMatrix, SpectrumRel,
};
use crate::error::Result;

/// Splits a block matrix into `A` (leading `k x k`), `B` and `C`.
pub fn split_blocks(
    block: &HermitianMatrix,
    k: usize,
) -> Result<(HermitianMatrix, HermitianMatrix, ComplexMatrix)> {
    let n = block.dim();
    let lead: Vec<usize> = (0..k).collect();
    let tail: Vec<usize> = (k..n).collect();
    let a = block.principal_submatrix(&lead)?;
    let b = block.principal_submatrix(&tail)?;
    let mut c = ComplexMatrix::zeros(k, n - k);
    for i in 0..k {
        for j in 0..(n - k) {
            c[(i, j)] = block.get(i, k + j);
        }
    }
    Ok((a, b, c))
}

fn eigen_spectrum(m: &HermitianMatrix) -> Result<SpectrumRel> {
    relative_spectrum(&HermitianMatrix::identity(m.dim()), m)
}

/// `P(block) - P(A - C B^{-1} C^H) - tr(B^{-1})`, non-negative for positive blocks.
pub fn schur_trace_slack(block: &HermitianMatrix, k: usize) -> Result<f64> {
    let (a, b, c) = split_blocks(block, k)?;
    let s = schur_complement(&a, &b, &c)?;
    let lhs = p_level(&eigen_spectrum(&s)?) + b.inverse()?.trace();
    Ok(p_level(&eigen_spectrum(block)?) - lhs)
}

/// `P_arctan(block) - P_arctan(A - C B^{-1} C^H) - Q(B)`, non-negative for blocks above `I`.
pub fn schur_arctan_slack(block: &HermitianMatrix, k: usize) -> Result<f64> {
    let (a, b, c) = split_blocks(block, k)?;
    let s = schur_complement(&a, &b, &c)?;
    let lhs = p_level_arctan(&eigen_spectrum(&s)?) + q_level(&eigen_spectrum(&b)?);
    Ok(p_level_arctan(&eigen_spectrum(block)?) - lhs)
}

/// The `f` that puts `lambda` on the zero set of `F`.
pub fn f_on_zero_set(spec: &SpectrumRel, theta0: f64) -> f64 {
    let q = q_level(spec);
    let rho: f64 = spec.values().iter().map(|l| 1.0 / (l * l + 1.0).sqrt()).product();
    (theta0 - q).sin() / (theta0.cos() * rho)
}

/// `-cos(theta0) sum lambda_i xi_i^2 / (2 (lambda_i^2 + 1)^2) - xi^T D^2F xi`.
pub fn concavity_slack(f: f64, spec: &SpectrumRel, theta0: f64, xi: &[f64]) -> Result<f64> {
    let h = f_hessian(f, spec, theta0)?;
    let n = spec.dim();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += h[i * n + j] * xi[i] * xi[j];
        }
    }
    let bound: f64 = spec
        .values()
        .iter()
        .zip(xi)
        .map(|(l, x)| l * x * x / (2.0 * (l * l + 1.0).powi(2)))
        .sum::<f64>()
        * -theta0.cos();
    Ok(bound - quad)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SuiteSummary {
    pub name: String,
    pub trials: usize,
    /// Smallest slack seen; the property holds when this is above `-tolerance`.
    pub worst_slack: f64,
    pub violations: usize,
    pub tolerance: f64,
    /// Zero slack counts as a violation.
    pub strict: bool,
}

impl SuiteSummary {
    fn new(name: &str, tolerance: f64) -> Self {
        Self { name: name.into(), worst_slack: f64::INFINITY, tolerance, ..Default::default() }
    }

    fn strict(name: &str) -> Self {
        Self { strict: true, ..Self::new(name, 0.0) }
    }

    fn record(&mut self, slack: f64) {
        self.trials += 1;
        if slack < self.worst_slack || slack.is_nan() {
            self.worst_slack = slack;
        }
        let ok = if self.strict { slack > 0.0 } else { slack >= -self.tolerance };
        if !ok {
            self.violations += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Random positive blocks with sub-blocks of size 1..=5.
pub fn fuzz_schur_trace<R: Rng + ?Sized>(rng: &mut R, trials: usize) -> Result<SuiteSummary> {
    let mut s = SuiteSummary::new("schur_trace_subadditivity", 1e-10);
    for _ in 0..trials {
        let (k, m) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let block = random_block(rng, k, m, false);
        s.record(schur_trace_slack(&block, k)?);
    }
    Ok(s)
}

/// Random blocks above the identity with sub-blocks of size 1..=5.
pub fn fuzz_schur_arctan<R: Rng + ?Sized>(rng: &mut R, trials: usize) -> Result<SuiteSummary> {
    let mut s = SuiteSummary::new("schur_arctan_subadditivity", 1e-10);
    for _ in 0..trials {
        let (k, m) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let block = random_block(rng, k, m, true);
        s.record(schur_arctan_slack(&block, k)?);
    }
    Ok(s)
}

fn random_block<R: Rng + ?Sized>(rng: &mut R, k: usize, m: usize, above_identity: bool) -> HermitianMatrix {
    // Mix full random blocks with ones assembled from independent pieces, so
    // that both tightly and loosely coupled off-diagonal parts get exercised.
    if rng.gen_bool(0.5) {
        if above_identity {
            random_above_identity(rng, k + m)
        } else {
            random_positive(rng, k + m)
        }
    } else {
        let a = random_positive(rng, k);
        let b = random_positive(rng, m);
        let c = random_complex(rng, k, m);
        let coupled = HermitianMatrix::from_blocks(&a, &b, &c).expect("sizes match");
        // shift just enough to be positive (or above I), plus a random margin
        let lo = coupled.eigenvalues()[0];
        let base = if above_identity { 1.0 } else { 0.0 };
        let shift = base - lo + 10f64.powf(rng.gen_range(-3.0..0.5));
        coupled
            .add(&HermitianMatrix::identity(k + m).scale(shift))
            .expect("same size")
    }
}

/// Gradient, ordering, boundary and zero-set concavity properties of `F`.
#[derive(Debug, Clone, Serialize)]
pub struct FOperatorSummary {
    pub gradient_positive: SuiteSummary,
    pub gradient_ordering: SuiteSummary,
    pub zero_set_concavity: SuiteSummary,
    pub boundary_negative: SuiteSummary,
}

impl FOperatorSummary {
    pub fn passed(&self) -> bool {
        self.gradient_positive.passed()
            && self.gradient_ordering.passed()
            && self.zero_set_concavity.passed()
            && self.boundary_negative.passed()
    }
}

/// Random points of the dHYM region, `n` in 2..=5 and `f` in `(-1/(100n), 1]`.
pub fn fuzz_f_operator<R: Rng + ?Sized>(rng: &mut R, trials: usize) -> Result<FOperatorSummary> {
    let mut pos = SuiteSummary::strict("f_gradient_positive");
    let mut ord = SuiteSummary::new("f_gradient_ordering", 0.0);
    let mut conc = SuiteSummary::new("f_zero_set_concavity", 1e-8);
    let mut bnd = SuiteSummary::strict("f_boundary_negative");
    for _ in 0..trials {
        let n = rng.gen_range(2..=5);
        let theta0 = rng.gen_range(0.01..std::f64::consts::FRAC_PI_4 * 0.999);
        let floor = dhym_f_floor(n);
        let f = floor + (1.0 - floor) * rng.gen_range(1e-9..=1.0);
        let spec = random_dhym_point(rng, n, theta0);

        let g = f_gradient(f, &spec, theta0)?;
        // smallest component is positive
        pos.record(g.iter().copied().fold(f64::INFINITY, f64::min));
        // values ascend, so components must descend weakly
        let worst = g.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
        ord.record(worst + 1e-14 * g[0].abs());

        let fz = f_on_zero_set(&spec, theta0);
        if fz > floor && fz.is_finite() {
            let xi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            conc.record(concavity_slack(fz, &spec, theta0, &xi)?);
        }

        let edge = 1.0 / (theta0 / (n as f64 - 1.0)).tan();
        let boundary = SpectrumRel::new(&vec![edge; n])?;
        bnd.record(-f_value(f, &boundary, theta0)?);
    }
    Ok(FOperatorSummary {
        gradient_positive: pos,
        gradient_ordering: ord,
        zero_set_concavity: conc,
        boundary_negative: bnd,
    })
}
