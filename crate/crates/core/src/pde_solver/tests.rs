use std::f64::consts::PI;

use super::*;
use crate::hermitian_cone::HermitianMatrix;
use crate::torus_field::{complex_hessian_field, FormField, ScalarField, TorusGeometry, TrigTerm};

fn geom(n: usize, big_n: usize) -> TorusGeometry {
    TorusGeometry::new(n, big_n).unwrap()
}

fn trig(g: TorusGeometry, terms: &[(&[i64], f64, f64)]) -> ScalarField {
    let terms: Vec<TrigTerm> = terms
        .iter()
        .map(|(f, a, p)| TrigTerm { freq: f.to_vec(), amplitude: *a, phase: *p })
        .collect();
    ScalarField::from_trig(g, &terms).unwrap()
}

fn form(base: HermitianMatrix, potential: ScalarField) -> FormField {
    FormField::new(base, potential).unwrap()
}

fn diag(d: &[f64]) -> HermitianMatrix {
    HermitianMatrix::diagonal(d)
}

/// A generic n = 2 setup with non-constant chi, omega0 and phi.
fn setup2(big_n: usize) -> (FormField, FormField, ScalarField) {
    let g = geom(2, big_n);
    let chi = form(
        HermitianMatrix::new(
            2,
            &[
                num_complex::Complex64::new(1.2, 0.0),
                num_complex::Complex64::new(0.1, 0.05),
                num_complex::Complex64::new(0.1, -0.05),
                num_complex::Complex64::new(0.9, 0.0),
            ],
        )
        .unwrap(),
        trig(g, &[(&[1, 0, 0, 1], 0.004, 0.3), (&[0, 1, 1, 0], 0.003, 1.0)]),
    );
    let omega0 = form(diag(&[1.0, 1.1]), trig(g, &[(&[1, 1, 0, 0], 0.003, 0.0)]));
    let phi = trig(g, &[(&[0, 0, 1, 0], 0.006, 0.2), (&[1, 0, 0, 1], 0.002, 0.7)]);
    (chi, omega0, phi)
}

fn sup_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values().iter().zip(b.values()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn j_residual_vanishes_for_scaled_reference() {
    let g = geom(2, 8);
    let c = 2.5;
    let omega0 = form(diag(&[1.0, 2.0]), trig(g, &[(&[1, 0, 0, 0], 0.01, 0.0)]));
    let chi = omega0.scale(c / 2.0);
    let f = ScalarField::zeros(g);
    let r = j_residual(&chi, &omega0, &ScalarField::zeros(g), &f, c).unwrap();
    assert!(r.sup_norm() < 1e-13, "{}", r.sup_norm());
}

#[test]
fn j_residual_one_dimensional_matches_division() {
    let g = geom(1, 32);
    let chi = form(diag(&[1.3]), trig(g, &[(&[1, 2], 0.01, 0.4)]));
    let omega0 = form(diag(&[0.8]), trig(g, &[(&[0, 1], 0.005, 0.0)]));
    let phi = trig(g, &[(&[2, 1], 0.004, 1.1)]);
    let f = trig(g, &[(&[1, 0], 0.2, 0.0)]).add_constant(0.1);
    let c = 1.7;
    let r = j_residual(&chi, &omega0, &phi, &f, c).unwrap();
    let h = complex_hessian_field(&phi);
    for p in 0..g.len() {
        let chi_p = chi.at(p).get(0, 0).re;
        let w = omega0.at(p).get(0, 0).re + h.at(p).get(0, 0).re;
        let expected = chi_p / w + f.values()[p] * chi_p / w - c;
        assert!((r.values()[p] - expected).abs() < 1e-13);
    }
}

fn manufactured_f(chi: &FormField, omega0: &FormField, phi: &ScalarField, c: f64) -> ScalarField {
    // f = (c - tr_g chi) det g / det chi
    let g = omega0.add_potential(phi).unwrap();
    let geom = *phi.geometry();
    let values = (0..geom.len())
        .map(|p| {
            let s = crate::hermitian_cone::relative_spectrum(&chi.at(p), &g.at(p)).unwrap();
            let tr: f64 = s.values().iter().map(|l| 1.0 / l).sum();
            (c - tr) * s.product()
        })
        .collect();
    ScalarField::new(geom, values).unwrap()
}

#[test]
fn j_residual_vanishes_on_manufactured_solution() {
    let (chi, omega0, phi) = setup2(16);
    let c = 3.0;
    let f = manufactured_f(&chi, &omega0, &phi, c);
    let r = j_residual(&chi, &omega0, &phi, &f, c).unwrap();
    assert!(r.sup_norm() < 1e-12, "{}", r.sup_norm());
}

#[test]
fn residuals_ignore_constants_in_phi() {
    let (chi, omega0, phi) = setup2(8);
    let f = ScalarField::constant(*phi.geometry(), 0.3);
    let a = j_residual(&chi, &omega0, &phi, &f, 3.0).unwrap();
    let b = j_residual(&chi, &omega0, &phi.add_constant(7.25), &f, 3.0).unwrap();
    // the constant only enters through rounding in the transform
    assert!(sup_diff(&a, &b) < 1e-12, "{}", sup_diff(&a, &b));
    let th = 0.5;
    let a = dhym_residual(&chi, &omega0.scale(4.0), &phi, &f, th).unwrap();
    let b = dhym_residual(&chi, &omega0.scale(4.0), &phi.add_constant(-3.0), &f, th).unwrap();
    assert!(sup_diff(&a, &b) < 1e-12, "{}", sup_diff(&a, &b));
}

#[test]
fn j_residual_rejects_bad_f_and_non_kahler() {
    let g = geom(1, 8);
    let chi = FormField::constant(g, diag(&[1.0])).unwrap();
    let omega0 = FormField::constant(g, diag(&[1.0])).unwrap();
    let phi = ScalarField::zeros(g);
    let bad_f = ScalarField::constant(g, -0.6);
    assert!(matches!(j_residual(&chi, &omega0, &phi, &bad_f, 2.0), Err(Error::Domain(_))));
    let f = ScalarField::zeros(g);
    let steep = trig(g, &[(&[1, 0], 0.2, 0.0)]);
    assert!(matches!(j_residual(&chi, &omega0, &steep, &f, 2.0), Err(Error::NotKahler { .. })));
}

/// Central difference of a residual map along `u`.
fn central_difference<F>(res: F, phi: &ScalarField, u: &ScalarField, h: f64) -> ScalarField
where
    F: Fn(&ScalarField) -> ScalarField,
{
    let plus = res(&phi.combine(1.0, u, h).unwrap());
    let minus = res(&phi.combine(1.0, u, -h).unwrap());
    plus.combine(0.5 / h, &minus, -0.5 / h).unwrap()
}

#[test]
fn j_linearization_matches_finite_differences() {
    let (chi, omega0, phi) = setup2(8);
    let g = *phi.geometry();
    let c = 3.0;
    let f = trig(g, &[(&[0, 1, 0, 1], 0.1, 0.0)]).add_constant(0.2);
    let u = trig(g, &[(&[1, 0, 1, 1], 0.01, 0.5), (&[0, 2, 0, 0], 0.01, 0.0)]);
    let lin = j_linearization_apply(&chi, &omega0, &phi, &f, c, &u).unwrap();
    let fd = central_difference(|p| j_residual(&chi, &omega0, p, &f, c).unwrap(), &phi, &u, 1e-5);
    let rel = sup_diff(&lin, &fd) / lin.sup_norm();
    assert!(rel < 1e-6, "relative error {rel}");
}

#[test]
fn dhym_linearization_matches_finite_differences() {
    let (chi, omega0, phi) = setup2(8);
    let omega0 = omega0.scale(3.0);
    let g = *phi.geometry();
    let th = 0.6;
    let f = trig(g, &[(&[1, 0, 0, 0], 0.2, 0.0)]).add_constant(0.3);
    let u = trig(g, &[(&[1, 1, 0, 1], 0.01, 0.2), (&[0, 0, 2, 0], 0.01, 0.0)]);
    let lin = dhym_linearization_apply(&chi, &omega0, &phi, &f, th, &u).unwrap();
    let fd = central_difference(|p| dhym_residual(&chi, &omega0, p, &f, th).unwrap(), &phi, &u, 1e-5);
    let rel = sup_diff(&lin, &fd) / lin.sup_norm();
    assert!(rel < 1e-6, "relative error {rel}");
}

#[test]
fn linearization_at_degenerate_spectrum_matches_finite_differences() {
    // omega_phi = 2 chi at phi = 0: every eigenvalue coincides
    let g = geom(2, 8);
    let chi = FormField::constant(g, diag(&[1.0, 1.0])).unwrap();
    let omega0 = FormField::constant(g, diag(&[2.0, 2.0])).unwrap();
    let phi = ScalarField::zeros(g);
    let f = ScalarField::constant(g, 0.4);
    let u = trig(g, &[(&[1, 0, 0, 1], 0.01, 0.2)]);
    let lin = j_linearization_apply(&chi, &omega0, &phi, &f, 3.0, &u).unwrap();
    let fd = central_difference(|p| j_residual(&chi, &omega0, p, &f, 3.0).unwrap(), &phi, &u, 1e-5);
    assert!(sup_diff(&lin, &fd) / lin.sup_norm() < 1e-6);
}

#[test]
fn linearization_of_constant_is_zero() {
    let (chi, omega0, phi) = setup2(8);
    let g = *phi.geometry();
    let f = ScalarField::constant(g, 0.5);
    let u = ScalarField::constant(g, 2.0);
    let lin = j_linearization_apply(&chi, &omega0, &phi, &f, 3.0, &u).unwrap();
    assert!(lin.sup_norm() < 1e-14);
}

#[test]
fn constant_background_symbol_is_definite() {
    // on constant data L cos(2 pi k.x) = sigma(k) cos(2 pi k.x); the residual
    // decreases as omega grows, so sigma > 0 and -L is negative definite
    let g = geom(2, 8);
    let chi = FormField::constant(g, diag(&[1.0, 2.0])).unwrap();
    let omega0 = FormField::constant(g, diag(&[1.5, 1.0])).unwrap();
    let phi = ScalarField::zeros(g);
    let f = ScalarField::constant(g, 0.2);
    let modes: [[i64; 4]; 5] = [[1, 0, 0, 0], [0, 1, 2, 0], [1, 1, 1, -1], [3, 0, 0, 2], [0, 0, -1, 3]];
    for k in modes {
        let u = trig(g, &[(&k, 1.0, 0.0)]);
        let lin = j_linearization_apply(&chi, &omega0, &phi, &f, 4.0, &u).unwrap();
        let p = u.values().iter().position(|v| v.abs() > 0.5).unwrap();
        let sigma = lin.values()[p] / u.values()[p];
        assert!(sigma > 0.0, "mode {k:?}: {sigma}");
        let expect = u.scale(sigma);
        assert!(sup_diff(&lin, &expect) < 1e-10 * sigma.abs());
    }
}

#[test]
fn linearization_outside_cone_is_rejected() {
    // c below the leave-one-out level: lambda = (1, 1), P = 1 > c = 0.9
    let g = geom(2, 8);
    let chi = FormField::constant(g, diag(&[1.0, 1.0])).unwrap();
    let omega0 = FormField::constant(g, diag(&[1.0, 1.0])).unwrap();
    let zero = ScalarField::zeros(g);
    let f = ScalarField::constant(g, 0.0);
    let err = j_linearization_apply(&chi, &omega0, &zero, &f, 0.9, &zero).unwrap_err();
    assert!(matches!(err, Error::EllipticityLost { .. }));
}

#[test]
fn dhym_trivial_start_is_exact() {
    for n in 1..=3 {
        let big_n = if n == 3 { 8 } else { 16 };
        let g = geom(n, big_n);
        let th = 0.55;
        let mut freq = vec![0i64; 2 * n];
        freq[0] = 1;
        let chi = form(HermitianMatrix::identity(n), trig(g, &[(&freq, 0.01, 0.0)]));
        let omega0 = chi.scale(1.0 / (th / n as f64).tan());
        let r = dhym_residual(&chi, &omega0, &ScalarField::zeros(g), &ScalarField::zeros(g), th).unwrap();
        assert!(r.sup_norm() < 1e-13, "n={n}: {}", r.sup_norm());
    }
}

#[test]
fn dhym_forms_agree() {
    let (chi, omega0, phi) = setup2(8);
    let omega0 = omega0.scale(2.5);
    let g = *phi.geometry();
    let f = trig(g, &[(&[1, 0, 1, 0], 0.3, 0.0)]).add_constant(0.35);
    for th in [0.2, 0.5, 0.75] {
        let a = dhym_residual(&chi, &omega0, &phi, &f, th).unwrap();
        let b = dhym_residual_imre(&chi, &omega0, &phi, &f, th).unwrap();
        assert!(sup_diff(&a, &b) < 1e-12, "theta0={th}: {}", sup_diff(&a, &b));
    }
}

#[test]
fn dhym_residual_decreases_in_f() {
    let (chi, omega0, phi) = setup2(8);
    let omega0 = omega0.scale(2.0);
    let g = *phi.geometry();
    let lo = dhym_residual(&chi, &omega0, &phi, &ScalarField::constant(g, 0.1), 0.5).unwrap();
    let hi = dhym_residual(&chi, &omega0, &phi, &ScalarField::constant(g, 0.2), 0.5).unwrap();
    assert!(lo.values().iter().zip(hi.values()).all(|(a, b)| b < a));
}

fn j_problem(chi: &FormField, omega0: &FormField, f: &ScalarField, c: f64) -> JEquation {
    JEquation::new(chi.clone(), omega0.clone(), f.clone(), c).unwrap()
}

#[test]
fn newton_at_exact_solution_takes_no_steps() {
    let (chi, omega0, phi) = setup2(8);
    let c = 3.0;
    let f = manufactured_f(&chi, &omega0, &phi, c);
    let rep = newton_solve(&j_problem(&chi, &omega0, &f, c), &phi, &SolverConfig::default()).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.newton_iterations, 0);
    assert_eq!(rep.phi, phi);
}

#[test]
fn newton_recovers_manufactured_solution_n1() {
    let g = geom(1, 64);
    let chi = form(diag(&[1.0]), trig(g, &[(&[1, 1], 0.004, 0.3)]));
    let omega0 = form(diag(&[1.2]), ScalarField::zeros(g));
    let star = trig(g, &[(&[1, 0], 0.01, 0.0), (&[0, 2], 0.003, 0.5), (&[2, -1], 0.001, 1.0)]);
    let c = 2.0;
    let f = manufactured_f(&chi, &omega0, &star, c);
    let rep = newton_solve(&j_problem(&chi, &omega0, &f, c), &ScalarField::zeros(g), &SolverConfig::default())
        .unwrap();
    assert!(rep.final_residual() <= 1e-10);
    assert!(rep.newton_iterations <= 8, "{} iterations", rep.newton_iterations);
    let err = sup_diff(&rep.phi.mean_zero(), &star.mean_zero());
    assert!(err < 1e-9, "phi error {err}");
    assert!(rep.cone_margin_min > 0.0);
    assert!(rep.multiplier < 1e-12);
}

#[test]
fn newton_recovers_manufactured_solution_n2() {
    let (chi, omega0, star) = setup2(16);
    let c = 3.0;
    let f = manufactured_f(&chi, &omega0, &star, c);
    let rep = newton_solve(&j_problem(&chi, &omega0, &f, c), &ScalarField::zeros(*star.geometry()), &SolverConfig::default())
        .unwrap();
    assert!(rep.final_residual() <= 1e-10);
    assert!(sup_diff(&rep.phi.mean_zero(), &star.mean_zero()) < 1e-8);
}

#[test]
fn newton_reports_cone_breach_for_unstable_data() {
    // lambda = (1, 1) relative to chi with c = 0.9: the J-cone is empty here
    let g = geom(2, 8);
    let chi = FormField::constant(g, diag(&[1.0, 1.0])).unwrap();
    let omega0 = FormField::constant(g, diag(&[1.0, 1.0])).unwrap();
    let f = ScalarField::zeros(g);
    let eq = j_problem(&chi, &omega0, &f, 0.9);
    let fail = newton_solve(&eq, &ScalarField::zeros(g), &SolverConfig::default()).unwrap_err();
    assert!(matches!(fail.error, Error::ConeBreach(_)), "{}", fail.error);
}

#[test]
fn newton_reports_violated_solvability() {
    // constant data inside the cone but with f off the integrability constant
    let g = geom(1, 16);
    let chi = FormField::constant(g, diag(&[1.0])).unwrap();
    let omega0 = FormField::constant(g, diag(&[1.0])).unwrap();
    let f = ScalarField::constant(g, 0.5);
    let fail = newton_solve(&j_problem(&chi, &omega0, &f, 1.0), &ScalarField::zeros(g), &SolverConfig::default())
        .unwrap_err();
    assert!(matches!(fail.error, Error::NoConvergence(_)));
    let report = fail.report.expect("report");
    assert!(!report.converged);
    assert!((report.multiplier - 0.5).abs() < 1e-12);
}

#[test]
fn path_j_trivial_instance_stays_at_zero() {
    let g = geom(2, 8);
    let chi = FormField::constant(g, diag(&[1.0, 1.0])).unwrap();
    let rep = continuity_path_j(&chi, &chi, &ScalarField::zeros(g), 2.0, &SolverConfig::default()).unwrap();
    assert!(rep.converged);
    assert!(rep.phi.sup_norm() < 1e-14);
    assert!(rep.path.iter().all(|s| s.newton_iterations == 0 && s.cone_margin > 0.0));
}

#[test]
fn path_j_matches_direct_newton() {
    let (chi, omega0, _) = setup2(16);
    let g = *chi.geometry();
    // with f = 0 integrability forces c = tr(adj(omega0) chi) / det(omega0)
    let c = tr_adj(omega0.base(), chi.base()) / omega0.base().det();
    let f = ScalarField::zeros(g);
    let config = SolverConfig { path_steps: 2, ..SolverConfig::default() };
    let rep = continuity_path_j(&chi, &omega0, &f, c, &config).unwrap();
    assert!(rep.final_residual() <= 1e-10);
    assert!(rep.path.iter().all(|s| s.cone_margin > 0.0));
    assert!(rep.path.iter().all(|s| s.solvability_integral.abs() <= 1e-10));
    let direct = newton_solve(&j_problem(&chi, &omega0, &f, c), &ScalarField::zeros(g), &config).unwrap();
    assert!(sup_diff(&rep.phi.mean_zero(), &direct.phi.mean_zero()) < 1e-8);
}

fn tr_adj(omega: &HermitianMatrix, chi: &HermitianMatrix) -> f64 {
    // adj [[a, b], [conj b, d]] = [[d, -b], [-conj b, a]]
    let (a, d, b) = (omega.get(0, 0).re, omega.get(1, 1).re, omega.get(0, 1));
    d * chi.get(0, 0).re + a * chi.get(1, 1).re - 2.0 * (b * chi.get(1, 0)).re
}

#[test]
fn path_j_rejects_failed_integrability() {
    let g = geom(1, 8);
    let chi = FormField::constant(g, diag(&[2.0])).unwrap();
    let omega0 = FormField::constant(g, diag(&[1.0])).unwrap();
    let err = continuity_path_j(&chi, &omega0, &ScalarField::zeros(g), 1.0, &SolverConfig::default()).unwrap_err();
    assert!(matches!(err.error, Error::Precondition(_)));
}

#[test]
fn path_dhym_trivial_target() {
    let g = geom(2, 8);
    let th = PI / 5.0;
    let chi = FormField::constant(g, diag(&[1.0, 1.0])).unwrap();
    let target = chi.scale(1.0 / (th / 2.0).tan());
    let rep = continuity_path_dhym(&chi, &target, &ScalarField::zeros(g), th, &SolverConfig::default()).unwrap();
    assert!(rep.converged);
    assert!(rep.phi.sup_norm() < 1e-12);
}

#[test]
fn path_dhym_one_dimensional_matches_pointwise_root() {
    // for n = 1 the solution has lambda = (1 + f) cot(theta0) pointwise
    let g = geom(1, 32);
    let th: f64 = 0.6;
    let chi = form(diag(&[1.0]), trig(g, &[(&[1, 0], 0.003, 0.0)]));
    let omega0 = form(diag(&[2.0]), trig(g, &[(&[0, 1], 0.004, 0.0)]));
    // target omega = omega0 + ddbar(star); f chosen so this solves the equation
    let star = trig(g, &[(&[1, 1], 0.005, 0.2)]);
    let target_form = omega0.add_potential(&star).unwrap();
    let f_values: Vec<f64> = (0..g.len())
        .map(|p| target_form.at(p).get(0, 0).re / chi.at(p).get(0, 0).re * th.tan() - 1.0)
        .collect();
    let f = ScalarField::new(g, f_values).unwrap();
    let rep = continuity_path_dhym(&chi, &omega0, &f, th, &SolverConfig::default()).unwrap();
    let solved = omega0.add_potential(&rep.phi).unwrap();
    for p in 0..g.len() {
        // scalar root of F(f, lambda) = 0 by bisection
        let fp = f.values()[p];
        let (mut lo, mut hi) = (1e-6_f64, 1e6_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let val = (th - (1.0 / mid).atan()).sin() - fp * th.cos() / (mid * mid + 1.0).sqrt();
            if val > 0.0 { hi = mid } else { lo = mid }
        }
        let lambda = solved.at(p).get(0, 0).re / chi.at(p).get(0, 0).re;
        assert!((lambda - 0.5 * (lo + hi)).abs() < 1e-9, "point {p}");
    }
}

#[test]
fn path_dhym_phase_is_constant_when_f_vanishes() {
    let g = geom(2, 8);
    let th = PI / 5.0;
    let chi = form(HermitianMatrix::identity(2), trig(g, &[(&[1, 0, 0, 1], 0.002, 0.0)]));
    // constant base with arctan(1/a) + arctan(1/b) = theta0 keeps f = 0 admissible
    let a: f64 = 2.2;
    let b = 1.0 / (th - (1.0 / a).atan()).tan();
    let target = form(diag(&[a, b]), trig(g, &[(&[0, 1, 1, 0], 0.003, 0.4)]));
    let rep = continuity_path_dhym(&chi, &target, &ScalarField::zeros(g), th, &SolverConfig::default()).unwrap();
    let omega = target.add_potential(&rep.phi).unwrap();
    for p in 0..g.len() {
        let s = crate::hermitian_cone::relative_spectrum(&chi.at(p), &omega.at(p)).unwrap();
        assert!((crate::hermitian_cone::q_level(&s) - th).abs() < 1e-9);
    }
}

#[test]
fn config_validation() {
    let bad = SolverConfig { tolerance: 1e-13, ..SolverConfig::default() };
    assert!(bad.validate().is_err());
    let bad = SolverConfig { path_steps: 0, ..SolverConfig::default() };
    assert!(bad.validate().is_err());
    let bad = SolverConfig { damping: 0.0, ..SolverConfig::default() };
    assert!(bad.validate().is_err());
    assert!(SolverConfig::default().validate().is_ok());
}

