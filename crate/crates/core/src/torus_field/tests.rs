use super::*;
use crate::hermitian_cone::sampling::random_positive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn geom(n: usize, big_n: usize) -> TorusGeometry {
    TorusGeometry::new(n, big_n).unwrap()
}

fn random_trig<R: Rng>(rng: &mut R, g: &TorusGeometry, terms: usize, max_freq: i64, amp: f64) -> Vec<TrigTerm> {
    (0..terms)
        .map(|_| TrigTerm {
            freq: (0..g.real_dims()).map(|_| rng.gen_range(-max_freq..=max_freq)).collect(),
            amplitude: amp * rng.gen_range(-1.0..1.0),
            phase: rng.gen_range(0.0..2.0 * PI),
        })
        .collect()
}

/// Hessian of `a cos(2 pi k.x + p)` from `d/dz = (d/dx - i d/dy)/2` applied by hand.
fn analytic_hessian(terms: &[TrigTerm], x: &[f64], n: usize) -> Vec<Complex64> {
    let mut h = vec![Complex64::new(0.0, 0.0); n * n];
    for t in terms {
        let arg: f64 = 2.0 * PI * t.freq.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum::<f64>() + t.phase;
        // cos = (e^{i arg} + e^{-i arg})/2; on e^{i arg}, d/dz_i = pi i (k_i - i l_i)
        // and d/dzbar_j = pi i (k_j + i l_j); the other mode flips (k, l)
        let e = Complex64::from_polar(1.0, arg);
        for i in 0..n {
            for j in 0..n {
                let (ki, li) = (t.freq[2 * i] as f64, t.freq[2 * i + 1] as f64);
                let (kj, lj) = (t.freq[2 * j] as f64, t.freq[2 * j + 1] as f64);
                let pi_i = Complex64::new(0.0, PI);
                let plus = pi_i * Complex64::new(ki, -li) * pi_i * Complex64::new(kj, lj) * e;
                let minus = pi_i * Complex64::new(-ki, li) * pi_i * Complex64::new(-kj, -lj) * e.conj();
                h[i * n + j] += t.amplitude * 0.5 * (plus + minus);
            }
        }
    }
    h
}

#[test]
fn geometry_validation() {
    assert!(TorusGeometry::new(0, 16).is_err());
    assert!(TorusGeometry::new(4, 16).is_err());
    assert!(TorusGeometry::new(1, 12).is_err());
    assert!(TorusGeometry::new(1, 4).is_err());
    assert!(TorusGeometry::new(3, 64).is_err());
    assert_eq!(geom(2, 8).len(), 4096);
}

#[test]
fn hessian_of_constant_is_zero() {
    let g = geom(2, 8);
    let h = complex_hessian_field(&ScalarField::constant(g, 3.5));
    assert!(h.packed().iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn hessian_of_single_cosine() {
    let g = geom(1, 32);
    let phi = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
    let h = complex_hessian_field(&phi);
    for p in 0..g.len() {
        let want = -PI * PI * (2.0 * PI * g.coords(p)[0]).cos();
        assert!((h.at(p).get(0, 0).re - want).abs() < 1e-10);
    }
}

#[test]
fn spectral_exactness_on_trig_polynomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (n, big_n) in [(1, 32), (2, 16), (3, 8)] {
        let g = geom(n, big_n);
        let terms = random_trig(&mut rng, &g, 4, (big_n / 2 - 1) as i64, 0.3);
        let phi = ScalarField::from_trig(g, &terms).unwrap();
        let h = complex_hessian_field(&phi);
        let scale = h.packed().iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        for p in (0..g.len()).step_by(37) {
            let want = analytic_hessian(&terms, &g.coords(p), n);
            let got = h.at(p);
            for i in 0..n {
                for j in 0..n {
                    assert!((got.get(i, j) - want[i * n + j]).norm() < 1e-10 * scale, "n={n}");
                }
            }
        }
    }
}

#[test]
fn hessian_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = geom(2, 8);
    let a = ScalarField::from_trig(g, &random_trig(&mut rng, &g, 3, 3, 1.0)).unwrap();
    let b = ScalarField::from_trig(g, &random_trig(&mut rng, &g, 3, 3, 1.0)).unwrap();
    let lhs = complex_hessian_field(&a.add(&b).unwrap());
    let rhs = complex_hessian_field(&a).combine(1.0, &complex_hessian_field(&b), 1.0).unwrap();
    assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-11);
}

#[test]
fn kahler_form_examples() {
    let g = geom(1, 32);
    let id = HermitianMatrix::identity(1);
    let (_, m) = kahler_form(&id, &ScalarField::zeros(g)).unwrap();
    assert!((m - 1.0).abs() < 1e-14);
    let eps = 0.05;
    let phi = ScalarField::from_fn(g, |x| eps * (2.0 * PI * x[0]).cos()).unwrap();
    let (_, m) = kahler_form(&id, &phi).unwrap();
    assert!((m - (1.0 - eps * PI * PI)).abs() < 1e-10);
    let phi = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
    assert!(matches!(kahler_form(&id, &phi), Err(Error::NotKahler { .. })));
}

#[test]
fn integrate_constant_and_orthogonality() {
    for n in 1..=3 {
        let g = geom(n, 8);
        let id = HermitianField::constant(g, &HermitianMatrix::identity(n)).unwrap();
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        let v = integrate(&ScalarField::constant(g, 1.0), &[(&id, n)]).unwrap();
        assert!((v - fact).abs() < 1e-12);
        let s = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        assert!(integrate(&s, &[(&id, n)]).unwrap().abs() < 1e-12);
    }
}

#[test]
fn mixed_wedge_of_constant_forms_matches_explicit_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // n = 2: chi ^ omega = (chi11 w22 + chi22 w11 - chi12 w21 - chi21 w12) dV
    let g = geom(2, 8);
    let (chi, om) = (random_positive(&mut rng, 2), random_positive(&mut rng, 2));
    let want = (chi.get(0, 0) * om.get(1, 1) + chi.get(1, 1) * om.get(0, 0)
        - chi.get(0, 1) * om.get(1, 0)
        - chi.get(1, 0) * om.get(0, 1))
    .re;
    let (cf, of) = (HermitianField::constant(g, &chi).unwrap(), HermitianField::constant(g, &om).unwrap());
    let got = integrate(&ScalarField::constant(g, 1.0), &[(&cf, 1), (&of, 1)]).unwrap();
    assert!((got - want).abs() < 1e-12 * want.abs().max(1.0));

    // n = 3: compare with the derivative of det(omega + t chi)
    let g = geom(3, 8);
    let (chi, om) = (random_positive(&mut rng, 3), random_positive(&mut rng, 3));
    let (cf, of) = (HermitianField::constant(g, &chi).unwrap(), HermitianField::constant(g, &om).unwrap());
    let got = integrate(&ScalarField::constant(g, 1.0), &[(&cf, 1), (&of, 2)]).unwrap();
    // d/dt det(omega + t chi) at t = 0 equals 3 D(chi, omega, omega); the wedge is 3! D
    let h = 1e-4;
    let dd = (om.combine(1.0, &chi, h).unwrap().det() - om.combine(1.0, &chi, -h).unwrap().det()) / (2.0 * h);
    let want = 2.0 * dd;
    assert!((got - want).abs() < 1e-7 * want.abs(), "{got} vs {want}");
}

#[test]
fn integrals_depend_only_on_bases() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = geom(2, 16);
    let chi_b = random_positive(&mut rng, 2).add(&HermitianMatrix::identity(2)).unwrap();
    let om_b = random_positive(&mut rng, 2).add(&HermitianMatrix::identity(2)).unwrap();
    let chi0 = HermitianField::constant(g, &chi_b).unwrap();
    let om0 = HermitianField::constant(g, &om_b).unwrap();
    let one = ScalarField::constant(g, 1.0);
    let ref_mixed = integrate(&one, &[(&chi0, 1), (&om0, 1)]).unwrap();
    let ref_top = integrate(&one, &[(&om0, 2)]).unwrap();
    for _ in 0..3 {
        let p = ScalarField::from_trig(g, &random_trig(&mut rng, &g, 5, 4, 0.01)).unwrap();
        let q = ScalarField::from_trig(g, &random_trig(&mut rng, &g, 5, 4, 0.01)).unwrap();
        let chi = FormField::new(chi_b.clone(), p).unwrap();
        let om = FormField::new(om_b.clone(), q).unwrap();
        let mixed = integrate(&one, &[(chi.field(), 1), (om.field(), 1)]).unwrap();
        let top = integrate(&one, &[(om.field(), 2)]).unwrap();
        assert!((mixed - ref_mixed).abs() < 1e-12 * ref_mixed.abs().max(1.0));
        assert!((top - ref_top).abs() < 1e-12 * ref_top.abs().max(1.0));
    }
}

#[test]
fn mollify_constant_and_range() {
    let g = geom(1, 32);
    let c = ScalarField::constant(g, 2.0);
    let m = mollify(&c, 0.1).unwrap();
    assert!(m.values().iter().all(|v| (v - 2.0).abs() < 1e-13));
    assert!(matches!(mollify(&c, 0.3), Err(Error::Usage(_))));
    assert!(matches!(mollify(&c, 0.0), Err(Error::Usage(_))));
}

#[test]
fn mollify_commutes_with_hessian() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let g = geom(2, 16);
    let phi = ScalarField::from_trig(g, &random_trig(&mut rng, &g, 6, 7, 0.2)).unwrap();
    let a = complex_hessian_field(&mollify(&phi, 0.15).unwrap());
    let b = mollify_components(&complex_hessian_field(&phi), 0.15).unwrap();
    assert!(a.max_abs_diff(&b).unwrap() < 1e-10);
}

/// `J_nu(x)` for integer `nu` from its integral representation.
fn bessel_j(nu: usize, x: f64) -> f64 {
    let m = 4000;
    let h = PI / m as f64;
    // composite Simpson
    let f = |t: f64| (nu as f64 * t - x * t.sin()).cos();
    let mut s = f(0.0) + f(PI);
    for k in 1..m {
        s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0 / PI
}

/// Continuum Fourier transform of the normalized radial kernel at `|xi|`.
fn continuum_kernel_transform(d: usize, delta: f64, xi: f64) -> f64 {
    let nu = d / 2 - 1;
    let m = 4000;
    let h = 1.0 / m as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..=m {
        let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let t = k as f64 * h;
        let r = t * delta;
        let rho = kernel_profile(t);
        // radial FT: 2 pi |xi|^{1 - d/2} int rho r^{d/2} J_{d/2-1}(2 pi |xi| r) dr
        num += w * rho * r.powi(d as i32 / 2) * bessel_j(nu, 2.0 * PI * xi * r);
        // total mass: |S^{d-1}| int rho r^{d-1} dr with |S^{d-1}| = 2 pi^{d/2} / (d/2 - 1)!
        den += w * rho * r.powi(d as i32 - 1);
    }
    let fact: f64 = (1..=nu).map(|k| k as f64).product();
    let sphere = 2.0 * PI.powi(d as i32 / 2) / fact;
    (2.0 * PI * xi.powf(1.0 - d as f64 / 2.0) * num) / (sphere * den)
}

#[test]
fn mollify_scales_fourier_modes_by_kernel_transform() {
    for (n, big_n, delta) in [(1usize, 128usize, 0.2), (2, 32, 0.2)] {
        let g = geom(n, big_n);
        for k in [1i64, 2] {
            let mut freq = vec![0i64; 2 * n];
            freq[0] = k;
            let phi = ScalarField::from_trig(g, &[TrigTerm { freq, amplitude: 1.0, phase: 0.0 }]).unwrap();
            let m = mollify(&phi, delta).unwrap();
            let ratio = m.values()[0] / phi.values()[0];
            let want = continuum_kernel_transform(2 * n, delta, k as f64);
            assert!(ratio > 0.0 && ratio <= 1.0);
            assert!((ratio - want).abs() < 5e-3, "n={n} k={k}: {ratio} vs {want}");
        }
    }
}

#[test]
fn mollify_preserves_positivity_margin() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = geom(2, 16);
    let base = HermitianMatrix::identity(2);
    let phi = ScalarField::from_trig(g, &random_trig(&mut rng, &g, 6, 4, 0.002)).unwrap();
    let (_, m0) = kahler_form(&base, &phi).unwrap();
    let (_, m1) = kahler_form(&base, &mollify(&phi, 0.12).unwrap()).unwrap();
    assert!(m1 >= m0 - 1e-10);
}

#[test]
fn regularized_max_properties() {
    let g = geom(1, 64);
    let eta = 0.3;
    let f = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
    let same = regularized_max(&f, &f, eta).unwrap();
    let shift = same.values()[0] - f.values()[0];
    for (s, v) in same.values().iter().zip(f.values()) {
        assert!((s - v - shift).abs() < 1e-12);
        assert!(*s >= *v && *s <= v + eta);
    }
    let high = f.add_constant(1.0);
    let r = regularized_max(&high, &f, 0.4).unwrap();
    assert!(r.sub(&high).unwrap().sup_norm() < 1e-12);

    let g2 = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos() * 0.8).unwrap();
    let r = regularized_max(&f, &g2, eta).unwrap();
    for ((m, a), b) in r.values().iter().zip(f.values()).zip(g2.values()) {
        let mx = a.max(*b);
        assert!(*m >= mx - 1e-12 && *m <= mx + eta + 1e-12);
        if (a - b).abs() >= 2.0 * eta {
            assert!((m - mx).abs() < 1e-12);
        }
    }
}

#[test]
fn regularized_max_preserves_convexity_on_a_slice() {
    // two convex functions of one variable, sampled on a line
    let xs: Vec<f64> = (0..400).map(|i| -2.0 + 4.0 * i as f64 / 399.0).collect();
    let f1: Vec<f64> = xs.iter().map(|x| 0.7 * x + 0.1).collect();
    let f2: Vec<f64> = xs.iter().map(|x| -0.4 * x + 0.3 * x * x).collect();
    let m: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| regularized_max_scalar(*a, *b, 0.25)).collect();
    for w in m.windows(3) {
        assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-12);
    }
}

#[test]
fn field_roundtrip_binary_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let g = geom(1, 16);
    let f = ScalarField::from_fn(g, |x| (2.0 * PI * x[1]).sin() + x[0]).unwrap();
    let base = HermitianMatrix::identity(1).scale(2.0);
    let header = write_field(&dir.path().join("phi"), &f, Some(&base)).unwrap();
    let (back, h) = read_field(&header).unwrap();
    assert_eq!(back, f);
    assert_eq!(h.base.unwrap(), base);
    let csvp = dir.path().join("phi.csv");
    write_field_csv(&csvp, &f).unwrap();
    let text = std::fs::read_to_string(csvp).unwrap();
    assert_eq!(text.lines().count(), g.len() + 1);
    assert!(text.starts_with("x1,y1,value"));
}

#[test]
fn from_trig_rejects_nyquist_and_bad_arity() {
    let g = geom(1, 8);
    let t = TrigTerm { freq: vec![4, 0], amplitude: 1.0, phase: 0.0 };
    assert!(ScalarField::from_trig(g, &[t]).is_err());
    let t = TrigTerm { freq: vec![1], amplitude: 1.0, phase: 0.0 };
    assert!(ScalarField::from_trig(g, &[t]).is_err());
}
