use super::sampling::*;
use super::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn spec(v: &[f64]) -> SpectrumRel {
    SpectrumRel::new(v).unwrap()
}

/// Real `det(omega - lambda chi)` by cofactor-free LU on the complex matrix.
fn char_poly(chi: &HermitianMatrix, omega: &HermitianMatrix, lambda: f64) -> f64 {
    omega.combine(1.0, chi, -lambda).unwrap().det()
}

/// Roots of the characteristic polynomial by sign scan and bisection.
fn char_poly_roots(chi: &HermitianMatrix, omega: &HermitianMatrix) -> Vec<f64> {
    let grid: Vec<f64> = (0..=200_000).map(|i| 10f64.powf(-6.0 + 12.0 * i as f64 / 200_000.0)).collect();
    let mut roots = Vec::new();
    for w in grid.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (fa, fb) = (char_poly(chi, omega, a), char_poly(chi, omega, b));
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa.signum() == fb.signum() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if char_poly(chi, omega, m).signum() == fa.signum() {
                a = m;
            } else {
                b = m;
            }
        }
        roots.push(0.5 * (a + b));
    }
    roots
}

#[test]
fn hermitian_construction_checks_symmetry() {
    let ok = HermitianMatrix::new(2, &[c(1.0, 0.0), c(0.5, 0.2), c(0.5, -0.2), c(2.0, 0.0)]);
    assert!(ok.is_ok());
    let bad = HermitianMatrix::new(2, &[c(1.0, 0.0), c(0.5, 0.2), c(0.5, 0.2), c(2.0, 0.0)]);
    assert!(matches!(bad, Err(Error::Domain(_))));
    assert!(matches!(HermitianMatrix::new(2, &[c(1.0, 0.0)]), Err(Error::Usage(_))));
}

#[test]
fn relative_spectrum_trivial_cases() {
    let s = relative_spectrum(&HermitianMatrix::identity(2), &HermitianMatrix::diagonal(&[3.0, 2.0])).unwrap();
    assert_eq!(s.values(), &[2.0, 3.0]);
    let s = relative_spectrum(&HermitianMatrix::diagonal(&[2.0]), &HermitianMatrix::identity(1)).unwrap();
    assert!((s.values()[0] - 0.5).abs() < 1e-15);
}

#[test]
fn relative_spectrum_errors() {
    let neg = HermitianMatrix::diagonal(&[1.0, -1.0]);
    let id = HermitianMatrix::identity(2);
    assert!(matches!(relative_spectrum(&neg, &id), Err(Error::Domain(_))));
    assert!(matches!(relative_spectrum(&id, &neg), Err(Error::Domain(_))));
    assert!(matches!(
        relative_spectrum(&id, &HermitianMatrix::identity(3)),
        Err(Error::Usage(_))
    ));
}

#[test]
fn relative_spectrum_matches_characteristic_roots() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let chi = random_positive(&mut rng, 3);
        let omega = random_positive(&mut rng, 3);
        let got = relative_spectrum(&chi, &omega).unwrap();
        let roots = char_poly_roots(&chi, &omega);
        assert_eq!(roots.len(), 3, "roots {roots:?}");
        for (g, r) in got.values().iter().zip(&roots) {
            assert!((g - r).abs() <= 1e-10 * r.max(1.0), "{g} vs {r}");
        }
    }
}

#[test]
fn relative_eigen_vectors_diagonalize_both_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let chi = random_positive(&mut rng, 4);
    let omega = random_positive(&mut rng, 4);
    let e = relative_eigen(&chi, &omega).unwrap();
    let vc = chi.congruence(&e.vectors).unwrap();
    let vo = omega.congruence(&e.vectors).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let want_c = if i == j { 1.0 } else { 0.0 };
            let want_o = if i == j { e.spectrum.values()[i] } else { 0.0 };
            assert!((vc.get(i, j) - want_c).norm() < 1e-10);
            assert!((vo.get(i, j) - want_o).norm() < 1e-10 * want_o.max(1.0));
        }
    }
}

#[test]
fn jacobi_handles_degenerate_and_diagonal_input() {
    let m = HermitianMatrix::identity(4).scale(3.0);
    assert!(m.eigenvalues().iter().all(|&v| v == 3.0));
    let z = HermitianMatrix::new(2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]).unwrap();
    let ev = z.eigenvalues();
    assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
}

#[test]
fn trace_relative_examples_and_inverse_oracle() {
    assert!((trace_relative(&spec(&[1.0, 2.0, 3.0])) - 11.0 / 6.0).abs() < 1e-15);
    let cc = 2.5;
    assert!((trace_relative(&spec(&[1.0 / cc; 4])) - 4.0 * cc).abs() < 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let chi = random_positive(&mut rng, 4);
    let omega = random_positive(&mut rng, 4);
    let s = relative_spectrum(&chi, &omega).unwrap();
    let prod = omega.inverse().unwrap().to_complex_matrix().matmul(&chi.to_complex_matrix()).unwrap();
    let tr: f64 = (0..4).map(|i| prod[(i, i)].re).sum();
    assert!((trace_relative(&s) - tr).abs() < 1e-9 * tr);
}

#[test]
fn p_level_examples() {
    assert!((p_level(&spec(&[1.0, 2.0, 3.0])) - 1.5).abs() < 1e-15);
    assert_eq!(p_level(&spec(&[5.0])), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let s = random_spectrum(&mut rng, 4, 0.1, 10.0);
        let v = s.values();
        let oracle = (0..4)
            .map(|k| (0..4).filter(|&j| j != k).map(|j| 1.0 / v[j]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((p_level(&s) - oracle).abs() < 1e-14 * oracle);
    }
}

#[test]
fn q_level_examples() {
    assert!((q_level(&spec(&[1.0, 1.0])) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    assert!((q_level(&spec(&[1e6, 1e6])) - 2e-6).abs() < 1e-17);
    let v = [0.3f64, 1.7, 4.0];
    let mut oracle = 0.0;
    for x in v {
        oracle += std::f64::consts::FRAC_PI_2 - x.atan();
    }
    assert!((q_level(&spec(&v)) - oracle).abs() < 1e-12);
}

#[test]
fn cone_test_j_examples() {
    let s = spec(&[1.0, 2.0]);
    assert!(cone_test_j(&s, &ConeSpec::j(1.6, 0.0).unwrap(), 2, false).unwrap());
    assert!(!cone_test_j(&s, &ConeSpec::j(1.4, 0.0).unwrap(), 2, false).unwrap());
    let x = 0.7;
    assert!(cone_test_j(&spec(&[x]), &ConeSpec::j(1.0 / x, 0.0).unwrap(), 1, false).unwrap());
    assert!(matches!(
        cone_test_j(&s, &ConeSpec::j(1.0, 0.0).unwrap(), 3, false),
        Err(Error::Usage(_))
    ));
}

#[test]
fn cone_test_dhym_examples() {
    let theta0 = 0.6;
    for n in 2..=5 {
        let at = spec(&vec![1.0 / (theta0 / n as f64).tan(); n]);
        let cone = ConeSpec::dhym(theta0, 0.0).unwrap();
        assert!(cone_test_dhym(&at, &cone, true).unwrap());
        let edge = spec(&vec![1.0 / (theta0 / (n as f64 - 1.0)).tan(); n]);
        assert!(!cone_test_dhym(&edge, &cone, true).unwrap());
        assert!(cone_test_dhym(&edge, &cone, false).unwrap());
    }
    assert!(ConeSpec::dhym(std::f64::consts::FRAC_PI_4, 0.0).is_err());
}

#[test]
fn schur_complement_examples() {
    let a = HermitianMatrix::from_real(1, &[3.0]).unwrap();
    let b = HermitianMatrix::from_real(1, &[2.0]).unwrap();
    let cm = ComplexMatrix::from_rows(1, 1, &[c(1.0, 0.0)]).unwrap();
    let s = schur_complement(&a, &b, &cm).unwrap();
    assert!((s.get(0, 0).re - 2.5).abs() < 1e-15);
    let z = ComplexMatrix::zeros(1, 1);
    assert_eq!(schur_complement(&a, &b, &z).unwrap(), a);
    let singular = HermitianMatrix::from_real(1, &[0.0]).unwrap();
    assert!(matches!(schur_complement(&a, &singular, &cm), Err(Error::Domain(_))));
}

#[test]
fn schur_complement_of_positive_block_is_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let k = 1 + (rand::Rng::gen_range(&mut rng, 0..4));
        let block = random_positive(&mut rng, k + 2);
        let (a, b, cm) = lemmas::split_blocks(&block, k).unwrap();
        let s = schur_complement(&a, &b, &cm).unwrap();
        assert!(block.eigenvalues()[0] > 0.0);
        assert!(s.eigenvalues()[0] > 0.0);
    }
}

#[test]
fn f_value_examples() {
    let theta0: f64 = 0.5;
    // two equal eigenvalues with arctan sum theta0
    let l = 1.0 / (theta0 / 2.0).tan();
    assert!(f_value(0.0, &spec(&[l, l]), theta0).unwrap().abs() < 1e-15);
    for n in 2..=5 {
        let edge = spec(&vec![1.0 / (theta0 / (n as f64 - 1.0)).tan(); n]);
        let f = dhym_f_floor(n) + 1e-12;
        assert!(f_value(f, &edge, theta0).unwrap() < 0.0);
    }
    let s = spec(&[3.0, 4.0]);
    assert!(f_value(0.1, &s, theta0).unwrap() > f_value(0.2, &s, theta0).unwrap());
    assert!(matches!(f_value(-0.1, &s, theta0), Err(Error::Domain(_))));
    assert!(matches!(f_value(0.0, &s, 0.9), Err(Error::Domain(_))));
}

fn fd_gradient(f: f64, lambda: &[f64], theta0: f64) -> Vec<f64> {
    (0..lambda.len())
        .map(|i| {
            let h = 1e-5 * lambda[i];
            let mut p = lambda.to_vec();
            let mut m = lambda.to_vec();
            p[i] += h;
            m[i] -= h;
            (f_value_unchecked(f, &p, theta0) - f_value_unchecked(f, &m, theta0)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn f_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let n = rand::Rng::gen_range(&mut rng, 2..=5);
        let theta0 = rand::Rng::gen_range(&mut rng, 0.05..0.78);
        let s = random_dhym_point(&mut rng, n, theta0);
        let f = rand::Rng::gen_range(&mut rng, dhym_f_floor(n) * 0.99..1.0);
        let g = f_gradient(f, &s, theta0).unwrap();
        let fd = fd_gradient(f, s.values(), theta0);
        for (a, b) in g.iter().zip(&fd) {
            assert!(*a > 0.0);
            assert!((a - b).abs() <= 1e-6 * a.abs(), "{a} vs {b}");
        }
    }
}

#[test]
fn f_gradient_rejects_points_outside_region() {
    let theta0: f64 = 0.5;
    let edge = spec(&[1.0 / (theta0).tan() * 0.5, 1.0]);
    assert!(matches!(f_gradient(0.0, &edge, theta0), Err(Error::Domain(_))));
}

#[test]
fn f_hessian_matches_finite_differences_of_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let n = rand::Rng::gen_range(&mut rng, 2..=4);
        let theta0 = rand::Rng::gen_range(&mut rng, 0.05..0.78);
        let s = random_dhym_point(&mut rng, n, theta0);
        let f = rand::Rng::gen_range(&mut rng, 0.0..1.0);
        let h = f_hessian(f, &s, theta0).unwrap();
        for j in 0..n {
            let step = 1e-5 * s.values()[j];
            let mut p = s.values().to_vec();
            let mut m = s.values().to_vec();
            p[j] += step;
            m[j] -= step;
            let gp = f_gradient_unchecked(f, &p, theta0);
            let gm = f_gradient_unchecked(f, &m, theta0);
            for i in 0..n {
                let fd = (gp[i] - gm[i]) / (2.0 * step);
                let scale = h.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
                assert!((h[i * n + j] - fd).abs() <= 1e-6 * scale);
            }
        }
    }
}

#[test]
fn truncate_examples() {
    let s = spec(&[1.0, 10.0, 100.0]);
    assert_eq!(truncate_spectrum(&s, 1e3).unwrap(), s);
    assert_eq!(truncate_spectrum(&s, 5.0).unwrap().values(), &[1.0, 5.0, 5.0]);
    assert!(truncate_spectrum(&s, 0.0).is_err());
}

#[test]
fn mixed_discriminant_matches_polarization() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 1..=4 {
        let mats: Vec<HermitianMatrix> = (0..n).map(|_| random_positive(&mut rng, n)).collect();
        let refs: Vec<&HermitianMatrix> = mats.iter().collect();
        let d = mixed_discriminant(&refs).unwrap();
        // (1/n!) sum over subsets S of (-1)^{n-|S|} det(sum_{k in S} A_k)
        let mut acc = 0.0;
        for mask in 1u32..(1 << n) {
            let mut sum = HermitianMatrix::zeros(n);
            for (k, m) in mats.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    sum = sum.add(m).unwrap();
                }
            }
            let sign = if (n as u32 - mask.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * sum.det();
        }
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        acc /= fact;
        assert!((d - acc).abs() < 1e-10 * acc.abs().max(1.0), "n={n}: {d} vs {acc}");
        let same: Vec<&HermitianMatrix> = vec![&mats[0]; n];
        assert!((mixed_discriminant(&same).unwrap() - mats[0].det()).abs() < 1e-12 * mats[0].det().abs().max(1.0));
    }
}

#[test]
fn lemma_suites_small_runs_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(lemmas::fuzz_schur_trace(&mut rng, 300).unwrap().passed());
    assert!(lemmas::fuzz_schur_arctan(&mut rng, 300).unwrap().passed());
    assert!(lemmas::fuzz_f_operator(&mut rng, 300).unwrap().passed());
}

fn arb_spectrum(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 1..=max_n).prop_map(|v| v.into_iter().map(f64::exp).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn congruence_invariance(seed in any::<u64>(), n in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chi = random_positive(&mut rng, n);
        let omega = random_positive(&mut rng, n);
        let s = random_invertible(&mut rng, n);
        let a = relative_spectrum(&chi, &omega).unwrap();
        let b = relative_spectrum(&chi.congruence(&s).unwrap(), &omega.congruence(&s).unwrap()).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-10 * x.max(1.0));
        }
    }

    #[test]
    fn cone_test_matches_subset_enumeration(v in arb_spectrum(6), cc in 0.05f64..20.0, slack in 0.0f64..0.5, pp in 0usize..6) {
        let s = SpectrumRel::new(&v).unwrap();
        let n = s.dim();
        let p = 1 + pp % n;
        let cone = ConeSpec::j(cc, slack).unwrap();
        let bound = cc - (n - p) as f64 * slack;
        let mut worst = f64::NEG_INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize == p {
                let sum: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| 1.0 / v[i]).sum();
                worst = worst.max(sum);
            }
        }
        let tol = 1e-12 * bound.abs().max(1.0);
        prop_assert_eq!(cone_test_j(&s, &cone, p, false).unwrap(), worst <= bound + tol);
        prop_assert_eq!(cone_test_j(&s, &cone, p, true).unwrap(), worst < bound - tol);
    }

    #[test]
    fn strict_cone_test_agrees_with_p_level(v in arb_spectrum(6), cc in 0.05f64..20.0) {
        let s = SpectrumRel::new(&v).unwrap();
        prop_assume!(s.dim() >= 2);
        let n = s.dim();
        let cone = ConeSpec::j(cc, 0.0).unwrap();
        let gap = cc - p_level(&s);
        prop_assume!(gap.abs() > 1e-9 * cc.max(1.0));
        prop_assert_eq!(cone_test_j(&s, &cone, n - 1, true).unwrap(), gap > 0.0);
    }

    #[test]
    fn truncation_shifts_p_level_by_at_most_bound(v in arb_spectrum(6), cap in 0.05f64..30.0) {
        let s = SpectrumRel::new(&v).unwrap();
        let t = truncate_spectrum(&s, cap).unwrap();
        let bound = (s.dim() as f64 - 1.0) / cap;
        prop_assert!(p_level(&t) - p_level(&s) <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn nondegeneracy_margin_is_positive(v in arb_spectrum(5), u in 0.0f64..1.0) {
        let s = SpectrumRel::new(&v).unwrap();
        let n = s.dim();
        // choose f, then c from the equation; keep only admissible pairs
        let prod = s.product();
        let f = (u - 0.5) * prod;
        let cc = trace_relative(&s) + f / prod;
        prop_assume!(cc > 0.0);
        prop_assume!(f > j_f_floor(n, cc));
        prop_assume!(p_level(&s) <= cc);
        prop_assert!(j_cone_margin(&s, cc) > 0.0);
    }
}
