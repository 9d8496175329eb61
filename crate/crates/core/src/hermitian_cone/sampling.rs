//! Random generators for the property suites.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{ComplexMatrix, HermitianMatrix, SpectrumRel};

fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Complex Gaussian matrix with i.i.d. standard entries.
pub fn random_complex<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let data: Vec<Complex64> = (0..rows * cols).map(|_| gaussian_complex(rng)).collect();
    ComplexMatrix::from_rows(rows, cols, &data).expect("sized by construction")
}

/// `G G^H / n + shift I` with a random log-uniform shift in `[1e-3, 1]`.
///
/// The shift keeps the condition number moderate while still producing
/// strongly anisotropic samples.
pub fn random_positive<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    let g = random_complex(rng, n, n);
    let ggh = g.matmul(&g.adjoint()).expect("square");
    let shift = 10f64.powf(rng.gen_range(-3.0..0.0));
    let mut data = ggh.as_slice().to_vec();
    for z in data.iter_mut() {
        *z /= n as f64;
    }
    for i in 0..n {
        data[i * n + i] += shift;
    }
    HermitianMatrix::new(n, &data).expect("Hermitian by construction")
}

/// Random positive matrix strictly above the identity.
pub fn random_above_identity<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    let p = random_positive(rng, n);
    let scale = 10f64.powf(rng.gen_range(-1.0..1.5));
    p.scale(scale).add(&HermitianMatrix::identity(n)).expect("same size")
}

/// Invertible random congruence matrix.
pub fn random_invertible<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let mut m = random_complex(rng, n, n);
    for i in 0..n {
        m[(i, i)] += Complex64::new(2.0 * n as f64, 0.0);
    }
    m
}

/// Spectrum with log-uniform entries in `[lo, hi]`.
pub fn random_spectrum<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> SpectrumRel {
    let (a, b) = (lo.ln(), hi.ln());
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(a..b).exp()).collect();
    SpectrumRel::new(&v).expect("positive by construction")
}

/// A point of the dHYM region for `n >= 2`, by rejection on the angles
/// `arctan(1/lambda_i)`, all of which must lie below `theta0`.
pub fn random_dhym_point<R: Rng + ?Sized>(rng: &mut R, n: usize, theta0: f64) -> SpectrumRel {
    loop {
        let mut angles: Vec<f64> = (0..n).map(|_| theta0 * rng.gen_range(0.0..1.0f64)).collect();
        angles.sort_by(f64::total_cmp);
        let loo: f64 = angles[1..].iter().sum();
        if loo < theta0 * (1.0 - 1e-9) && angles[0] > 1e-9 {
            let lambda: Vec<f64> = angles.iter().map(|a| 1.0 / a.tan()).collect();
            return SpectrumRel::new(&lambda).expect("positive by construction");
        }
    }
}
