//! Convolution against a radial bump of radius `delta`.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{fft, HermitianField, ScalarField, TorusGeometry};
use crate::error::{Error, Result};

/// Radial profile: `1` on `[0, 1/4]`, a smooth monotone step down to `0` at
/// `t = 1`, and `0` beyond.
pub fn kernel_profile(t: f64) -> f64 {
    let t = t.abs();
    if t <= 0.25 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let u = (t - 0.25) / 0.75;
    let e = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let (a, b) = (e(u), e(1.0 - u));
    b / (a + b)
}

/// Fourier transform of the normalized, grid-sampled kernel. It is real
/// because the kernel is even.
pub(crate) fn kernel_transform(geom: &TorusGeometry, delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta < 0.25) {
        return Err(Error::Usage(format!("mollifier radius must lie in (0, 1/4), got {delta}")));
    }
    let d = geom.real_dims();
    let mut k: Vec<Complex64> = (0..geom.len())
        .into_par_iter()
        .map(|i| {
            let x = geom.coords(i);
            let r2: f64 = x
                .iter()
                .take(d)
                .map(|&c| {
                    // periodic minimal image of the offset
                    let s = if c >= 0.5 { c - 1.0 } else { c };
                    s * s
                })
                .sum();
            Complex64::new(kernel_profile(r2.sqrt() / delta), 0.0)
        })
        .collect();
    let total: f64 = super::det_sum(k.len(), |i| k[i].re);
    // the origin always carries weight one, so total >= 1; a delta below the
    // grid spacing leaves only the origin and mollify is the identity
    k.par_iter_mut().for_each(|z| *z /= total);
    fft::fft_nd(geom, &mut k, false);
    Ok(k.into_iter().map(|z| z.re).collect())
}

fn convolve(geom: &TorusGeometry, values: &[f64], khat: &[f64]) -> Vec<f64> {
    let mut b = fft::to_complex(values);
    fft::fft_nd(geom, &mut b, false);
    b.par_iter_mut().zip(khat).for_each(|(z, k)| *z *= *k);
    fft::fft_nd(geom, &mut b, true);
    b.into_iter().map(|z| z.re).collect()
}

/// Periodic convolution of `phi` with the radius-`delta` bump.
pub fn mollify(phi: &ScalarField, delta: f64) -> Result<ScalarField> {
    let geom = *phi.geometry();
    let khat = kernel_transform(&geom, delta)?;
    Ok(ScalarField::from_raw(geom, convolve(&geom, phi.values(), &khat)))
}

/// Componentwise mollification of matrix-valued data.
pub fn mollify_components(field: &HermitianField, delta: f64) -> Result<HermitianField> {
    let geom = *field.geometry();
    let khat = kernel_transform(&geom, delta)?;
    let nn = geom.n() * geom.n();
    let len = geom.len();
    let mut out = vec![0.0; len * nn];
    let mut comp = vec![0.0; len];
    for c in 0..nn {
        for p in 0..len {
            comp[p] = field.packed()[p * nn + c];
        }
        let conv = convolve(&geom, &comp, &khat);
        for p in 0..len {
            out[p * nn + c] = conv[p];
        }
    }
    Ok(HermitianField::from_packed(geom, out))
}
