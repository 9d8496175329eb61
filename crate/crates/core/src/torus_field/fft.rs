//! Multi-dimensional FFT over the torus grid and Fourier-symbol application.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::TorusGeometry;

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(len: usize) -> PlanPair {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(len)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(len), planner.plan_fft_inverse(len))
        })
        .clone()
}

/// In-place transform over all `2n` axes. The inverse is normalized so that
/// `inverse(forward(x)) = x`.
pub(crate) fn fft_nd(geom: &TorusGeometry, buf: &mut [Complex64], inverse: bool) {
    let big_n = geom.grid();
    let dims = geom.real_dims();
    let (fwd, inv) = plans(big_n);
    let plan = if inverse { inv } else { fwd };
    let total = buf.len();
    debug_assert_eq!(total, geom.len());

    // contiguous last axis: every chunk of N is one line
    buf.par_chunks_mut(big_n * 64.min(total / big_n).max(1)).for_each(|chunk| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(chunk, &mut scratch);
    });

    // strided axes: transpose each (N x stride) slab, transform rows, transpose back
    let mut stride = big_n;
    for _axis in (0..dims - 1).rev() {
        let block = big_n * stride;
        buf.par_chunks_mut(block).for_each(|slab| {
            let mut t = vec![Complex64::new(0.0, 0.0); block];
            for r in 0..big_n {
                for c in 0..stride {
                    t[c * big_n + r] = slab[r * stride + c];
                }
            }
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            plan.process_with_scratch(&mut t, &mut scratch);
            for r in 0..big_n {
                for c in 0..stride {
                    slab[r * stride + c] = t[c * big_n + r];
                }
            }
        });
        stride *= big_n;
    }

    if inverse {
        let s = 1.0 / total as f64;
        buf.par_iter_mut().for_each(|z| *z *= s);
    }
}

/// Signed integer frequency of grid index `k`; `None` at the Nyquist index.
#[inline]
pub(crate) fn signed_freq(k: usize, big_n: usize) -> Option<f64> {
    let half = big_n / 2;
    if k == half {
        None
    } else if k < half {
        Some(k as f64)
    } else {
        Some(k as f64 - big_n as f64)
    }
}

/// Complex frequencies `zeta_j = l_j + i k_j` of a flat mode index, where
/// `k_j` and `l_j` are the frequencies along `x_j` and `y_j`.
/// Returns `false` when any axis sits at the Nyquist index.
#[inline]
pub(crate) fn mode_zeta(geom: &TorusGeometry, mut idx: usize, zeta: &mut [Complex64]) -> bool {
    let big_n = geom.grid();
    let n = geom.n();
    let mut ok = true;
    // row-major over (x1, y1, ..., xn, yn): peel digits from the last axis
    for j in (0..n).rev() {
        let ly = idx % big_n;
        idx /= big_n;
        let kx = idx % big_n;
        idx /= big_n;
        match (signed_freq(kx, big_n), signed_freq(ly, big_n)) {
            (Some(k), Some(l)) => zeta[j] = Complex64::new(l, k),
            _ => {
                ok = false;
                zeta[j] = Complex64::new(0.0, 0.0);
            }
        }
    }
    ok
}

/// Multiplies a spectrum by `symbol(zeta)` pointwise; Nyquist modes are set to zero.
pub(crate) fn apply_symbol<F>(geom: &TorusGeometry, buf: &mut [Complex64], symbol: F)
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    let n = geom.n();
    const CHUNK: usize = 4096;
    buf.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let mut zeta = [Complex64::new(0.0, 0.0); 3];
        for (o, z) in chunk.iter_mut().enumerate() {
            if mode_zeta(geom, c * CHUNK + o, &mut zeta[..n]) {
                *z *= symbol(&zeta[..n]);
            } else {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    });
}

pub(crate) fn to_complex(values: &[f64]) -> Vec<Complex64> {
    values.par_iter().map(|&v| Complex64::new(v, 0.0)).collect()
}
