//! Linearized Newton system solved in Fourier space.
//!
//! The unknown is the spectrum of a real function, so all Krylov scalars are
//! real and the inner product is `Re sum conj(a_k) b_k`. The operator is
//! `(L - P0)` restricted to resolved modes, with the identity on Nyquist
//! modes, where `L u = tr(B ddbar u)` and `P0` takes the grid mean. The
//! preconditioner is the exact inverse of the same operator with `B`
//! replaced by its grid average.

use num_complex::Complex64;
use rayon::prelude::*;

use super::equations::{contract, Evaluation};
use crate::torus_field::fft::{fft_nd, mode_zeta, to_complex};
use crate::torus_field::{hessian_from_spectrum, TorusGeometry};

const CHUNK: usize = 4096;

fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    let chunks = a.len().div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let hi = ((c + 1) * CHUNK).min(a.len());
            (c * CHUNK..hi).map(|i| a[i].re * b[i].re + a[i].im * b[i].im).sum()
        })
        .collect();
    partial.iter().sum()
}

fn norm(a: &[Complex64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += s * x`
fn axpy(y: &mut [Complex64], s: f64, x: &[Complex64]) {
    y.par_iter_mut().zip(x).for_each(|(y, x)| *y += x * s);
}

pub(crate) struct SpectralOperator<'a> {
    geom: TorusGeometry,
    eval: &'a Evaluation,
    /// `1 / symbol` per mode.
    inv_symbol: Vec<f64>,
    nyquist: Vec<bool>,
}

impl<'a> SpectralOperator<'a> {
    pub(crate) fn new(geom: TorusGeometry, eval: &'a Evaluation) -> Self {
        let n = geom.n();
        let nn = n * n;
        let len = geom.len();
        let mut mean = vec![0.0; nn];
        for (k, m) in mean.iter_mut().enumerate() {
            *m = crate::torus_field::det_sum(len, |p| eval.coeffs[p * nn + k]) / len as f64;
        }
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let (inv_symbol, nyquist): (Vec<f64>, Vec<bool>) = (0..len)
            .into_par_iter()
            .map(|idx| {
                let mut zeta = [Complex64::new(0.0, 0.0); 3];
                if !mode_zeta(&geom, idx, &mut zeta[..n]) {
                    return (1.0, true);
                }
                if idx == 0 {
                    return (-1.0, false);
                }
                let mut u = [0.0; 9];
                for i in 0..n {
                    u[i] = -pi2 * zeta[i].norm_sqr();
                    for j in (i + 1)..n {
                        let z = -pi2 * zeta[i] * zeta[j].conj();
                        let o = crate::torus_field::packed_offdiag(n, i, j);
                        u[o] = z.re;
                        u[o + 1] = z.im;
                    }
                }
                let s = contract(n, &mean, &u[..nn]);
                (if s.abs() > 1e-300 { 1.0 / s } else { 1.0 }, false)
            })
            .unzip();
        Self { geom, eval, inv_symbol, nyquist }
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.geom.n();
        let nn = n * n;
        let h = hessian_from_spectrum(&self.geom, x);
        let mut w: Vec<Complex64> = h
            .packed()
            .par_chunks(nn)
            .zip(self.eval.coeffs.par_chunks(nn))
            .map(|(u, b)| Complex64::new(contract(n, b, u), 0.0))
            .collect();
        fft_nd(&self.geom, &mut w, false);
        w.par_iter_mut().zip(x).zip(&self.nyquist).for_each(|((w, x), &nyq)| {
            if nyq {
                *w = *x;
            }
        });
        w[0] -= x[0];
        w
    }

    fn precondition(&self, x: &[Complex64]) -> Vec<Complex64> {
        x.par_iter().zip(&self.inv_symbol).map(|(z, s)| z * *s).collect()
    }

    /// Spectrum of the right-hand side with Nyquist modes removed.
    pub(crate) fn rhs(&self, b: &[f64]) -> Vec<Complex64> {
        let mut hat = to_complex(b);
        fft_nd(&self.geom, &mut hat, false);
        hat.par_iter_mut().zip(&self.nyquist).for_each(|(z, &nyq)| {
            if nyq {
                *z = Complex64::new(0.0, 0.0);
            }
        });
        hat
    }

    pub(crate) fn to_real(&self, mut x: Vec<Complex64>) -> Vec<f64> {
        fft_nd(&self.geom, &mut x, true);
        x.into_par_iter().map(|z| z.re).collect()
    }
}

pub(crate) struct KrylovOutcome {
    pub(crate) solution: Vec<Complex64>,
    pub(crate) iterations: usize,
}

/// Right-preconditioned BiCGSTAB from a zero initial guess.
pub(crate) fn bicgstab(op: &SpectralOperator<'_>, b: &[Complex64], tol: f64, max_iter: usize) -> KrylovOutcome {
    let len = b.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut x = vec![zero; len];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return KrylovOutcome { solution: x, iterations: 0 };
    }
    let mut r = b.to_vec();
    let r0 = r.clone();
    let mut p = vec![zero; len];
    let mut v = vec![zero; len];
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return KrylovOutcome { solution: x, iterations: it - 1 };
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        p.par_iter_mut().zip(&r).zip(&v).for_each(|((p, r), v)| *p = r + (*p - v * omega) * beta);
        let p_hat = op.precondition(&p);
        v = op.apply(&p_hat);
        let denom = dot(&r0, &v);
        if denom == 0.0 || !denom.is_finite() {
            return KrylovOutcome { solution: x, iterations: it - 1 };
        }
        alpha = rho / denom;
        let mut s = r.clone();
        axpy(&mut s, -alpha, &v);
        axpy(&mut x, alpha, &p_hat);
        let s_norm = norm(&s);
        if s_norm <= tol * b_norm {
            return KrylovOutcome { solution: x, iterations: it };
        }
        let s_hat = op.precondition(&s);
        let t = op.apply(&s_hat);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        axpy(&mut x, omega, &s_hat);
        r = s;
        axpy(&mut r, -omega, &t);
        let rel = norm(&r) / b_norm;
        if rel <= tol || omega == 0.0 {
            return KrylovOutcome { solution: x, iterations: it };
        }
    }
    KrylovOutcome { solution: x, iterations: max_iter }
}
