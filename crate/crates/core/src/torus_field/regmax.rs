//! Regularized maximum `M_eta(t1, t2) = E[max(t1 + eta h1, t2 + eta h2)]`,
//! with `h1, h2` independent with density `theta(h) = (315/256)(1 - h^2)^4` on `[-1, 1]`.
//!
//! The inner expectation over `h2` is done in closed form; the outer one is a
//! polynomial on each piece between kinks, so Gauss–Legendre is exact.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use rayon::prelude::*;

use super::ScalarField;
use crate::error::{Error, Result};

const C: f64 = 315.0 / 256.0;

fn theta(h: f64) -> f64 {
    let s = 1.0 - h * h;
    C * s * s * s * s
}

/// `P(h <= a)`.
fn cdf(a: f64) -> f64 {
    if a <= -1.0 {
        return 0.0;
    }
    if a >= 1.0 {
        return 1.0;
    }
    let a2 = a * a;
    0.5 + C * a * (1.0 + a2 * (-4.0 / 3.0 + a2 * (6.0 / 5.0 + a2 * (-4.0 / 7.0 + a2 / 9.0))))
}

/// `int_a^1 h theta(h) dh`.
fn upper_first_moment(a: f64) -> f64 {
    if a.abs() >= 1.0 {
        return 0.0;
    }
    let s = 1.0 - a * a;
    C * s.powi(5) / 10.0
}

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(12).expect("nonzero")))
}

/// `G(d) = E[max(d + h1, h2)]`, so that `M_eta(t1, t2) = t2 + eta G((t1 - t2)/eta)`.
fn g(d: f64) -> f64 {
    if d >= 2.0 {
        return d;
    }
    if d <= -2.0 {
        return 0.0;
    }
    // E[max(d + h1, h2)] = E[h2] + E[(a - h2)_+] with a = d + h1, and
    // E[(a - h2)_+] = a C(a) + int_a^1 h theta = a - a(1 - C(a)) + m1(a)
    let integrand = |h: f64| {
        let a = h + d;
        theta(h) * (upper_first_moment(a) - a * (1.0 - cdf(a)))
    };
    let mut cuts = vec![-1.0];
    for k in [-1.0 - d, 1.0 - d] {
        if k > -1.0 && k < 1.0 {
            cuts.push(k);
        }
    }
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    let q = rule();
    d + cuts.windows(2).map(|w| q.integrate(w[0], w[1], integrand)).sum::<f64>()
}

/// Pointwise regularized maximum.
pub fn regularized_max_scalar(t1: f64, t2: f64, eta: f64) -> f64 {
    t2 + eta * g((t1 - t2) / eta)
}

/// Smooth maximum of two fields; equals `max(f1, f2)` where `|f1 - f2| >= 2 eta`
/// and lies in `[max, max + eta]` everywhere.
pub fn regularized_max(f1: &ScalarField, f2: &ScalarField, eta: f64) -> Result<ScalarField> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Usage(format!("eta must be positive, got {eta}")));
    }
    f1.geometry().check_same(f2.geometry())?;
    let values = f1
        .values()
        .par_iter()
        .zip(f2.values())
        .map(|(&a, &b)| regularized_max_scalar(a, b, eta))
        .collect();
    ScalarField::new(*f1.geometry(), values)
}
