//! Regularized incomplete gamma functions.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const EPS: f64 = 1e-15;
const MAX_ITER: usize = 10_000;
const TINY: f64 = 1e-300;

/// `Q(a, x) = Γ(a, x) / Γ(a)`.
///
/// Series for `x < a + 1`, Lentz continued fraction otherwise.
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    check(a, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    Ok(continued_or_series_q(a, x))
}

/// `P(a, x) = 1 − Q(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> Result<f64> {
    check(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        Ok(series_p(a, x))
    } else {
        Ok(1.0 - continued_fraction_q(a, x))
    }
}

/// Complementary error function, via `erfc(x) = Q(½, x²)`.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let q = if x == 0.0 { 1.0 } else { continued_or_series_q(0.5, x * x) };
    if x < 0.0 {
        2.0 - q
    } else {
        q
    }
}

fn continued_or_series_q(a: f64, x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else if x < a + 1.0 {
        1.0 - series_p(a, x)
    } else {
        continued_fraction_q(a, x)
    }
}

fn check(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) || !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!("incomplete gamma needs a > 0, x >= 0; got a={a}, x={x}")));
    }
    Ok(())
}

fn log_prefactor(a: f64, x: f64) -> f64 {
    -x + a * x.ln() - ln_gamma(a)
}

fn series_p(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum * log_prefactor(a, x).exp()).min(1.0)
}

fn continued_fraction_q(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (log_prefactor(a, x).exp() * h).min(1.0)
}
