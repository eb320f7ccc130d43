//! Gamma and Gauss hypergeometric functions on the real line.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

const MAX_TERMS: usize = 100_000;

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// `1 / Γ(x)`, zero at the poles `x = 0, −1, −2, …`.
pub fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

/// Partial sums of `Σ (a)_k (b)_k / ((c)_k k!) z^k` until the terms stop
/// contributing at machine precision.
pub fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if !sum.is_finite() {
            break;
        }
        if term == 0.0 || term.abs() <= 1e-17 * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::Numeric(format!(
        "2F1({a}, {b}; {c}; {z}) series did not converge in {MAX_TERMS} terms (last term {term:e}, partial sum {sum:e})"
    )))
}

/// `₂F₁(a, b; c; 1)` by Gauss's formula; requires `c − a − b > 0`.
fn gauss_at_one(a: f64, b: f64, c: f64) -> Result<f64> {
    if c - a - b <= 0.0 {
        return Err(Error::Domain(format!("2F1({a}, {b}; {c}; 1) diverges since c − a − b ≤ 0")));
    }
    Ok(gamma(c) * gamma(c - a - b) * rgamma(c - a) * rgamma(c - b))
}

/// `z ∈ (½, 1)`: expansion around `z = 1` through `1 − z`.
fn around_one(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let s = c - a - b;
    if s == s.round() {
        return Err(Error::Unsupported(format!("2F1 near z = 1 with integer c − a − b = {s}")));
    }
    let w = 1.0 - z;
    let first = gamma(c) * gamma(s) * rgamma(c - a) * rgamma(c - b) * hyp2f1_series(a, b, 1.0 - s, w)?;
    let second = w.powf(s) * gamma(c) * gamma(-s) * rgamma(a) * rgamma(b) * hyp2f1_series(c - a, c - b, 1.0 + s, w)?;
    Ok(first + second)
}

/// Gauss hypergeometric function `₂F₁(a, b; c; z)` for real `z ≤ 1`.
///
/// The power series is used for `|z| ≤ ½`. Negative arguments beyond `−½`
/// go through Pfaff's transformation
/// `F(a,b;c;z) = (1−z)^{−a} F(a, c−b; c; z/(z−1))`, and arguments in
/// `(½, 1)` through the connection formula around `z = 1`.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if ![a, b, c, z].iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("2F1 arguments must be finite".into()));
    }
    if is_nonpositive_integer(c) {
        return Err(Error::Domain(format!("2F1 undefined for c = {c}")));
    }
    if a == 0.0 || b == 0.0 || z == 0.0 {
        return Ok(1.0);
    }
    if z > 1.0 {
        return Err(Error::Domain(format!("2F1 only implemented for z ≤ 1, got {z}")));
    }
    if z == 1.0 {
        return gauss_at_one(a, b, c);
    }
    if z.abs() <= 0.5 {
        return hyp2f1_series(a, b, c, z);
    }
    if z > 0.5 {
        return around_one(a, b, c, z);
    }
    let w = z / (z - 1.0);
    let scale = (1.0 - z).powf(-a);
    let inner = if w <= 0.5 { hyp2f1_series(a, c - b, c, w)? } else { around_one(a, c - b, c, w)? };
    Ok(scale * inner)
}
