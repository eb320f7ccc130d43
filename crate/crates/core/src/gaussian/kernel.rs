//! The Volterra kernel `K_H` with `W_H(t) = ∫₀ᵗ K_H(t, s) dB_s`.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use super::special::{hyp2f1, rgamma};
use super::check_hurst;
use crate::error::{Error, Result};

/// `V_H = Γ(2 − 2H) cos(πH) / (πH(1 − 2H))`, the variance at time one of
/// the unnormalised kernel integral; `V_{1/2} = 1`.
pub fn kernel_variance(h: f64) -> f64 {
    if h == 0.5 {
        1.0
    } else {
        gamma(2.0 - 2.0 * h) * (PI * h).cos() / (PI * h * (1.0 - 2.0 * h))
    }
}

fn check_args(t: f64, s: f64, h: f64) -> Result<()> {
    check_hurst(h)?;
    if !(s > 0.0 && s < t && t.is_finite()) {
        return Err(Error::Domain(format!("kernel needs 0 < s < t, got s = {s}, t = {t}")));
    }
    Ok(())
}

/// `K_H(t, s) = c_H (t − s)^{H−½} / Γ(H + ½) · ₂F₁(H − ½, ½ − H; H + ½; 1 − t/s)`
/// with `c_H = V_H^{−1/2}`, so that `∫₀^{s∧t} K_H(t,u) K_H(s,u) du` is the
/// fBm covariance.
pub fn kernel_k(t: f64, s: f64, h: f64) -> Result<f64> {
    check_args(t, s, h)?;
    let f = hyp2f1(h - 0.5, 0.5 - h, h + 0.5, 1.0 - t / s)?;
    Ok(kernel_variance(h).powf(-0.5) * (t - s).powf(h - 0.5) * rgamma(h + 0.5) * f)
}

/// `∂K_H/∂t (t, s) = c_H (t/s)^{H−½} (t − s)^{H−3/2} / Γ(H − ½)`.
pub fn kernel_dt(t: f64, s: f64, h: f64) -> Result<f64> {
    check_args(t, s, h)?;
    Ok(kernel_variance(h).powf(-0.5) * (t / s).powf(h - 0.5) * (t - s).powf(h - 1.5) * rgamma(h - 0.5))
}

/// `∫₀^{s∧t} K_H(t, u) K_H(s, u) du` by double-exponential quadrature, which
/// never samples the endpoints where the integrand may be singular.
pub fn kernel_covariance(s: f64, t: f64, h: f64) -> Result<f64> {
    check_hurst(h)?;
    let upper = s.min(t);
    if !(upper > 0.0) || s.max(t) > 1.0 {
        return Err(Error::Domain(format!("kernel covariance needs 0 < s, t ≤ 1, got ({s}, {t})")));
    }
    let integrand = |u: f64| {
        if u <= 0.0 || u >= upper {
            return 0.0;
        }
        match (kernel_k(t, u, h), kernel_k(s, u, h)) {
            (Ok(a), Ok(b)) => a * b,
            _ => 0.0,
        }
    };
    let out = quadrature::integrate(integrand, 0.0, upper, 1e-9);
    if !out.integral.is_finite() {
        return Err(Error::Numeric(format!("kernel quadrature failed at (s, t) = ({s}, {t})")));
    }
    Ok(out.integral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::fbm_covariance;

    // (H, t, s, K_H(t, s), ∂_t K_H(t, s)) from 40-digit arithmetic
    const REFERENCE: [(f64, f64, f64, f64, f64); 9] = [
        (0.4, 0.8, 0.3, 0.956_893_988_071_718_4, -0.171_149_952_621_223_98),
        (0.4, 1.0, 0.01, 0.998_174_909_821_318, -0.056_187_789_559_855_944),
        (0.4, 0.5, 0.49, 1.396_170_993_326_728_5, -13.930_389_793_552_498),
        (0.3, 0.8, 0.3, 0.890_465_447_648_502_5, -0.275_780_399_110_661_37),
        (0.3, 1.0, 0.01, 1.177_749_211_685_915, -0.058_851_686_645_745_68),
        (0.3, 0.5, 0.49, 1.836_249_527_602_262_4, -36.539_816_545_538_954),
        (0.45, 0.8, 0.3, 0.981_435_947_337_451_6, -0.093_142_549_625_241_14),
        (0.45, 1.0, 0.01, 0.975_187_521_220_474_5, -0.037_926_966_555_955_68),
        (0.45, 0.5, 0.49, 1.189_647_404_785_157, -5.941_914_068_951_007),
    ];

    #[test]
    fn matches_high_precision_values() {
        for (h, t, s, k, dk) in REFERENCE {
            assert!(((kernel_k(t, s, h).unwrap() - k) / k).abs() < 1e-10, "K at H={h}, ({t}, {s})");
            assert!(((kernel_dt(t, s, h).unwrap() - dk) / dk).abs() < 1e-10, "dK at H={h}, ({t}, {s})");
        }
    }

    #[test]
    fn brownian_kernel_is_one() {
        for (t, s) in [(0.9, 0.1), (0.5, 0.49), (1.0, 1e-6)] {
            assert!((kernel_k(t, s, 0.5).unwrap() - 1.0).abs() < 1e-15);
            assert_eq!(kernel_dt(t, s, 0.5).unwrap(), 0.0);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let (t, s) = (0.8, 0.3);
        for h in [0.3, 0.4] {
            let step = 1e-5;
            let fd = (kernel_k(t + step, s, h).unwrap() - kernel_k(t - step, s, h).unwrap()) / (2.0 * step);
            let exact = kernel_dt(t, s, h).unwrap();
            assert!(((fd - exact) / exact).abs() < 1e-5);
        }
    }

    #[test]
    fn quadrature_reproduces_covariance() {
        for h in [0.3, 0.4, 0.5] {
            for (s, t) in [(0.25, 0.75), (0.5, 1.0), (0.6, 0.6)] {
                let q = kernel_covariance(s, t, h).unwrap();
                assert!((q - fbm_covariance(s, t, h)).abs() < 1e-3, "H={h} ({s},{t}): {q}");
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(kernel_k(0.3, 0.3, 0.4), Err(Error::Domain(_))));
        assert!(matches!(kernel_k(0.3, 0.0, 0.4), Err(Error::Domain(_))));
        assert!(matches!(kernel_dt(0.3, 0.5, 0.4), Err(Error::Domain(_))));
        assert!(matches!(kernel_k(0.5, 0.3, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn normalisation_examples() {
        assert_eq!(kernel_variance(0.5), 1.0);
        assert!((kernel_variance(0.4) - 1.128_92).abs() < 1e-4);
        assert!((kernel_variance(0.3) - 1.383_38).abs() < 1e-4);
        assert!((kernel_variance(0.4999999) - 1.0).abs() < 1e-5);
    }
}
