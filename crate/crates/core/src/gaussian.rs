//! Standard normal reference law.
//!
//! Both tails go through `erfc`, so `cdf(-t)` and `sf(t)` keep full relative
//! precision far out in the tails. The partial integrals
//! `G(t) = ∫_{-∞}^t Φ(u) du = tΦ(t) + φ(t)` and its mirror `G(-t)` are what
//! the exact step-CDF distance integration is built on.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Φ(t).
#[inline]
pub fn cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t * FRAC_1_SQRT_2)
}

/// 1 − Φ(t), computed without cancellation.
#[inline]
pub fn sf(t: f64) -> f64 {
    0.5 * libm::erfc(t * FRAC_1_SQRT_2)
}

/// φ(t).
#[inline]
pub fn pdf(t: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * t * t).exp()
}

/// ∫_{-∞}^t Φ(u) du.
#[inline]
pub fn partial_integral(t: f64) -> f64 {
    t * cdf(t) + pdf(t)
}

/// ∫_t^∞ (1 − Φ(u)) du, equal to `partial_integral(-t)`.
#[inline]
pub fn upper_partial_integral(t: f64) -> f64 {
    pdf(t) - t * sf(t)
}

/// Checked Φ: rejects non-finite input.
pub fn gaussian_cdf(t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("gaussian_cdf: non-finite argument {t}")));
    }
    Ok(cdf(t))
}

/// Φ^{-1}(p) for p in (0, 1). Returns ∓∞ at the endpoints.
///
/// Acklam's rational approximation followed by two Halley steps against the
/// erfc-based cdf, which brings the result to a few ulps.
pub fn inv_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    for _ in 0..2 {
        // residual in whichever tail is numerically safe
        let e = if x < 0.0 { cdf(x) - p } else { (1.0 - p) - sf(x) };
        let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
        let step = u / (1.0 + 0.5 * x * u);
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert_eq!(cdf(0.0), 0.5);
        assert!((cdf(40.0) - 1.0).abs() <= 1e-15);
        // high-precision erf evaluation: Φ(1) = 0.84134474606854293...
        assert!((cdf(1.0) - 0.841_344_746_068_542_9).abs() <= 1e-15);
        assert!((cdf(-1.96) - 0.024_997_895_148_220_435).abs() <= 1e-16);
    }

    #[test]
    fn checked_cdf_rejects_non_finite() {
        assert!(gaussian_cdf(f64::NAN).is_err());
        assert!(gaussian_cdf(f64::INFINITY).is_err());
        assert_eq!(gaussian_cdf(0.0).unwrap(), 0.5);
    }

    #[test]
    fn symmetry_and_monotonicity() {
        let mut prev = 0.0;
        for i in -800..=800 {
            let t = i as f64 * 0.01;
            assert!((cdf(t) + cdf(-t) - 1.0).abs() <= 1e-15, "t={t}");
            assert!(cdf(t) >= prev);
            prev = cdf(t);
        }
    }

    #[test]
    fn partial_integral_derivative_is_cdf() {
        let h = 1e-5;
        for i in -60..=60 {
            let t = i as f64 * 0.1;
            let fd = (partial_integral(t + h) - partial_integral(t - h)) / (2.0 * h);
            assert!((fd - cdf(t)).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn upper_partial_integral_mirrors() {
        for i in -50..=50 {
            let t = i as f64 * 0.17;
            let a = upper_partial_integral(t);
            let b = partial_integral(-t);
            assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn inverse_round_trips() {
        for &p in &[1e-300, 1e-20, 1e-8, 0.001, 0.024, 0.1, 0.3, 0.5, 0.77, 0.975, 0.999_999] {
            let x = inv_cdf(p);
            let back = cdf(x);
            assert!(((back - p) / p).abs() < 1e-13, "p={p} x={x} back={back}");
        }
        assert_eq!(inv_cdf(0.0), f64::NEG_INFINITY);
        assert_eq!(inv_cdf(1.0), f64::INFINITY);
    }
}
