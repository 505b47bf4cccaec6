//! Closed-form characteristic-function moduli and the smoothness integral
//! `l = 2∫₀^∞ t|φ(t)| dt`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::two_scale_example_spec;
use crate::quadrature::integrate;

/// Doubling segments before giving up on a certified tail.
pub const MAX_SEGMENTS: usize = 200;
const MAX_PANELS_PER_SEGMENT: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum CharFnModel {
    /// `|φ(t)| = exp(−s²t²/2)`.
    Gaussian { scale: f64 },
    /// Standardized two-scale sum:
    /// `|φ(t)| = |χ(t/(√n σ))|^n · cos²(t n^{−α}/σ)`.
    TwoScale { n: usize, alpha: f64, a: f64, sigma: f64 },
    /// Same row with the sign-bridge factor dropped: `|χ(t/(√n σ))|^n`.
    TwoScaleBulk { n: usize, a: f64, sigma: f64 },
}

/// Modulus of the standard normal characteristic function.
pub fn gaussian_cf_model() -> CharFnModel {
    CharFnModel::Gaussian { scale: 1.0 }
}

/// `|φ(t)| = exp(−s²t²/2)`, the law of `sZ`.
pub fn scaled_gaussian_cf_model(s: f64) -> Result<CharFnModel> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("scale must be > 0, got {s}")));
    }
    Ok(CharFnModel::Gaussian { scale: s })
}

/// Characteristic-function modulus of `S/σ` for the two-scale example.
pub fn two_scale_cf(n: usize, alpha: f64, a: f64) -> Result<CharFnModel> {
    let spec = two_scale_example_spec(n, alpha, a)?;
    Ok(CharFnModel::TwoScale {
        n,
        alpha,
        a,
        sigma: spec.sigma().expect("exact sigma"),
    })
}

/// `E cos(τV)` for `V` uniform on `±[1−a, 1]`:
/// `(sin τ − sin((1−a)τ))/(τa) = cos(τ(2−a)/2)·sinc(τa/2)`.
pub fn two_scale_coordinate_cf(tau: f64, a: f64) -> f64 {
    let h = 0.5 * tau * a;
    let sinc = if h.abs() < 1e-8 { 1.0 - h * h / 6.0 } else { h.sin() / h };
    (0.5 * tau * (2.0 - a)).cos() * sinc
}

impl CharFnModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CharFnModel::Gaussian { scale } if !(scale > 0.0) => Err(Error::Domain("scale must be > 0".into())),
            CharFnModel::TwoScale { n, a, sigma, .. } | CharFnModel::TwoScaleBulk { n, a, sigma } => {
                if n < 1 || !(a > 0.0 && a < 1.0) || !(sigma > 0.0) {
                    Err(Error::Domain("two-scale model needs n >= 1, a in (0,1), sigma > 0".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn coordinate_scale(n: usize, sigma: f64) -> f64 {
        1.0 / ((n as f64).sqrt() * sigma)
    }

    /// `|φ(t)|`.
    pub fn abs_cf(&self, t: f64) -> f64 {
        match *self {
            CharFnModel::Gaussian { scale } => (-0.5 * scale * scale * t * t).exp(),
            CharFnModel::TwoScale { n, alpha, a, sigma } => {
                let bulk = Self::bulk(n, a, sigma, t);
                if bulk == 0.0 {
                    return 0.0;
                }
                let bridge = (t * (n as f64).powf(-alpha) / sigma).cos();
                bulk * bridge * bridge
            }
            CharFnModel::TwoScaleBulk { n, a, sigma } => Self::bulk(n, a, sigma, t),
        }
    }

    fn bulk(n: usize, a: f64, sigma: f64, t: f64) -> f64 {
        let chi = two_scale_coordinate_cf(t * Self::coordinate_scale(n, sigma), a).abs();
        if chi == 0.0 {
            0.0
        } else {
            (n as f64 * chi.ln()).exp()
        }
    }

    /// Start of the region where [`Self::envelope`] is a useful bound
    /// (it is valid for every `t ≥ 0`).
    pub fn env_start(&self) -> f64 {
        match *self {
            CharFnModel::Gaussian { .. } => 0.0,
            CharFnModel::TwoScale { n, a, sigma, .. } | CharFnModel::TwoScaleBulk { n, a, sigma } => {
                2.0 / (a * Self::coordinate_scale(n, sigma))
            }
        }
    }

    /// Upper bound on `|φ(t)|`.
    pub fn envelope(&self, t: f64) -> f64 {
        match *self {
            CharFnModel::Gaussian { .. } => self.abs_cf(t),
            CharFnModel::TwoScale { n, a, sigma, .. } | CharFnModel::TwoScaleBulk { n, a, sigma } => {
                let tau = t * Self::coordinate_scale(n, sigma);
                let per = (2.0 / (tau * a)).min(1.0);
                per.powi(n as i32)
            }
        }
    }

    /// `∫_T^∞ t·envelope(t) dt` for `T ≥ env_start`, or `None` when the
    /// envelope is not integrable against `t`.
    pub fn envelope_tail(&self, t: f64) -> Option<f64> {
        match *self {
            CharFnModel::Gaussian { scale } => Some((-0.5 * scale * scale * t * t).exp() / (scale * scale)),
            CharFnModel::TwoScale { n, .. } | CharFnModel::TwoScaleBulk { n, .. } => {
                if n <= 2 {
                    return None;
                }
                let t0 = self.env_start();
                let t = t.max(t0);
                let nf = n as f64;
                Some((nf * t0.ln() + (2.0 - nf) * t.ln() - (nf - 2.0).ln()).exp())
            }
        }
    }

    /// Natural length scale of the integrand.
    fn initial_step(&self) -> f64 {
        match *self {
            CharFnModel::Gaussian { scale } => 1.0 / scale,
            CharFnModel::TwoScale { n, a, sigma, .. } | CharFnModel::TwoScaleBulk { n, a, sigma } => {
                let ev2 = (1.0 - (1.0 - a).powi(3)) / (3.0 * a);
                let s = (ev2 * n as f64).sqrt() * Self::coordinate_scale(n, sigma);
                1.0 / s
            }
        }
    }

    /// Zeros of `φ` in `(lo, hi)` (kinks of `t|φ(t)|`), at most `cap` of them.
    pub fn kinks(&self, lo: f64, hi: f64, cap: usize) -> Vec<f64> {
        let mut out = Vec::new();
        if let CharFnModel::TwoScale { n, a, sigma, .. } | CharFnModel::TwoScaleBulk { n, a, sigma } = *self {
            let to_t = 1.0 / Self::coordinate_scale(n, sigma);
            // cos(τ(2−a)/2) = 0 and sin(τa/2) = 0
            for (first, step) in [(PI / (2.0 - a), 2.0 * PI / (2.0 - a)), (2.0 * PI / a, 2.0 * PI / a)] {
                let mut k = ((lo / to_t - first) / step).ceil().max(0.0);
                loop {
                    let t = (first + k * step) * to_t;
                    if t >= hi || out.len() >= cap {
                        break;
                    }
                    if t > lo {
                        out.push(t);
                    }
                    k += 1.0;
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

/// `l = 2∫₀^∞ t|φ(t)| dt`.
///
/// Integrates over doubling segments `[0, h], [h, 2h], [2h, 4h], …` and stops
/// once the envelope tail beyond the current end is at most
/// `rel_tol·(current value)`.
pub fn compute_l(model: &CharFnModel, rel_tol: f64) -> Result<f64> {
    model.validate()?;
    if !(rel_tol > 0.0) {
        return Err(Error::Domain("rel_tol must be > 0".into()));
    }
    let f = |t: f64| t * model.abs_cf(t);
    let mut lo = 0.0;
    let mut hi = model.initial_step();
    let mut total = 0.0;
    for _ in 0..MAX_SEGMENTS {
        let mut pts = vec![lo];
        pts.extend(model.kinks(lo, hi, 64));
        pts.push(hi);
        let guess = if total > 0.0 { total } else { crate::quadrature::gk15(&f, lo, hi).0.abs() };
        let abs_tol = 0.05 * rel_tol * guess;
        let r = integrate(f, &pts, abs_tol.max(f64::MIN_POSITIVE), 0.0, MAX_PANELS_PER_SEGMENT);
        if !r.converged {
            return Err(Error::DivergenceSuspected(format!(
                "quadrature on [{lo}, {hi}] did not converge (err {:.3e})",
                r.abs_err
            )));
        }
        total += r.value;
        if hi >= model.env_start() {
            match model.envelope_tail(hi) {
                Some(tail) if total > 0.0 && tail <= rel_tol * total => return Ok(2.0 * total),
                Some(_) => {}
                None => {
                    return Err(Error::DivergenceSuspected(
                        "envelope not integrable against t; l may be infinite".into(),
                    ))
                }
            }
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(Error::DivergenceSuspected(format!(
        "tail bound not reached within {MAX_SEGMENTS} segments"
    )))
}
