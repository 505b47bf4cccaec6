//! Shared domain types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginal::MarginalModel;

/// Generator family of one triangular-array row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// `X_i = Σ_{j=0}^{w-1} weights[j] · ε_{i+j}` with iid innovations.
    MovingWindow {
        innovation: MarginalModel,
        weights: Vec<f64>,
    },
    /// `m·t` iid heavy-tailed draws followed by `m` copies of one more draw.
    HeavyTail { m: usize, t: usize },
    /// `X_i = n^{-1/2} V_i + n^{-α} (T_i − T_{i−1})`, 1-dependent.
    TwoScale { n: usize, alpha: f64, a: f64 },
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::MovingWindow { .. } => "moving-window",
            Family::HeavyTail { .. } => "heavy-tail",
            Family::TwoScale { .. } => "two-scale",
        }
    }
}

/// Declarative description of one row `(X_1, …, X_N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    /// N
    pub n_vars: usize,
    /// m, the dependence range
    pub dep_range: usize,
    pub family: Family,
    /// Exact E(S²), when known.
    pub sigma2: Option<f64>,
    /// γ with max_i |X_i| ≤ σ γ almost surely, when known.
    pub max_abs_over_sigma: Option<f64>,
}

impl ArraySpec {
    pub fn validate(&self) -> Result<()> {
        if self.dep_range < 1 || self.dep_range > self.n_vars {
            return Err(Error::InvalidSpec(format!(
                "need 1 <= m <= N, got m={} N={}",
                self.dep_range, self.n_vars
            )));
        }
        if let Some(s2) = self.sigma2 {
            if !(s2 > 0.0) || !s2.is_finite() {
                return Err(Error::InvalidSpec(format!("sigma2 must be > 0, got {s2}")));
            }
        }
        if let Some(g) = self.max_abs_over_sigma {
            if !(g >= 0.0) {
                return Err(Error::InvalidSpec(format!("max_abs_over_sigma must be >= 0, got {g}")));
            }
        }
        Ok(())
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma2.map(f64::sqrt)
    }

    /// `c_n = 2 m γ`, the smallest truncation level at which `U(c/2)` can be
    /// certified zero from the a.s. bound.
    pub fn bounded_case_c(&self) -> Option<f64> {
        self.max_abs_over_sigma
            .map(|g| 2.0 * self.dep_range as f64 * g)
    }
}

/// `k × N` matrix of realizations, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub n_vars: usize,
    pub k: usize,
    pub data: Vec<f64>,
    pub seed_root: u64,
    pub replicate_seeds: Vec<u64>,
}

impl SampleBatch {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n_vars..(r + 1) * self.n_vars]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_vars.max(1))
    }

    /// Column sample means with their standard errors.
    pub fn column_means(&self) -> Vec<(f64, f64)> {
        (0..self.n_vars)
            .map(|j| {
                let mut mv = crate::seed::MeanVar::default();
                for row in self.rows() {
                    mv.push(row[j]);
                }
                (mv.mean, mv.std_err())
            })
            .collect()
    }
}

/// How a functional was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Analytic,
    MonteCarlo,
    /// Monte Carlo with the largest term of each block integrated out in
    /// closed form.
    ConditionalMonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::MonteCarlo => "monte-carlo",
            Method::ConditionalMonteCarlo => "conditional-monte-carlo",
        }
    }
}

/// Where σ² came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum Sigma2Source {
    Exact,
    Estimated { std_err: f64, k: usize },
}

/// Standard errors of estimated fields; `None` for exact fields.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StdErrs {
    pub u: Option<f64>,
    pub l: Option<f64>,
    pub sigma_c2: Option<f64>,
}

/// Truncation functionals at one level `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub c: f64,
    pub u_of_c: f64,
    pub l_of_c: Option<f64>,
    pub sigma2: f64,
    pub sigma2_source: Sigma2Source,
    pub sigma_c2: Option<f64>,
    pub method: Method,
    pub std_err: StdErrs,
    pub k: Option<usize>,
    /// Monte Carlo saw no indicator activation for L; the value is a lower
    /// estimate.
    pub tail_unobserved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    WassersteinM2,
    WassersteinM1,
    Kolmogorov,
    Tv,
}

impl BoundKind {
    pub fn cap(&self) -> f64 {
        match self {
            BoundKind::WassersteinM2 | BoundKind::WassersteinM1 => std::f64::consts::SQRT_2,
            BoundKind::Kolmogorov | BoundKind::Tv => 1.0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BoundKind::WassersteinM2 => "wasserstein-m2",
            BoundKind::WassersteinM1 => "wasserstein-m1",
            BoundKind::Kolmogorov => "kolmogorov",
            BoundKind::Tv => "tv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTerm {
    pub name: String,
    pub value: f64,
}

/// An evaluated bound. `uncapped` is the sum of `terms`; `value` is the
/// uncapped value clipped to the trivial cap of the metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub value: f64,
    pub uncapped: f64,
    pub c_used: f64,
    pub terms: Vec<BoundTerm>,
    pub l_n: Option<f64>,
}

impl BoundReport {
    pub(crate) fn from_terms(kind: BoundKind, c_used: f64, terms: Vec<BoundTerm>, l_n: Option<f64>) -> Self {
        let uncapped: f64 = terms.iter().map(|t| t.value).sum();
        BoundReport {
            kind,
            value: uncapped.min(kind.cap()),
            uncapped,
            c_used,
            terms,
            l_n,
        }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    W,
    K,
    TV,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::W => "W",
            Metric::K => "K",
            Metric::TV => "TV",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "W" => Ok(Metric::W),
            "K" => Ok(Metric::K),
            "TV" => Ok(Metric::TV),
            other => Err(Error::Domain(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    ExactEcdf,
    Ks,
    Histogram,
    Enumeration,
}

/// A distance between the law of `S/σ` and the standard normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub metric: Metric,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Bootstrap standard deviation of the estimator.
    pub std_err: f64,
    pub k: usize,
    pub estimator: Estimator,
    /// Histogram estimators only: |TV(bins) − TV(2·bins)|.
    pub bracket: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, m: usize) -> ArraySpec {
        ArraySpec {
            n_vars: n,
            dep_range: m,
            family: Family::HeavyTail { m: 1, t: 1 },
            sigma2: Some(1.0),
            max_abs_over_sigma: None,
        }
    }

    #[test]
    fn dependence_range_bounds() {
        assert!(spec(5, 1).validate().is_ok());
        assert!(spec(5, 5).validate().is_ok());
        assert!(spec(5, 0).validate().is_err());
        assert!(spec(5, 6).validate().is_err());
    }

    #[test]
    fn caps_applied_with_uncapped_retained() {
        let r = BoundReport::from_terms(
            BoundKind::WassersteinM2,
            1.0,
            vec![
                BoundTerm { name: "a".into(), value: 30.0 },
                BoundTerm { name: "b".into(), value: 2.0 },
            ],
            None,
        );
        assert_eq!(r.uncapped, 32.0);
        assert_eq!(r.value, std::f64::consts::SQRT_2);
        assert_eq!(r.term("b"), Some(2.0));
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("tv".parse::<Metric>().unwrap(), Metric::TV);
        assert!("X".parse::<Metric>().is_err());
    }
}
