//! Finite-support 1-dependent chains `X_i = g_i(ε_i, ε_{i+1})`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::replicate_rng;

pub type Q = BigRational;

pub const MAX_CHAIN_N: usize = 12;
/// Joint innovation outcomes accepted by the enumerator.
pub const CHAIN_OUTCOME_CAP: u128 = 200_000;

/// Innovations `ε_1, …, ε_{N+1}` iid on `{0, …, A−1}` with `pmf`, and link
/// tables `links[i][a·A + b] = g_{i+1}(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    pmf: Vec<Q>,
    links: Vec<Vec<Q>>,
}

/// One joint innovation outcome.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub prob: Q,
    pub x: Vec<Q>,
}

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn q_from_f64(x: f64) -> Result<Q> {
    Q::from_float(x).ok_or_else(|| Error::Domain(format!("non-finite value {x}")))
}

pub fn q_to_f64(x: &Q) -> f64 {
    num_traits::ToPrimitive::to_f64(x).unwrap_or(f64::NAN)
}

impl FiniteChain {
    /// Exact chain; every `X_i` must have mean exactly 0.
    pub fn new(pmf: Vec<Q>, links: Vec<Vec<Q>>) -> Result<Self> {
        let c = FiniteChain { pmf, links };
        c.validate()?;
        Ok(c)
    }

    /// Converts floating inputs exactly. A pmf within 1e-14 of total mass 1 is
    /// renormalized and link tables with `|E X_i| ≤ 1e-14·max|g_i|` are
    /// recentered, both in exact arithmetic.
    pub fn from_f64(pmf: &[f64], links: &[Vec<f64>]) -> Result<Self> {
        let mut p: Vec<Q> = pmf.iter().map(|&x| q_from_f64(x)).collect::<Result<_>>()?;
        let total: Q = p.iter().cloned().sum();
        if (q_to_f64(&total) - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidSpec(format!("pmf sums to {}", q_to_f64(&total))));
        }
        p.iter_mut().for_each(|x| *x = &*x / &total);
        let mut tables = Vec::with_capacity(links.len());
        for (i, l) in links.iter().enumerate() {
            let mut t: Vec<Q> = l.iter().map(|&x| q_from_f64(x)).collect::<Result<_>>()?;
            let a = p.len();
            if t.len() != a * a {
                return Err(Error::InvalidSpec(format!("link {i} needs {} entries", a * a)));
            }
            let mean = table_mean(&p, &t);
            let scale = l.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if q_to_f64(&mean).abs() > 1e-14 * scale.max(1.0) {
                return Err(Error::InvalidSpec(format!("X_{} has mean {}", i + 1, q_to_f64(&mean))));
            }
            t.iter_mut().for_each(|x| *x -= &mean);
            tables.push(t);
        }
        FiniteChain::new(p, tables)
    }

    /// Chain from integer tables, each centered exactly at its mean.
    pub fn centered(pmf: Vec<Q>, raw_links: Vec<Vec<Q>>) -> Result<Self> {
        let links = raw_links
            .into_iter()
            .map(|t| {
                let mean = table_mean(&pmf, &t);
                t.into_iter().map(|v| v - &mean).collect()
            })
            .collect();
        FiniteChain::new(pmf, links)
    }

    /// `X_i = v_i(ε_i)` with independent coordinates.
    pub fn independent(pmf: Vec<Q>, values: Vec<Vec<Q>>) -> Result<Self> {
        let a = pmf.len();
        let links = values
            .into_iter()
            .map(|v| (0..a * a).map(|ab| v[ab / a].clone()).collect())
            .collect();
        FiniteChain::new(pmf, links)
    }

    /// `X_i = ε_i` for Rademacher innovations.
    pub fn independent_rademacher(n: usize) -> Result<Self> {
        FiniteChain::independent(vec![q(1, 2), q(1, 2)], vec![vec![q(-1, 1), q(1, 1)]; n])
    }

    /// `X_i = ε_i ε_{i+1}` for Rademacher innovations.
    pub fn rademacher_products(n: usize) -> Result<Self> {
        let t = vec![q(1, 1), q(-1, 1), q(-1, 1), q(1, 1)];
        FiniteChain::new(vec![q(1, 2), q(1, 2)], vec![t; n])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.links.len();
        if n == 0 || n > MAX_CHAIN_N {
            return Err(Error::InvalidSpec(format!("chain needs 1 <= N <= {MAX_CHAIN_N}, got {n}")));
        }
        let a = self.pmf.len();
        if a == 0 || self.pmf.iter().any(|p| !p.is_positive()) {
            return Err(Error::InvalidSpec("pmf entries must be > 0".into()));
        }
        let total: Q = self.pmf.iter().cloned().sum();
        if total != q(1, 1) {
            return Err(Error::InvalidSpec("pmf must sum to 1 exactly".into()));
        }
        for (i, t) in self.links.iter().enumerate() {
            if t.len() != a * a {
                return Err(Error::InvalidSpec(format!("link {} needs {} entries", i + 1, a * a)));
            }
            if !table_mean(&self.pmf, t).is_zero() {
                return Err(Error::InvalidSpec(format!("X_{} is not centered", i + 1)));
            }
        }
        if self.links.iter().all(|t| t.iter().all(Zero::is_zero)) {
            return Err(Error::InvalidSpec("sigma2 = 0".into()));
        }
        Ok(())
    }

    pub fn n_vars(&self) -> usize {
        self.links.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.pmf.len()
    }

    pub fn pmf(&self) -> &[Q] {
        &self.pmf
    }

    pub fn link(&self, i: usize, a: usize, b: usize) -> &Q {
        &self.links[i][a * self.pmf.len() + b]
    }

    pub fn outcome_count(&self) -> u128 {
        (self.pmf.len() as u128).saturating_pow(self.links.len() as u32 + 1)
    }

    /// All `A^{N+1}` innovation outcomes in lexicographic order.
    pub fn enumerate(&self) -> Result<Vec<Outcome>> {
        let count = self.outcome_count();
        if count > CHAIN_OUTCOME_CAP {
            return Err(Error::EnumerationLimit {
                outcomes: count,
                cap: CHAIN_OUTCOME_CAP,
            });
        }
        let n = self.n_vars();
        let a = self.alphabet_size();
        let mut out = Vec::with_capacity(count as usize);
        let mut eps = vec![0usize; n + 1];
        for _ in 0..count {
            let prob = eps.iter().fold(q(1, 1), |acc, &e| acc * &self.pmf[e]);
            let x = (0..n).map(|i| self.link(i, eps[i], eps[i + 1]).clone()).collect();
            out.push(Outcome { prob, x });
            for d in (0..=n).rev() {
                eps[d] += 1;
                if eps[d] < a {
                    break;
                }
                eps[d] = 0;
            }
        }
        Ok(out)
    }

    /// `max_i ‖X_i‖_∞`.
    pub fn max_abs(&self) -> Q {
        self.links
            .iter()
            .flatten()
            .map(|v| v.abs())
            .fold(Q::zero(), |m, v| if v > m { v } else { m })
    }
}

fn table_mean(pmf: &[Q], t: &[Q]) -> Q {
    let a = pmf.len();
    let mut acc = Q::zero();
    for x in 0..a {
        for y in 0..a {
            acc += &pmf[x] * &pmf[y] * &t[x * a + y];
        }
    }
    acc
}

/// Random chain for property sweeps: `N ≤ max_n`, alphabet 2 (or 3 for
/// `N ≤ 6`), small-denominator pmf and centered integer link tables. About
/// one link in five ignores its second argument.
pub fn random_chain(seed: u64, max_n: usize) -> Result<FiniteChain> {
    let mut rng = replicate_rng(seed, 0);
    let max_n = max_n.clamp(1, MAX_CHAIN_N);
    loop {
        let n = rng.random_range(1..=max_n);
        let a = if n <= 6 && rng.random_bool(0.5) { 3 } else { 2 };
        let weights: Vec<i64> = (0..a).map(|_| rng.random_range(1..=4)).collect();
        let total: i64 = weights.iter().sum();
        let pmf: Vec<Q> = weights.iter().map(|&w| q(w, total)).collect();
        let links: Vec<Vec<Q>> = (0..n)
            .map(|_| {
                let lazy = rng.random_bool(0.2);
                let row: Vec<i64> = (0..a).map(|_| rng.random_range(-3..=3)).collect();
                (0..a * a)
                    .map(|ab| {
                        let v = if lazy { row[ab / a] } else { rng.random_range(-3..=3) };
                        Q::from_i64(v).expect("small int")
                    })
                    .collect()
            })
            .collect();
        if let Ok(c) = FiniteChain::centered(pmf, links) {
            return Ok(c);
        }
    }
}
