//! m-dependent row generators.
//!
//! Rows are pure functions of `(spec, replicate seed)`. Large Monte Carlo
//! runs stream rows through [`fold_rows`] instead of materializing a
//! [`SampleBatch`].

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::marginal::MarginalModel;
use crate::model::{ArraySpec, Family, SampleBatch};
use crate::seed::{derive_replicate_seed, reduce_replicates, replicate_rng, ReplicateRng, CHUNK_ROWS};

/// Effective weights `c_k` of the innovations in `S = Σ_k c_k ε_k` for the
/// moving-window family.
pub fn innovation_loadings(n_vars: usize, weights: &[f64]) -> Vec<f64> {
    let w = weights.len();
    let mut out = vec![0.0; n_vars + w.saturating_sub(1)];
    for i in 0..n_vars {
        for (j, wj) in weights.iter().enumerate() {
            out[i + j] += wj;
        }
    }
    out
}

/// Generic m-dependent family `X_i = Σ_j w_j ε_{i+j}`, iid innovations.
///
/// `weights` has length `m + 1`. An iid row (`m = 0`) is recorded with
/// dependence range 1, the smallest range the bounds accept.
pub fn moving_window_spec(
    n_vars: usize,
    m: usize,
    innovation: MarginalModel,
    weights: Vec<f64>,
) -> Result<ArraySpec> {
    if weights.len() != m + 1 {
        return Err(Error::InvalidSpec(format!(
            "moving window: expected {} weights, got {}",
            m + 1,
            weights.len()
        )));
    }
    if n_vars == 0 {
        return Err(Error::InvalidSpec("moving window: N must be >= 1".into()));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidSpec("moving window: non-finite weight".into()));
    }
    innovation.validate()?;
    let family = Family::MovingWindow {
        innovation: innovation.clone(),
        weights: weights.clone(),
    };
    let loadings = innovation_loadings(n_vars, &weights);
    let load2: f64 = loadings.iter().map(|c| c * c).sum();
    let sigma2 = innovation.second_moment().map(|e2| e2 * load2);
    if weights.iter().all(|w| *w == 0.0) || sigma2 == Some(0.0) || load2 == 0.0 {
        return Err(Error::InvalidSpec("moving window: zero variance".into()));
    }
    let max_abs_over_sigma = match (innovation.max_abs(), sigma2) {
        (Some(b), Some(s2)) => Some(weights.iter().map(|w| w.abs()).sum::<f64>() * b / s2.sqrt()),
        _ => None,
    };
    let spec = ArraySpec {
        n_vars,
        dep_range: m.max(1),
        family,
        sigma2,
        max_abs_over_sigma,
    };
    spec.validate()?;
    Ok(spec)
}

/// Heavy-tailed counterexample row with `N = m (t + 1)`.
pub fn heavy_tail_example_spec(m: usize, t: usize) -> Result<ArraySpec> {
    if m < 1 || t < 1 {
        return Err(Error::InvalidSpec(format!("heavy tail needs m >= 1 and t >= 1, got m={m} t={t}")));
    }
    let (mf, tf) = (m as f64, t as f64);
    let spec = ArraySpec {
        n_vars: m * (t + 1),
        dep_range: m,
        family: Family::HeavyTail { m, t },
        sigma2: Some(3.0 * (mf * tf + mf * mf)),
        max_abs_over_sigma: None,
    };
    spec.validate()?;
    Ok(spec)
}

/// `E V²` for V uniform on `(-1, -1 + a) ∪ (1 - a, 1)`.
pub fn two_scale_ev2(a: f64) -> f64 {
    (1.0 - (1.0 - a).powi(3)) / (3.0 * a)
}

/// Two-scale 1-dependent row of length `n`.
pub fn two_scale_example_spec(n: usize, alpha: f64, a: f64) -> Result<ArraySpec> {
    if n < 2 {
        return Err(Error::InvalidSpec(format!("two-scale needs n >= 2, got {n}")));
    }
    if !(alpha > 0.0 && alpha < 1.0 / 3.0) {
        return Err(Error::InvalidSpec(format!("two-scale needs alpha in (0, 1/3), got {alpha}")));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidSpec(format!("two-scale needs a in (0, 1), got {a}")));
    }
    let nf = n as f64;
    let sigma2 = two_scale_ev2(a) + 2.0 * nf.powf(-2.0 * alpha);
    let bound = nf.powf(-0.5) + 2.0 * nf.powf(-alpha);
    let spec = ArraySpec {
        n_vars: n,
        dep_range: 1,
        family: Family::TwoScale { n, alpha, a },
        sigma2: Some(sigma2),
        max_abs_over_sigma: Some(bound / sigma2.sqrt()),
    };
    spec.validate()?;
    Ok(spec)
}

/// Exact E(S²) from the family's closed form.
pub fn exact_sigma2(spec: &ArraySpec) -> Result<f64> {
    match &spec.family {
        Family::MovingWindow { innovation, weights } => {
            let e2 = innovation
                .second_moment()
                .ok_or_else(|| Error::NeedsEstimation("sigma2 of a sample-only innovation".into()))?;
            let load = innovation_loadings(spec.n_vars, weights);
            Ok(e2 * load.iter().map(|c| c * c).sum::<f64>())
        }
        Family::HeavyTail { m, t } => {
            let (m, t) = (*m as f64, *t as f64);
            Ok(3.0 * (m * t + m * m))
        }
        Family::TwoScale { n, alpha, a } => Ok(two_scale_ev2(*a) + 2.0 * (*n as f64).powf(-2.0 * alpha)),
    }
}

/// Common marginal law of the coordinates, when it has a closed form.
///
/// Every built-in family is stationary in its one-dimensional marginals.
pub fn coordinate_marginal(spec: &ArraySpec) -> Option<MarginalModel> {
    match &spec.family {
        Family::MovingWindow { innovation, weights } => innovation.weighted_iid_sum(weights),
        Family::HeavyTail { .. } => Some(MarginalModel::heavy_tail()),
        Family::TwoScale { n, alpha, a } => {
            let nf = *n as f64;
            let r = nf.powf(-0.5);
            let shift = 2.0 * nf.powf(-alpha);
            let mut pieces = Vec::with_capacity(6);
            for (s, w) in [(-shift, 0.25), (0.0, 0.5), (shift, 0.25)] {
                pieces.push(crate::marginal::UniformPiece {
                    lo: s - r,
                    hi: s - r * (1.0 - a),
                    weight: 0.5 * w,
                });
                pieces.push(crate::marginal::UniformPiece {
                    lo: s + r * (1.0 - a),
                    hi: s + r,
                    weight: 0.5 * w,
                });
            }
            Some(MarginalModel::UniformUnion { pieces })
        }
    }
}

/// Per-row sampler with scratch space.
pub struct RowSampler<'a> {
    spec: &'a ArraySpec,
    scratch: Vec<f64>,
}

impl<'a> RowSampler<'a> {
    pub fn new(spec: &'a ArraySpec) -> Result<Self> {
        spec.validate()?;
        if let Family::MovingWindow { innovation, .. } = &spec.family {
            if !innovation.is_samplable() {
                return Err(Error::UnsupportedFamily(
                    "moving window with a sample-only innovation has no sampler".into(),
                ));
            }
        }
        let scratch = match &spec.family {
            Family::MovingWindow { weights, .. } => vec![0.0; spec.n_vars + weights.len() - 1],
            _ => Vec::new(),
        };
        Ok(RowSampler { spec, scratch })
    }

    pub fn n_vars(&self) -> usize {
        self.spec.n_vars
    }

    /// Fills `out` (length N) with one realization.
    pub fn fill<R: Rng>(&mut self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.spec.n_vars);
        match &self.spec.family {
            Family::MovingWindow { innovation, weights } => {
                for e in self.scratch.iter_mut() {
                    *e = innovation.sample(rng);
                }
                for (i, x) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (j, w) in weights.iter().enumerate() {
                        acc += w * self.scratch[i + j];
                    }
                    *x = acc;
                }
            }
            Family::HeavyTail { m, t } => {
                let v = MarginalModel::heavy_tail();
                let iid = m * t;
                for x in out[..iid].iter_mut() {
                    *x = v.sample(rng);
                }
                let shared = v.sample(rng);
                for x in out[iid..].iter_mut() {
                    *x = shared;
                }
            }
            Family::TwoScale { n, alpha, a } => {
                let nf = *n as f64;
                let r = nf.powf(-0.5);
                let s = nf.powf(-alpha);
                let mut t_prev: f64 = if rng.random::<u64>() & 1 == 0 { 1.0 } else { -1.0 };
                for x in out.iter_mut() {
                    // one word per coordinate: 52 bits uniform, bit 0 sign of V, bit 1 T_i
                    let bits: u64 = rng.random();
                    let u = ((bits >> 12) as f64 + 1.0) * (1.0 / (1u64 << 52) as f64);
                    let mag = 1.0 - a * u;
                    let v = if bits & 1 == 0 { mag } else { -mag };
                    let t_cur = if bits & 2 == 0 { 1.0 } else { -1.0 };
                    *x = r * v + s * (t_cur - t_prev);
                    t_prev = t_cur;
                }
            }
        }
    }
}

/// k independent rows, row `r` drawn from the generator seeded by
/// `derive_replicate_seed(seed_root, r)`.
pub fn sample_row(spec: &ArraySpec, k: usize, seed_root: u64) -> Result<SampleBatch> {
    if k < 1 {
        return Err(Error::Domain("sample_row: k must be >= 1".into()));
    }
    RowSampler::new(spec)?;
    let n = spec.n_vars;
    let mut data = vec![0.0; k * n];
    data.par_chunks_mut(n * CHUNK_ROWS)
        .enumerate()
        .for_each(|(c, block)| {
            let mut sampler = RowSampler::new(spec).expect("checked above");
            for (j, row) in block.chunks_exact_mut(n).enumerate() {
                let r = c * CHUNK_ROWS + j;
                let mut rng = replicate_rng(seed_root, r as u64);
                sampler.fill(&mut rng, row);
            }
        });
    Ok(SampleBatch {
        n_vars: n,
        k,
        data,
        seed_root,
        replicate_seeds: (0..k as u64).map(|r| derive_replicate_seed(seed_root, r)).collect(),
    })
}

/// Streams `k` rows through a chunked deterministic reduction.
///
/// `fold` receives the row index, the row and the replicate generator (after
/// the row has been drawn), so callers can take extra draws reproducibly.
pub fn fold_rows<S, I, F, M>(spec: &ArraySpec, k: usize, seed_root: u64, init: I, fold: F, merge: M) -> Result<S>
where
    S: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, usize, &[f64], &mut ReplicateRng) + Sync,
    M: Fn(S, S) -> S,
{
    RowSampler::new(spec)?;
    let n = spec.n_vars;
    let out = reduce_replicates(
        k,
        || (init(), RowSampler::new(spec).expect("checked above"), vec![0.0; n]),
        |(state, sampler, buf), r| {
            let mut rng = replicate_rng(seed_root, r as u64);
            sampler.fill(&mut rng, buf);
            fold(state, r, buf, &mut rng);
        },
        |(a, s, b), (c, _, _)| (merge(a, c), s, b),
    );
    Ok(out.0)
}

/// Row sums `S` for `k` replicates, in replicate order.
pub fn row_sums(spec: &ArraySpec, k: usize, seed_root: u64) -> Result<Vec<f64>> {
    fold_rows(
        spec,
        k,
        seed_root,
        Vec::new,
        |acc: &mut Vec<f64>, _, row, _| acc.push(row_sum(row)),
        |mut a, b| {
            a.extend(b);
            a
        },
    )
}

/// `S / σ` for `k` replicates using the spec's exact σ.
pub fn standardized_sums(spec: &ArraySpec, k: usize, seed_root: u64) -> Result<Vec<f64>> {
    let sigma = spec
        .sigma()
        .ok_or_else(|| Error::NeedsEstimation("standardized sums without exact sigma2".into()))?;
    let mut s = row_sums(spec, k, seed_root)?;
    s.iter_mut().for_each(|x| *x /= sigma);
    Ok(s)
}

/// Σ_i X_i in index order.
#[inline]
pub fn row_sum(row: &[f64]) -> f64 {
    row.iter().sum()
}
