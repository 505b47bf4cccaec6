//! Truncation functionals `U(c)`, `L(c)`, the blocking construction and the
//! truncated variance `σ_c²`.
//!
//! `U(c) = (m/σ²) Σ_i E[X_i² 1{|X_i| > cσ/m}]` over raw coordinates and
//! `L(c) = (1/σ²) Σ_b E[Y_b² 1{|Y_b| > cσ}]` over length-m block sums.
//! Every indicator is strict. Monte Carlo curves over a grid of `c` values
//! reuse the same rows for every grid point, so they are monotone path-wise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{coordinate_marginal, fold_rows, row_sum};
use crate::model::{ArraySpec, Family, Method, SampleBatch, Sigma2Source, StdErrs, TruncationReport};
use crate::seed::{derive_stream_root, MeanVar};

/// Replicates used when σ² has to be estimated.
pub const SIGMA2_ESTIMATION_K: usize = 100_000;

/// Monte Carlo budget: replicate count and seed root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub k: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        McConfig { k, seed }
    }
}

/// Requested evaluation route for `U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UMethod {
    Analytic,
    MonteCarlo,
    /// Analytic when closed-form tails exist, Monte Carlo otherwise.
    Auto,
}

/// A Monte Carlo value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

/// `k × M` block sums.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedBatch {
    pub n_vars: usize,
    pub m: usize,
    pub n_blocks: usize,
    pub k: usize,
    pub data: Vec<f64>,
}

impl BlockedBatch {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n_blocks..(r + 1) * self.n_blocks]
    }
}

/// Fills `out` with the `⌈N/m⌉` block sums of `row`; the last block sums
/// only the coordinates that exist.
#[inline]
pub fn block_sums_into(row: &[f64], m: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend(row.chunks(m).map(row_sum));
}

/// Blocking construction applied to every row of a batch.
pub fn block_sums(batch: &SampleBatch, m: usize) -> Result<BlockedBatch> {
    if m < 1 {
        return Err(Error::Domain("block_sums: m must be >= 1".into()));
    }
    let n_blocks = batch.n_vars.div_ceil(m);
    let mut data = Vec::with_capacity(batch.k * n_blocks);
    let mut buf = Vec::with_capacity(n_blocks);
    for row in batch.rows() {
        block_sums_into(row, m, &mut buf);
        data.extend_from_slice(&buf);
    }
    Ok(BlockedBatch {
        n_vars: batch.n_vars,
        m,
        n_blocks,
        k: batch.k,
        data,
    })
}

/// σ² used by every functional: exact when the spec has it, otherwise a
/// Monte Carlo estimate of Var(S) on an independent stream.
pub fn resolve_sigma2(spec: &ArraySpec, seed: u64) -> Result<(f64, Sigma2Source)> {
    if let Some(s2) = spec.sigma2 {
        return Ok((s2, Sigma2Source::Exact));
    }
    let k = SIGMA2_ESTIMATION_K;
    let mv = fold_rows(
        spec,
        k,
        derive_stream_root(seed, 0x5157),
        MeanVar::default,
        |acc, _, row, _| {
            let s = row_sum(row);
            acc.push(s * s);
        },
        |a, b| a.merge(&b),
    )?;
    if !(mv.mean > 0.0) {
        return Err(Error::InvalidSpec("estimated sigma2 is zero".into()));
    }
    Ok((
        mv.mean,
        Sigma2Source::Estimated {
            std_err: mv.std_err(),
            k,
        },
    ))
}

fn analytic_u(spec: &ArraySpec, c: f64, sigma2: f64) -> Option<f64> {
    let marg = coordinate_marginal(spec)?;
    let m = spec.dep_range as f64;
    let u = c * sigma2.sqrt() / m;
    let tail = marg.tail_second_moment(u)?;
    Some(m / sigma2 * spec.n_vars as f64 * tail)
}

fn check_levels(cs: &[f64]) -> Result<()> {
    if cs.is_empty() {
        return Err(Error::Domain("empty c grid".into()));
    }
    if let Some(c) = cs.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
        return Err(Error::Domain(format!("truncation level must be > 0, got {c}")));
    }
    Ok(())
}

/// Per-row tail sums `Σ_j v_j² 1{|v_j| > θ_g}` for ascending `thetas`,
/// accumulated into `acc[g]`, scaled by `scale`.
fn push_tail_sums(values: &[f64], thetas: &[f64], scale: f64, sorted: &mut Vec<f64>, acc: &mut [MeanVar]) {
    // sort |v| descending; walk thresholds from the largest down
    sorted.clear();
    sorted.extend(values.iter().map(|v| v.abs()));
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut idx = 0;
    let mut partial = 0.0;
    for g in (0..thetas.len()).rev() {
        while idx < sorted.len() && sorted[idx] > thetas[g] {
            partial += sorted[idx] * sorted[idx];
            idx += 1;
        }
        acc[g].push(partial * scale);
    }
}

fn sorted_levels(cs: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..cs.len()).collect();
    order.sort_by(|&a, &b| cs[a].total_cmp(&cs[b]));
    (order.iter().map(|&i| cs[i]).collect(), order)
}

/// `U(c)` at every level in `cs`, sharing one set of rows.
pub fn u_curve(spec: &ArraySpec, cs: &[f64], method: UMethod, mc: McConfig) -> Result<Vec<TruncationReport>> {
    check_levels(cs)?;
    let (sigma2, source) = resolve_sigma2(spec, mc.seed)?;
    let analytic = cs.iter().map(|&c| analytic_u(spec, c, sigma2)).collect::<Option<Vec<f64>>>();
    let use_analytic = match method {
        UMethod::Analytic => {
            if analytic.is_none() {
                return Err(Error::NeedsEstimation(format!(
                    "analytic U for family `{}` (no closed-form tails)",
                    spec.family.tag()
                )));
            }
            true
        }
        UMethod::Auto => analytic.is_some(),
        UMethod::MonteCarlo => false,
    };
    if use_analytic {
        let values = analytic.expect("checked");
        return Ok(cs
            .iter()
            .zip(values)
            .map(|(&c, u)| TruncationReport {
                c,
                u_of_c: u,
                l_of_c: None,
                sigma2,
                sigma2_source: source,
                sigma_c2: None,
                method: Method::Analytic,
                std_err: StdErrs::default(),
                k: None,
                tail_unobserved: false,
            })
            .collect());
    }
    if mc.k < 2 {
        return Err(Error::Domain("Monte Carlo U needs k >= 2".into()));
    }
    let m = spec.dep_range as f64;
    let sigma = sigma2.sqrt();
    let (levels, order) = sorted_levels(cs);
    let thetas: Vec<f64> = levels.iter().map(|c| c * sigma / m).collect();
    let scale = m / sigma2;
    let g = levels.len();
    let acc = fold_rows(
        spec,
        mc.k,
        mc.seed,
        || (vec![MeanVar::default(); g], Vec::new()),
        |(acc, sorted), _, row, _| push_tail_sums(row, &thetas, scale, sorted, acc),
        |(a, s), (b, _)| (a.iter().zip(&b).map(|(x, y)| x.merge(y)).collect(), s),
    )?
    .0;
    let mut out = vec![None; g];
    for (pos, &orig) in order.iter().enumerate() {
        out[orig] = Some(TruncationReport {
            c: cs[orig],
            u_of_c: acc[pos].mean,
            l_of_c: None,
            sigma2,
            sigma2_source: source,
            sigma_c2: None,
            method: Method::MonteCarlo,
            std_err: StdErrs {
                u: Some(acc[pos].std_err()),
                ..StdErrs::default()
            },
            k: Some(mc.k),
            tail_unobserved: false,
        });
    }
    Ok(out.into_iter().map(|r| r.expect("filled")).collect())
}

/// `U(c)` at one level.
pub fn compute_u(spec: &ArraySpec, c: f64, method: UMethod, mc: McConfig) -> Result<TruncationReport> {
    Ok(u_curve(spec, &[c], method, mc)?.remove(0))
}

/// `∫_a^b (s + w)² (3/2) w^{-4} dw` for `1 ≤ a < b ≤ ∞`.
fn heavy_tail_piece(s: f64, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let (ia, ib) = (1.0 / a, if b.is_finite() { 1.0 / b } else { 0.0 });
    1.5 * (s * s * (ia.powi(3) - ib.powi(3)) / 3.0 + s * (ia * ia - ib * ib) + (ia - ib))
}

/// `E[(s + V)² 1{|V| > floor} 1{|s + V| > θ}]` for the unit heavy-tail law,
/// `floor ≥ 1`.
pub(crate) fn heavy_tail_conditional_tail(s: f64, floor: f64, theta: f64) -> f64 {
    let mut total = 0.0;
    // V = +w
    total += heavy_tail_piece(s, floor.max(theta - s), f64::INFINITY);
    if -theta - s > floor {
        total += heavy_tail_piece(s, floor, -theta - s);
    }
    // V = -w, (s - w)² = (w - s)²
    total += heavy_tail_piece(-s, floor.max(theta + s), f64::INFINITY);
    if s - theta > floor {
        total += heavy_tail_piece(-s, floor, s - theta);
    }
    total
}

/// Conditional estimate of `E[Y² 1{|Y| > θ}]` for `Y` a sum of iid unit
/// heavy-tail draws, given all draws but the one largest in magnitude.
///
/// By exchangeability `E[h(Y)] = m · E[h(Y) 1{|V_m| > max_{j<m} |V_j|}]`;
/// conditioning on `V_1..V_{m-1}` leaves a rational integral in `V_m`.
pub(crate) fn heavy_tail_block_estimate(others: &[f64], m: usize, theta: f64) -> f64 {
    let s: f64 = others.iter().sum();
    let floor = others.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    m as f64 * heavy_tail_conditional_tail(s, floor, theta)
}

enum LRoute {
    Analytic,
    HeavyTailConditional { m: usize, t: usize },
    Plain,
}

fn l_route(spec: &ArraySpec) -> LRoute {
    match &spec.family {
        Family::HeavyTail { m, t } => LRoute::HeavyTailConditional { m: *m, t: *t },
        _ if spec.dep_range == 1 && coordinate_marginal(spec).is_some_and(|m| m.tail_second_moment(1.0).is_some()) => {
            LRoute::Analytic
        }
        _ => LRoute::Plain,
    }
}

/// `L(c)` (and `U(c)` on the same rows) at every level in `cs`.
///
/// Routes: closed form when `m = 1` and the marginal tails are known (then
/// `L = U`); the conditional estimator for the heavy-tail family; plain Monte
/// Carlo over block sums otherwise.
pub fn l_curve(spec: &ArraySpec, cs: &[f64], mc: McConfig) -> Result<Vec<TruncationReport>> {
    check_levels(cs)?;
    let (sigma2, source) = resolve_sigma2(spec, mc.seed)?;
    let sigma = sigma2.sqrt();
    match l_route(spec) {
        LRoute::Analytic => {
            let us = u_curve(spec, cs, UMethod::Analytic, mc)?;
            Ok(us
                .into_iter()
                .map(|mut r| {
                    r.l_of_c = Some(r.u_of_c);
                    r
                })
                .collect())
        }
        LRoute::HeavyTailConditional { m, t } => {
            if mc.k < 2 {
                return Err(Error::Domain("Monte Carlo L needs k >= 2".into()));
            }
            let us = u_curve(spec, cs, UMethod::Analytic, mc)?;
            let g = cs.len();
            let thetas: Vec<f64> = cs.iter().map(|c| c * sigma).collect();
            let acc = fold_rows(
                spec,
                mc.k,
                mc.seed,
                || vec![MeanVar::default(); g],
                |acc, _, row, _| {
                    for (gi, &theta) in thetas.iter().enumerate() {
                        let mut total = 0.0;
                        for b in 0..t {
                            let block = &row[b * m..(b + 1) * m];
                            total += heavy_tail_block_estimate(&block[..m - 1], m, theta);
                        }
                        // last block is m copies of one draw: Y = m V
                        let mf = m as f64;
                        total += mf * mf * 3.0 / (theta / mf).max(1.0);
                        acc[gi].push(total / sigma2);
                    }
                },
                |a, b| a.iter().zip(&b).map(|(x, y)| x.merge(y)).collect(),
            )?;
            Ok(us
                .into_iter()
                .zip(acc)
                .map(|(mut r, a)| {
                    r.l_of_c = Some(a.mean);
                    r.std_err.l = Some(a.std_err());
                    r.method = Method::ConditionalMonteCarlo;
                    r.k = Some(mc.k);
                    r
                })
                .collect())
        }
        LRoute::Plain => {
            if mc.k < 2 {
                return Err(Error::Domain("Monte Carlo L needs k >= 2".into()));
            }
            let m = spec.dep_range;
            let mf = m as f64;
            let (levels, order) = sorted_levels(cs);
            let g = levels.len();
            let l_thetas: Vec<f64> = levels.iter().map(|c| c * sigma).collect();
            let u_thetas: Vec<f64> = levels.iter().map(|c| c * sigma / mf).collect();
            let (lacc, uacc, _, _) = fold_rows(
                spec,
                mc.k,
                mc.seed,
                || (vec![MeanVar::default(); g], vec![MeanVar::default(); g], Vec::new(), Vec::new()),
                |(lacc, uacc, sorted, blocks), _, row, _| {
                    block_sums_into(row, m, blocks);
                    push_tail_sums(blocks, &l_thetas, 1.0 / sigma2, sorted, lacc);
                    push_tail_sums(row, &u_thetas, mf / sigma2, sorted, uacc);
                },
                |(la, ua, s, b), (lb, ub, _, _)| {
                    (
                        la.iter().zip(&lb).map(|(x, y)| x.merge(y)).collect(),
                        ua.iter().zip(&ub).map(|(x, y)| x.merge(y)).collect(),
                        s,
                        b,
                    )
                },
            )?;
            let mut out = vec![None; g];
            for (pos, &orig) in order.iter().enumerate() {
                out[orig] = Some(TruncationReport {
                    c: cs[orig],
                    u_of_c: uacc[pos].mean,
                    l_of_c: Some(lacc[pos].mean),
                    sigma2,
                    sigma2_source: source,
                    sigma_c2: None,
                    method: Method::MonteCarlo,
                    std_err: StdErrs {
                        u: Some(uacc[pos].std_err()),
                        l: Some(lacc[pos].std_err()),
                        sigma_c2: None,
                    },
                    k: Some(mc.k),
                    tail_unobserved: lacc[pos].mean == 0.0,
                });
            }
            Ok(out.into_iter().map(|r| r.expect("filled")).collect())
        }
    }
}

/// `L(c)` at one level.
pub fn compute_l(spec: &ArraySpec, c: f64, mc: McConfig) -> Result<TruncationReport> {
    Ok(l_curve(spec, &[c], mc)?.remove(0))
}

/// Monte Carlo `σ_c² = Var(Σ_i (X_i/σ) 1{|X_i| ≤ cσ})`.
pub fn truncated_variance(spec: &ArraySpec, c: f64, mc: McConfig) -> Result<Estimate> {
    check_levels(&[c])?;
    if mc.k < 2 {
        return Err(Error::Domain("truncated_variance needs k >= 2".into()));
    }
    let (sigma2, _) = resolve_sigma2(spec, mc.seed)?;
    let sigma = sigma2.sqrt();
    let theta = c * sigma;
    let values = fold_rows(
        spec,
        mc.k,
        mc.seed,
        Vec::new,
        |acc: &mut Vec<f64>, _, row, _| {
            let s: f64 = row.iter().filter(|x| x.abs() <= theta).map(|x| x / sigma).sum();
            acc.push(s);
        },
        |mut a, b| {
            a.extend(b);
            a
        },
    )?;
    Ok(sample_variance_with_se(&values))
}

/// Unbiased sample variance and its delta-method standard error.
pub fn sample_variance_with_se(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = crate::seed::compensated_sum(values) / n;
    let mut m2 = crate::seed::KahanSum::new();
    let mut m4 = crate::seed::KahanSum::new();
    for &v in values {
        let d = (v - mean) * (v - mean);
        m2.add(d);
        m4.add(d * d);
    }
    let var = m2.value() / (n - 1.0);
    let mu4 = m4.value() / n;
    let pop = m2.value() / n;
    Estimate {
        value: var,
        std_err: ((mu4 - pop * pop).max(0.0) / n).sqrt(),
    }
}
