//! Distances between the law of `S/σ` and the standard normal.
//!
//! Wasserstein and Kolmogorov distances of any step CDF are evaluated in
//! closed form between consecutive atoms with the Gaussian partial integrals
//! `G(t) = tΦ(t) + φ(t)` and `H(t) = G(−t)`. Left of zero the integrals use
//! `Φ` and `G`, right of zero the complements, so tails keep full relative
//! precision.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{cdf, inv_cdf, partial_integral, pdf, sf, upper_partial_integral};
use crate::generators::{innovation_loadings, standardized_sums};
use crate::marginal::MarginalModel;
use crate::model::{ArraySpec, DistanceEstimate, Estimator, Family, Metric};
use crate::seed::{derive_stream_root, map_replicates, replicate_rng, KahanSum};

pub const DEFAULT_RESAMPLES: usize = 200;
/// Joint outcomes accepted by [`exact_law`].
pub const ENUMERATION_CAP: u128 = 10_000_000;
pub const MAX_EXACT_N: usize = 20;
/// Share of exact duplicates above which a sample counts as lattice-valued.
pub const LATTICE_DUPLICATE_SHARE: f64 = 0.2;
// resample counts by sequential binomials below this many distinct values
const BINOMIAL_RESAMPLE_MAX_ATOMS: usize = 4096;

/// Bootstrap settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub resamples: usize,
    pub seed: u64,
}

impl Bootstrap {
    pub fn new(seed: u64) -> Self {
        Bootstrap {
            resamples: DEFAULT_RESAMPLES,
            seed,
        }
    }
}

/// Exact law of a discrete random variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicLaw {
    atoms: Vec<(f64, f64)>,
}

impl AtomicLaw {
    /// Sorts, merges equal values and checks the probabilities.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.iter().any(|(x, p)| !x.is_finite() || !(*p > 0.0)) {
            return Err(Error::Domain("atoms need finite values and positive masses".into()));
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += p,
                _ => merged.push((x, p)),
            }
        }
        let total: f64 = crate::seed::compensated_sum(&merged.iter().map(|a| a.1).collect::<Vec<_>>());
        if merged.is_empty() || (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("atom masses sum to {total}, not 1")));
        }
        Ok(AtomicLaw { atoms: merged })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        crate::seed::compensated_sum(&self.atoms.iter().map(|a| a.1).collect::<Vec<_>>())
    }
}

/// Gaussian quantities cached at the atoms of a step CDF.
struct NormalAt {
    xs: Vec<f64>,
    cdf: Vec<f64>,
    sf: Vec<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
}

impl NormalAt {
    fn new(xs: Vec<f64>) -> Self {
        NormalAt {
            cdf: xs.iter().map(|&x| cdf(x)).collect(),
            sf: xs.iter().map(|&x| sf(x)).collect(),
            g: xs.iter().map(|&x| partial_integral(x)).collect(),
            h: xs.iter().map(|&x| upper_partial_integral(x)).collect(),
            xs,
        }
    }
}

#[derive(Clone, Copy)]
struct Pt {
    x: f64,
    cdf: f64,
    sf: f64,
    g: f64,
    h: f64,
}

impl Pt {
    fn at(x: f64) -> Pt {
        Pt {
            x,
            cdf: cdf(x),
            sf: sf(x),
            g: partial_integral(x),
            h: upper_partial_integral(x),
        }
    }
}

fn pt(n: &NormalAt, j: usize) -> Pt {
    Pt {
        x: n.xs[j],
        cdf: n.cdf[j],
        sf: n.sf[j],
        g: n.g[j],
        h: n.h[j],
    }
}

/// `∫_a^b Φ` and `∫_a^b (1 − Φ)`.
fn int_phi_sf(a: Pt, b: Pt) -> (f64, f64) {
    let len = b.x - a.x;
    if b.x <= 0.0 {
        let ip = b.g - a.g;
        (ip, len - ip)
    } else if a.x >= 0.0 {
        let is = a.h - b.h;
        (len - is, is)
    } else {
        let z = pdf(0.0);
        let ip = (z - a.g) + b.x - (z - b.h);
        let is = (-a.x - (z - a.g)) + (z - b.h);
        (ip, is)
    }
}

/// `∫_a^b |c − Φ(t)| dt` for a level `c = 1 − d`.
fn abs_segment(a: Pt, b: Pt, c: f64, d: f64) -> f64 {
    let right = a.x >= 0.0;
    let below_at = |p: Pt| if right { p.sf >= d } else { p.cdf <= c }; // Φ(p) ≤ c
    let seg = |a: Pt, b: Pt, phi_le_c: bool| {
        let (ip, is) = int_phi_sf(a, b);
        let len = b.x - a.x;
        let v = match (phi_le_c, right) {
            (true, true) => is - d * len,
            (true, false) => c * len - ip,
            (false, true) => d * len - is,
            (false, false) => ip - c * len,
        };
        v.max(0.0)
    };
    if below_at(b) {
        seg(a, b, true)
    } else if !below_at(a) {
        seg(a, b, false)
    } else {
        let t = if c <= 0.5 { inv_cdf(c) } else { -inv_cdf(d) };
        let t = t.clamp(a.x, b.x);
        let m = Pt::at(t);
        seg(a, m, true) + seg(m, b, false)
    }
}

/// Cumulative and tail masses from nonnegative weights summing to `total`.
fn cum_tail(weights: &[f64], total: f64) -> (Vec<f64>, Vec<f64>) {
    let n = weights.len();
    let mut cum = vec![0.0; n];
    let mut tail = vec![0.0; n];
    let mut acc = KahanSum::new();
    for j in 0..n {
        acc.add(weights[j]);
        cum[j] = acc.value() / total;
    }
    let mut acc = KahanSum::new();
    for j in (0..n).rev() {
        tail[j] = acc.value() / total;
        acc.add(weights[j]);
    }
    (cum, tail)
}

fn wasserstein_of(n: &NormalAt, weights: &[f64], total: f64) -> f64 {
    let (cum, tail) = cum_tail(weights, total);
    let k = n.xs.len();
    let mut acc = KahanSum::new();
    acc.add(n.g[0]);
    for j in 0..k - 1 {
        acc.add(abs_segment(pt(n, j), pt(n, j + 1), cum[j], tail[j]));
    }
    acc.add(n.h[k - 1]);
    acc.value()
}

fn kolmogorov_of(n: &NormalAt, weights: &[f64], total: f64) -> f64 {
    let (cum, tail) = cum_tail(weights, total);
    let mut best: f64 = 0.0;
    let mut prev_cum = 0.0;
    let mut prev_tail = 1.0;
    for j in 0..n.xs.len() {
        let (after, before) = if n.xs[j] >= 0.0 {
            ((n.sf[j] - tail[j]).abs(), (n.sf[j] - prev_tail).abs())
        } else {
            ((cum[j] - n.cdf[j]).abs(), (prev_cum - n.cdf[j]).abs())
        };
        best = best.max(after).max(before);
        prev_cum = cum[j];
        prev_tail = tail[j];
    }
    best
}

/// `∫|F − Φ|` for an atomic law.
pub fn exact_wasserstein_atomic_vs_normal(law: &AtomicLaw) -> f64 {
    let (xs, ps): (Vec<f64>, Vec<f64>) = law.atoms.iter().copied().unzip();
    wasserstein_of(&NormalAt::new(xs), &ps, law.total_mass())
}

/// `sup_t |F(t) − Φ(t)|` for an atomic law.
pub fn exact_kolmogorov_atomic_vs_normal(law: &AtomicLaw) -> f64 {
    let (xs, ps): (Vec<f64>, Vec<f64>) = law.atoms.iter().copied().unzip();
    kolmogorov_of(&NormalAt::new(xs), &ps, law.total_mass())
}

/// Samples grouped into distinct sorted values.
struct Grouped {
    normal: NormalAt,
    counts: Vec<f64>,
    /// distinct-value index of every sorted sample
    owner: Vec<u32>,
    k: usize,
}

fn group(samples: &[f64]) -> Result<Grouped> {
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite sample".into()));
    }
    let mut s = samples.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let mut xs = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    let mut owner = Vec::with_capacity(s.len());
    for &x in &s {
        // -0.0 and 0.0 are one atom
        if xs.last().is_some_and(|l: &f64| *l == x) {
            *counts.last_mut().expect("nonempty") += 1.0;
        } else {
            xs.push(x);
            counts.push(1.0);
        }
        owner.push((xs.len() - 1) as u32);
    }
    Ok(Grouped {
        normal: NormalAt::new(xs),
        counts,
        owner,
        k: s.len(),
    })
}

fn resample_counts<R: Rng>(g: &Grouped, rng: &mut R, out: &mut [f64]) {
    out.iter_mut().for_each(|c| *c = 0.0);
    if g.counts.len() <= BINOMIAL_RESAMPLE_MAX_ATOMS {
        let mut left = g.k as u64;
        let mut mass_left = g.k as f64;
        for (j, &c) in g.counts.iter().enumerate() {
            if left == 0 {
                break;
            }
            let p = (c / mass_left).min(1.0);
            let draw = if p >= 1.0 {
                left
            } else {
                Binomial::new(left, p).expect("valid binomial").sample(rng)
            };
            out[j] = draw as f64;
            left -= draw;
            mass_left -= c;
        }
    } else {
        for _ in 0..g.k {
            let i = rng.random_range(0..g.k);
            out[g.owner[i] as usize] += 1.0;
        }
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(metric: Metric, estimator: Estimator, point: f64, mut boot: Vec<f64>, k: usize) -> DistanceEstimate {
    let mut mv = crate::seed::MeanVar::default();
    boot.iter().for_each(|&b| mv.push(b));
    boot.sort_by(f64::total_cmp);
    let (lo, hi) = if boot.is_empty() {
        (point, point)
    } else {
        (percentile(&boot, 0.025), percentile(&boot, 0.975))
    };
    DistanceEstimate {
        metric,
        point,
        ci_low: lo.min(point),
        ci_high: hi.max(point),
        std_err: mv.variance().sqrt(),
        k,
        estimator,
        bracket: None,
    }
}

/// Empirical d_W and d_K on the same samples and the same bootstrap
/// resamples.
pub fn empirical_w_and_k(samples: &[f64], boot: Bootstrap) -> Result<(DistanceEstimate, DistanceEstimate)> {
    let g = group(samples)?;
    let total = g.k as f64;
    let w = wasserstein_of(&g.normal, &g.counts, total);
    let kd = kolmogorov_of(&g.normal, &g.counts, total);
    let root = derive_stream_root(boot.seed, 0xb007);
    let reps: Vec<(f64, f64)> = map_replicates(boot.resamples, |b| {
        let mut rng = replicate_rng(root, b as u64);
        let mut counts = vec![0.0; g.counts.len()];
        resample_counts(&g, &mut rng, &mut counts);
        (
            wasserstein_of(&g.normal, &counts, total),
            kolmogorov_of(&g.normal, &counts, total),
        )
    });
    let (bw, bk): (Vec<f64>, Vec<f64>) = reps.into_iter().unzip();
    Ok((
        summarize(Metric::W, Estimator::ExactEcdf, w, bw, g.k),
        summarize(Metric::K, Estimator::Ks, kd, bk, g.k),
    ))
}

/// `∫|F_k − Φ|` for the empirical CDF, with a percentile bootstrap CI.
pub fn empirical_wasserstein_to_normal(samples: &[f64], boot: Bootstrap) -> Result<DistanceEstimate> {
    Ok(empirical_w_and_k(samples, boot)?.0)
}

/// One-sample Kolmogorov–Smirnov statistic, with a percentile bootstrap CI.
pub fn empirical_kolmogorov_to_normal(samples: &[f64], boot: Bootstrap) -> Result<DistanceEstimate> {
    Ok(empirical_w_and_k(samples, boot)?.1)
}

fn histogram_tv(bin_of: &[u32], weights: &[f64], edges_mass: &[f64], outside: f64, total: f64) -> f64 {
    let mut counts = vec![0.0; edges_mass.len()];
    for (b, w) in bin_of.iter().zip(weights) {
        counts[*b as usize] += w;
    }
    let mut acc = KahanSum::new();
    for (c, q) in counts.iter().zip(edges_mass) {
        acc.add((c / total - q).abs());
    }
    0.5 * (acc.value() + outside)
}

struct HistogramSetup {
    bin_of: Vec<u32>,
    mass: Vec<f64>,
    outside: f64,
}

fn histogram_setup(xs: &[f64], bins: usize) -> HistogramSetup {
    let lo = xs[0] - 1.0;
    let hi = xs[xs.len() - 1] + 1.0;
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
    let mass = edges
        .windows(2)
        .map(|e| {
            if e[0] >= 0.0 {
                sf(e[0]) - sf(e[1])
            } else {
                cdf(e[1]) - cdf(e[0])
            }
        })
        .collect();
    let bin_of = xs
        .iter()
        .map(|&x| (((x - lo) / width) as usize).min(bins - 1) as u32)
        .collect();
    HistogramSetup {
        bin_of,
        mass,
        outside: cdf(lo) + sf(hi),
    }
}

/// Histogram estimate of d_TV on `[min − 1, max + 1]` with `bins` equal-width
/// bins; the Gaussian mass outside the range counts fully. `bracket` holds
/// `|TV(bins) − TV(2·bins)|`.
pub fn empirical_tv_to_normal(samples: &[f64], bins: usize, boot: Bootstrap) -> Result<DistanceEstimate> {
    if bins == 0 {
        return Err(Error::Domain("bins must be >= 1".into()));
    }
    let g = group(samples)?;
    let duplicates = g.k - g.counts.len();
    if duplicates as f64 >= LATTICE_DUPLICATE_SHARE * g.k as f64 && g.k > 1 {
        return Err(Error::EstimatorInapplicable(format!(
            "{duplicates} of {} samples are exact duplicates; the law looks lattice-valued",
            g.k
        )));
    }
    let total = g.k as f64;
    let h1 = histogram_setup(&g.normal.xs, bins);
    let h2 = histogram_setup(&g.normal.xs, 2 * bins);
    let point = histogram_tv(&h1.bin_of, &g.counts, &h1.mass, h1.outside, total);
    let double = histogram_tv(&h2.bin_of, &g.counts, &h2.mass, h2.outside, total);
    let root = derive_stream_root(boot.seed, 0x7e57);
    let reps = map_replicates(boot.resamples, |b| {
        let mut rng = replicate_rng(root, b as u64);
        let mut counts = vec![0.0; g.counts.len()];
        resample_counts(&g, &mut rng, &mut counts);
        histogram_tv(&h1.bin_of, &counts, &h1.mass, h1.outside, total)
    });
    let mut est = summarize(Metric::TV, Estimator::Histogram, point, reps, g.k);
    est.bracket = Some((point - double).abs());
    Ok(est)
}

/// Empirical estimate of `metric` for `k` simulated rows of `spec`.
pub fn estimate_distance(
    spec: &ArraySpec,
    metric: Metric,
    k: usize,
    seed: u64,
    bins: usize,
) -> Result<DistanceEstimate> {
    let samples = standardized_sums(spec, k, seed)?;
    let boot = Bootstrap::new(derive_stream_root(seed, 0xd157));
    match metric {
        Metric::W => empirical_wasserstein_to_normal(&samples, boot),
        Metric::K => empirical_kolmogorov_to_normal(&samples, boot),
        Metric::TV => empirical_tv_to_normal(&samples, bins, boot),
    }
}

/// Number of joint innovation outcomes behind `S` for a finite-support
/// moving-window spec.
pub fn outcome_count(spec: &ArraySpec) -> Result<u128> {
    match &spec.family {
        Family::MovingWindow {
            innovation: MarginalModel::Finite { values, .. },
            weights,
        } => {
            let used = innovation_loadings(spec.n_vars, weights).iter().filter(|c| **c != 0.0).count();
            let mut n: u128 = 1;
            for _ in 0..used {
                n = n.saturating_mul(values.len() as u128);
            }
            Ok(n)
        }
        other => Err(Error::UnsupportedFamily(format!(
            "exact law needs finite-support innovations, got `{}`",
            other.tag()
        ))),
    }
}

/// Exact law of `S/σ` for a finite-support moving-window spec.
///
/// `S = Σ_k c_k ε_k` with iid innovations, so the law is the convolution of
/// the scaled innovation laws; atoms that agree to 1e-12 relative are merged.
pub fn exact_law(spec: &ArraySpec) -> Result<AtomicLaw> {
    if spec.n_vars > MAX_EXACT_N {
        return Err(Error::Domain(format!("exact law needs N <= {MAX_EXACT_N}, got {}", spec.n_vars)));
    }
    let outcomes = outcome_count(spec)?;
    if outcomes > ENUMERATION_CAP {
        return Err(Error::EnumerationLimit {
            outcomes,
            cap: ENUMERATION_CAP,
        });
    }
    let Family::MovingWindow { innovation, weights } = &spec.family else { unreachable!() };
    let sigma = spec.sigma().ok_or_else(|| Error::InvalidSpec("exact law needs exact sigma2".into()))?;
    let loadings: Vec<f64> = innovation_loadings(spec.n_vars, weights).iter().map(|c| c / sigma).collect();
    match innovation.weighted_iid_sum(&loadings) {
        Some(MarginalModel::Finite { values, probs }) => {
            AtomicLaw::new(values.into_iter().zip(probs).filter(|a| a.1 > 0.0).collect())
        }
        _ => Err(Error::EnumerationLimit {
            outcomes,
            cap: ENUMERATION_CAP,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::moving_window_spec;
    use crate::quadrature::integrate;
    use rand::SeedableRng;
    use rand_distr::StandardNormal;

    fn brute_w(law: &AtomicLaw) -> f64 {
        // adaptive quadrature of |F − Φ| between atoms and over truncated tails
        let xs: Vec<f64> = law.atoms.iter().map(|a| a.0).collect();
        let f = |t: f64| {
            let mut cum = 0.0;
            for (x, p) in &law.atoms {
                if *x <= t {
                    cum += p;
                }
            }
            (cum - cdf(t)).abs()
        };
        let mut pts = vec![xs[0] - 40.0];
        pts.extend(&xs);
        pts.push(xs[xs.len() - 1] + 40.0);
        integrate(f, &pts, 1e-14, 0.0, 100_000).value
    }

    #[test]
    fn point_mass_at_zero() {
        let d = AtomicLaw::new(vec![(0.0, 1.0)]).unwrap();
        assert!((exact_wasserstein_atomic_vs_normal(&d) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((exact_kolmogorov_atomic_vs_normal(&d) - 0.5).abs() < 1e-15);
        let b = Bootstrap::new(0);
        let w = empirical_wasserstein_to_normal(&[0.0], b).unwrap();
        assert!((w.point - 0.797_884_560_802_865_4).abs() < 1e-12);
        assert_eq!(empirical_kolmogorov_to_normal(&[0.0], b).unwrap().point, 0.5);
    }

    #[test]
    fn rademacher_pair() {
        let s = moving_window_spec(2, 0, MarginalModel::rademacher(), vec![1.0]).unwrap();
        let law = exact_law(&s).unwrap();
        let r2 = 2f64.sqrt();
        let want = [(-r2, 0.25), (0.0, 0.5), (r2, 0.25)];
        assert_eq!(law.atoms().len(), 3);
        for (a, w) in law.atoms().iter().zip(want) {
            assert!((a.0 - w.0).abs() < 1e-15 && (a.1 - w.1).abs() < 1e-15);
        }
        assert!((exact_kolmogorov_atomic_vs_normal(&law) - 0.25).abs() < 1e-12);
        assert_eq!(law.total_mass(), 1.0);
    }

    #[test]
    fn telescoping_law() {
        let s = moving_window_spec(3, 1, MarginalModel::rademacher(), vec![1.0, -1.0]).unwrap();
        let law = exact_law(&s).unwrap();
        let r2 = 2f64.sqrt();
        let got: Vec<(f64, f64)> = law.atoms().to_vec();
        assert_eq!(got.len(), 3);
        assert!((got[0].0 + r2).abs() < 1e-12 && (got[0].1 - 0.25).abs() < 1e-15);
        assert!(got[1].0.abs() < 1e-12 && (got[1].1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let n = rng.random_range(1..8);
            let mut atoms: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>() * 6.0 - 3.0, rng.random::<f64>() + 0.01)).collect();
            let tot: f64 = atoms.iter().map(|a| a.1).sum();
            atoms.iter_mut().for_each(|a| a.1 /= tot);
            let Ok(law) = AtomicLaw::new(atoms) else { continue };
            let w = exact_wasserstein_atomic_vs_normal(&law);
            assert!((w - brute_w(&law)).abs() < 1e-10, "{w} vs {}", brute_w(&law));
        }
    }

    #[test]
    fn symmetric_law_halves() {
        let law = AtomicLaw::new(vec![(-1.5, 0.2), (-0.3, 0.3), (0.3, 0.3), (1.5, 0.2)]).unwrap();
        let w = exact_wasserstein_atomic_vs_normal(&law);
        let f = |t: f64| {
            let cum: f64 = law.atoms().iter().filter(|a| a.0 <= t).map(|a| a.1).sum();
            (cum - cdf(t)).abs()
        };
        let half = integrate(f, &[0.0, 0.3, 1.5, 40.0], 1e-15, 0.0, 100_000).value;
        assert!((w - 2.0 * half).abs() < 1e-10);
    }

    #[test]
    fn shift_by_zero_is_identity_and_order_free() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
        let b = Bootstrap::new(1);
        let a = empirical_wasserstein_to_normal(&xs, b).unwrap();
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.0).collect();
        let mut rev = xs.clone();
        rev.reverse();
        assert_eq!(a, empirical_wasserstein_to_normal(&shifted, b).unwrap());
        assert_eq!(a, empirical_wasserstein_to_normal(&rev, b).unwrap());
    }

    #[test]
    fn ks_matches_textbook_formula() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut xs: Vec<f64> = (0..300).map(|_| rng.sample::<f64, _>(StandardNormal) * 1.2).collect();
        let k = empirical_kolmogorov_to_normal(&xs, Bootstrap { resamples: 0, seed: 0 }).unwrap();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let want = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n - cdf(x)).max(cdf(x) - i as f64 / n))
            .fold(0.0, f64::max);
        assert!((k.point - want).abs() < 1e-15);
    }

    #[test]
    fn large_normal_sample() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..1_000_000).map(|_| rng.sample(StandardNormal)).collect();
        let (w, k) = empirical_w_and_k(&xs, Bootstrap { resamples: 20, seed: 2 }).unwrap();
        assert!(w.point <= 0.01 && k.point <= 0.005);
        assert!(w.ci_low <= w.point && w.point <= w.ci_high);
        assert!(k.point <= 2.0 * w.point.sqrt());
        let tv = empirical_tv_to_normal(&xs, 64, Bootstrap { resamples: 20, seed: 2 }).unwrap();
        assert!(tv.point <= 0.02, "{tv:?}");
        assert!(tv.bracket.unwrap() <= 0.01);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 3.0).collect();
        let tv = empirical_tv_to_normal(&shifted, 64, Bootstrap { resamples: 0, seed: 2 }).unwrap();
        let exact = 2.0 * cdf(1.5) - 1.0;
        assert!((tv.point - exact).abs() < 0.02, "{} vs {exact}", tv.point);
    }

    #[test]
    fn lattice_samples_refused_for_tv() {
        let xs: Vec<f64> = (0..1000).map(|i| (i % 3) as f64 - 1.0).collect();
        assert!(matches!(
            empirical_tv_to_normal(&xs, 32, Bootstrap::new(0)),
            Err(Error::EstimatorInapplicable(_))
        ));
    }

    #[test]
    fn enumeration_limit() {
        let s = moving_window_spec(20, 2, MarginalModel::rademacher(), vec![1.0, 0.5, 0.25]).unwrap();
        assert!(exact_law(&s).is_ok());
        let three = MarginalModel::Finite {
            values: vec![-1.0, 0.0, 1.0],
            probs: vec![0.25, 0.5, 0.25],
        };
        let s = moving_window_spec(20, 2, three, vec![1.0, 0.5, 0.25]).unwrap();
        assert!(matches!(exact_law(&s), Err(Error::EnumerationLimit { .. })));
        let s = moving_window_spec(4, 0, MarginalModel::standard_normal(), vec![1.0]).unwrap();
        assert!(matches!(exact_law(&s), Err(Error::UnsupportedFamily(_))));
    }

    #[test]
    fn bootstrap_counts_preserve_total() {
        let xs: Vec<f64> = (0..5000).map(|i| ((i * 7) % 11) as f64).collect();
        let g = group(&xs).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut out = vec![0.0; g.counts.len()];
        resample_counts(&g, &mut rng, &mut out);
        assert_eq!(out.iter().sum::<f64>(), 5000.0);
    }
}
