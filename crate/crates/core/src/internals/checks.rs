//! Exact checks of the decomposition identities and the inequalities built on it.

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chain::{q, q_from_f64, q_to_f64, random_chain, FiniteChain, Q};
use super::trace::{martingale_decompose, MartingaleTrace, Mutation};
use crate::error::{Error, Result};

/// Result of one named check. `margin` is `rhs − lhs` for inequalities and
/// `−max|deviation|` for identities, as a float for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
    pub detail: String,
}

fn failure(check: &str, level: usize, atom: usize, detail: String) -> Error {
    Error::IdentityFailure {
        check: check.into(),
        level,
        atom,
        detail,
    }
}

/// `E(Y_i | F_{i−1}) = 0` on every atom, `Σ Y_i = S` on every outcome,
/// `Σ E(Y_i²) = σ²` and `Y_i = X_i − E(X_i|F_{i−1}) + E(X_{i+1}|F_i)`.
///
/// All comparisons are exact; the first violation is returned as an error.
pub fn verify_identities(t: &MartingaleTrace) -> Result<Vec<CheckResult>> {
    let n = t.n;
    for i in 0..n {
        let next = &t.levels[i + 1];
        let mut acc = vec![Q::zero(); t.levels[i].len()];
        for a in 0..next.len() {
            acc[next.parent[a]] += &next.prob[a] * &t.y[i][a];
        }
        if let Some((a, v)) = acc.iter().enumerate().find(|(_, v)| !v.is_zero()) {
            return Err(failure(
                "conditional-mean-zero",
                i + 1,
                a,
                format!("E(Y_{}|F_{}) = {:e}", i + 1, i, q_to_f64(&(v / &t.levels[i].prob[a]))),
            ));
        }
    }
    for (w, o) in t.outcomes.iter().enumerate() {
        let s: Q = o.x.iter().cloned().sum();
        let ys: Q = (0..n).map(|i| t.y_at(i, w).clone()).sum();
        if s != ys {
            return Err(failure(
                "increments-sum-to-s",
                n,
                t.levels[n].atom_of[w],
                format!("sum Y - S = {:e} on outcome {w}", q_to_f64(&(ys - s))),
            ));
        }
        for i in 0..n {
            let a = t.levels[i + 1].atom_of[w];
            let def = &o.x[i] - &t.e_prev[i][t.levels[i].atom_of[w]] + &t.e_next[i][a];
            if &def != t.y_at(i, w) {
                return Err(failure(
                    "increment-definition",
                    i + 1,
                    a,
                    format!("stored Y_{} differs from its definition by {:e}", i + 1, q_to_f64(&(def - t.y_at(i, w)))),
                ));
            }
        }
    }
    let total: Q = (0..n)
        .map(|i| {
            let lvl = &t.levels[i];
            (0..lvl.len()).map(|a| &lvl.prob[a] * &t.cond_y2[i][a]).sum::<Q>()
        })
        .sum();
    if total != t.sigma2 {
        return Err(failure(
            "variance-decomposition",
            0,
            0,
            format!("sum E(Y_i^2) - sigma2 = {:e}", q_to_f64(&(total - &t.sigma2))),
        ));
    }
    Ok(vec![
        CheckResult {
            name: "conditional-mean-zero".into(),
            passed: true,
            margin: 0.0,
            detail: String::new(),
        },
        CheckResult {
            name: "increments-sum-to-s".into(),
            passed: true,
            margin: 0.0,
            detail: String::new(),
        },
        CheckResult {
            name: "variance-decomposition".into(),
            passed: true,
            margin: 0.0,
            detail: String::new(),
        },
    ])
}

/// `E(partial_sum_j − partial_sum_i | F_i) = 0` for all `j > i` on every
/// atom, with `partial_sum_i = Σ_{k≤i} Y_k`.
pub fn check_partial_sum_martingale(t: &MartingaleTrace) -> Result<CheckResult> {
    let n = t.n;
    for i in 0..n {
        let lvl = &t.levels[i];
        let mut acc = vec![Q::zero(); lvl.len()];
        for j in i..n {
            // adds E(Y_{j+1} 1_atom) cumulatively: partial_sum_{j+1} − partial_sum_i
            for (w, o) in t.outcomes.iter().enumerate() {
                acc[lvl.atom_of[w]] += &o.prob * t.y_at(j, w);
            }
            if let Some((a, _)) = acc.iter().enumerate().find(|(_, v)| !v.is_zero()) {
                return Err(failure(
                    "partial-sum-martingale",
                    i,
                    a,
                    format!("E(partial_sum_{} - partial_sum_{i} | F_{i}) != 0", j + 1),
                ));
            }
        }
    }
    Ok(CheckResult {
        name: "partial-sum-martingale".into(),
        passed: true,
        margin: 0.0,
        detail: String::new(),
    })
}

/// Exact `E[(V²/σ² − 1)²]` against `16γ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

pub fn check_vg8uj2(t: &MartingaleTrace) -> ConcentrationReport {
    let one = q(1, 1);
    let lhs: Q = t
        .outcomes
        .iter()
        .enumerate()
        .map(|(w, o)| {
            let d = t.v2_at(w) / &t.sigma2 - &one;
            &o.prob * &d * &d
        })
        .sum();
    let rhs = t.sixteen_gamma2();
    let margin = &rhs - &lhs;
    ConcentrationReport {
        lhs: q_to_f64(&lhs),
        rhs: q_to_f64(&rhs),
        margin: q_to_f64(&margin),
        holds: !margin.is_negative(),
    }
}

/// Law of `τ` and the unit conditional-variance identity of the embedded
/// martingale `J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingReport {
    /// `(m, P(τ = m))` for every value taken.
    pub law: Vec<(usize, f64)>,
    pub unit_variance: bool,
    pub stopping_time: bool,
    /// `E(J_{N+1}²|F_N) ≡ 0`
    pub final_increment_vanishes: bool,
}

/// `E(J_i²|F_{i−1}) = 1{τ ≥ i}(W_i − W_{i−1}) + 1{τ = i−1}(1 − W_{i−1})` for
/// `i = 1..=N+1` with `W_{N+1} := W_N`; these must sum to 1 on every outcome.
/// `{τ ≥ i}` must be constant on the atoms of `F_{i−1}`.
pub fn stopping_time_tau(t: &MartingaleTrace) -> Result<StoppingReport> {
    let n = t.n;
    let one = q(1, 1);
    let mut law: Vec<Q> = vec![Q::zero(); n + 1];
    let mut final_zero = true;
    let mut taus = Vec::with_capacity(t.outcomes.len());
    for (w, o) in t.outcomes.iter().enumerate() {
        let path = t.w_path(w);
        let tau = t.tau_at(w);
        taus.push(tau);
        law[tau] += &o.prob;
        let mut total = Q::zero();
        for i in 1..=n + 1 {
            if tau >= i && i <= n {
                total += &path[i] - &path[i - 1];
            }
            if tau == i - 1 {
                let piece = &one - &path[i - 1];
                if i == n + 1 && !piece.is_zero() {
                    final_zero = false;
                }
                total += piece;
            }
        }
        if total != one {
            return Err(failure(
                "unit-conditional-variance",
                n + 1,
                t.levels[n].atom_of[w],
                format!("sum E(J_k^2|F_k-1) = {} on outcome {w}", q_to_f64(&total)),
            ));
        }
    }
    for i in 1..=n {
        let lvl = &t.levels[i - 1];
        let mut seen: Vec<Option<bool>> = vec![None; lvl.len()];
        for (w, &tau) in taus.iter().enumerate() {
            let a = lvl.atom_of[w];
            let v = tau >= i;
            match seen[a] {
                None => seen[a] = Some(v),
                Some(prev) if prev != v => {
                    return Err(failure("stopping-time", i - 1, a, format!("{{tau >= {i}}} splits an atom of F_{}", i - 1)))
                }
                _ => {}
            }
        }
    }
    Ok(StoppingReport {
        law: law
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(m, p)| (m, q_to_f64(p)))
            .collect(),
        unit_variance: true,
        stopping_time: true,
        final_increment_vanishes: final_zero,
    })
}

/// Exact truncation split at level `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationSplit {
    pub c: f64,
    /// `Var(Σ trunc_part_i)`
    pub var_trunc: f64,
    pub sigma_c2: f64,
    pub l_of_c: f64,
    /// `3L(c) − Var(Σ trunc_part_i)`
    pub margin_trunc: f64,
    /// `13L(c) − |σ_c² − 1|`
    pub margin_sigma_c: f64,
    pub holds: bool,
}

/// `trunc_part_i = (X_i/σ)1{A_i} − E(…)`, `A_i = {|X_i| > cσ}`, with
/// `σ_c² = Var(Σ (X_i/σ) 1{A_i^c})` and `L(c) = Σ E[X_i² 1{A_i}]/σ²`.
pub fn truncation_split(t: &MartingaleTrace, c: f64) -> Result<TruncationSplit> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!("c must be > 0, got {c}")));
    }
    let cq = q_from_f64(c)?;
    let thresh = &cq * &cq * &t.sigma2; // |X| > cσ ⟺ X² > c²σ²
    let n = t.n;
    let mut mean_hi = vec![Q::zero(); n];
    let mut l = Q::zero();
    for o in &t.outcomes {
        for (mh, x) in mean_hi.iter_mut().zip(&o.x) {
            if x * x > thresh {
                *mh += &o.prob * x;
                l += &o.prob * x * x;
            }
        }
    }
    l /= &t.sigma2;
    // E X_i = 0, so the low part has mean −mean_hi
    let mut var_hi = Q::zero();
    let mut var_lo = Q::zero();
    let hi_total: Q = mean_hi.iter().cloned().sum();
    for o in &t.outcomes {
        let mut hi = Q::zero();
        let mut lo = Q::zero();
        for i in 0..n {
            let x = &o.x[i];
            if x * x > thresh {
                hi += x;
            } else {
                lo += x;
            }
        }
        let dh = hi - &hi_total;
        let dl = lo + &hi_total;
        var_hi += &o.prob * &dh * &dh;
        var_lo += &o.prob * &dl * &dl;
    }
    var_hi /= &t.sigma2;
    var_lo /= &t.sigma2;
    let m1 = q(3, 1) * &l - &var_hi;
    let m2 = q(13, 1) * &l - (&var_lo - q(1, 1)).abs();
    Ok(TruncationSplit {
        c,
        var_trunc: q_to_f64(&var_hi),
        sigma_c2: q_to_f64(&var_lo),
        l_of_c: q_to_f64(&l),
        margin_trunc: q_to_f64(&m1),
        margin_sigma_c: q_to_f64(&m2),
        holds: !m1.is_negative() && !m2.is_negative(),
    })
}

/// Everything checked for one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub seed: Option<u64>,
    pub n_vars: usize,
    pub alphabet: usize,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl ChainReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn from_identity(name: &str, r: Result<Vec<CheckResult>>) -> Vec<CheckResult> {
    match r {
        Ok(v) => v,
        Err(e) => vec![CheckResult {
            name: name.into(),
            passed: false,
            margin: f64::NAN,
            detail: e.to_string(),
        }],
    }
}

/// Default truncation levels for a chain: relative to `max‖X‖/σ`, spanning
/// "above every value" down to "below every nonzero value".
pub fn default_levels(t: &MartingaleTrace) -> Vec<f64> {
    let r = q_to_f64(&t.max_abs) / q_to_f64(&t.sigma2).sqrt();
    [1.5, 0.9, 0.5, 0.25, 0.01].iter().map(|f| f * r).collect()
}

/// Runs the full suite on one chain, optionally after a mutation.
pub fn run_suite(chain: &FiniteChain, levels: Option<&[f64]>, mutation: Option<Mutation>) -> Result<ChainReport> {
    let mut t = martingale_decompose(chain)?;
    if let Some(m) = mutation {
        t.mutate(m)?;
    }
    let mut checks = from_identity("identities", verify_identities(&t));
    checks.extend(from_identity(
        "partial-sum-martingale",
        check_partial_sum_martingale(&t).map(|c| vec![c]),
    ));
    let conc = check_vg8uj2(&t);
    checks.push(CheckResult {
        name: "conditional-variance-concentration".into(),
        passed: conc.holds,
        margin: conc.margin,
        detail: format!("E[(V2/s2-1)^2]={:e} 16g^2={:e}", conc.lhs, conc.rhs),
    });
    match stopping_time_tau(&t) {
        Ok(s) => checks.push(CheckResult {
            name: "unit-conditional-variance".into(),
            passed: s.unit_variance && s.stopping_time,
            margin: 0.0,
            detail: format!("tau law {:?}", s.law),
        }),
        Err(e) => checks.push(CheckResult {
            name: "unit-conditional-variance".into(),
            passed: false,
            margin: f64::NAN,
            detail: e.to_string(),
        }),
    }
    let levels = levels.map(<[f64]>::to_vec).unwrap_or_else(|| default_levels(&t));
    for c in levels {
        let s = truncation_split(&t, c)?;
        checks.push(CheckResult {
            name: format!("truncation-split c={c:.6e}"),
            passed: s.holds,
            margin: s.margin_trunc.min(s.margin_sigma_c),
            detail: format!("var_trunc={:e} sigma_c2={:e} L={:e}", s.var_trunc, s.sigma_c2, s.l_of_c),
        });
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(ChainReport {
        seed: None,
        n_vars: chain.n_vars(),
        alphabet: chain.alphabet_size(),
        checks,
        passed,
    })
}

/// Suite over `count` random chains with seeds `root + 0, root + 1, …`, in
/// parallel, reported in seed order.
pub fn random_sweep(root: u64, count: usize, max_n: usize) -> Result<Vec<ChainReport>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let seed = root.wrapping_add(i);
            let chain = random_chain(seed, max_n)?;
            let mut r = run_suite(&chain, None, None)?;
            r.seed = Some(seed);
            Ok(r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_rademacher_passes_everything() {
        let c = FiniteChain::independent_rademacher(5).unwrap();
        let r = run_suite(&c, None, None).unwrap();
        assert!(r.passed, "{r:?}");
        let t = martingale_decompose(&c).unwrap();
        let s = stopping_time_tau(&t).unwrap();
        assert_eq!(s.law, vec![(5, 1.0)]);
        assert!(s.final_increment_vanishes);
    }

    #[test]
    fn product_chain_has_zero_concentration_lhs() {
        let t = martingale_decompose(&FiniteChain::rademacher_products(2).unwrap()).unwrap();
        let r = check_vg8uj2(&t);
        assert_eq!(r.lhs, 0.0);
        assert!(r.holds);
    }

    #[test]
    fn truncation_extremes() {
        let c = FiniteChain::rademacher_products(3).unwrap();
        let t = martingale_decompose(&c).unwrap();
        let above = truncation_split(&t, 1.0).unwrap(); // max|X|/σ = 1/√3
        assert_eq!((above.var_trunc, above.l_of_c, above.sigma_c2), (0.0, 0.0, 1.0));
        assert!(above.holds);
        let below = truncation_split(&t, 0.1).unwrap();
        assert_eq!(below.sigma_c2, 0.0);
        assert!(below.holds);
    }

    #[test]
    fn random_sweep_passes() {
        let reports = random_sweep(1000, 50, 10).unwrap();
        for r in &reports {
            assert!(r.passed, "seed {:?}: {:?}", r.seed, r.failures().collect::<Vec<_>>());
        }
    }

    #[test]
    fn mutations_are_detected() {
        let c = random_chain(17, 6).unwrap();
        let n = c.n_vars();
        for m in [
            Mutation::ConditionalPrev { coord: n - 1, atom: 0, delta: 1e-6 },
            Mutation::ConditionalNext { coord: 0, atom: 0, delta: 1e-6 },
            Mutation::Increment { coord: 0, atom: 0, delta: 1e-6 },
        ] {
            let r = run_suite(&c, None, Some(m)).unwrap();
            assert!(!r.passed, "{m:?} went undetected");
        }
    }
}
