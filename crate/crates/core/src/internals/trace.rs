//! Martingale decomposition over the filtration `F_i = σ(X_1, …, X_i)`.
//!
//! `Y_i = X_i − E(X_i | F_{i−1}) + E(X_{i+1} | F_i)` with `F_0` trivial and
//! `X_{N+1} = 0`. Every quantity is an exact rational indexed by filtration
//! atoms; atoms at level `i` are the distinct prefixes `(X_1, …, X_i)`.

use std::collections::HashMap;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::chain::{q, q_to_f64, FiniteChain, Outcome, Q};
use crate::error::{Error, Result};

/// Atoms of one filtration level.
#[derive(Debug, Clone)]
pub struct Level {
    /// atom index of every outcome
    pub atom_of: Vec<usize>,
    /// atom index at the previous level, per atom
    pub parent: Vec<usize>,
    pub prob: Vec<Q>,
}

impl Level {
    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct MartingaleTrace {
    pub n: usize,
    pub outcomes: Vec<Outcome>,
    /// `levels[i]` holds the atoms of `F_i`, `i = 0..=N`.
    pub levels: Vec<Level>,
    /// `e_prev[i][a] = E(X_{i+1} | F_i)` on atom `a` of level `i` (0-based
    /// coordinate `i`, i.e. the predictable part of the next coordinate).
    pub e_prev: Vec<Vec<Q>>,
    /// `e_next[i][a] = E(X_{i+2} | F_{i+1})` on atom `a` of level `i + 1`,
    /// zero for the last coordinate.
    pub e_next: Vec<Vec<Q>>,
    /// `y[i][a] = Y_{i+1}` on atom `a` of level `i + 1`.
    pub y: Vec<Vec<Q>>,
    /// `cond_y2[i][a] = E(Y_{i+1}² | F_i)` on atom `a` of level `i`.
    pub cond_y2: Vec<Vec<Q>>,
    /// `σ² = E(S²)`
    pub sigma2: Q,
    /// `max_i ‖X_i‖_∞`
    pub max_abs: Q,
}

/// A deliberate corruption for negative-control runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mutation {
    /// Shift `E(X_{i+1} | F_i)` on one atom and rebuild everything downstream.
    ConditionalPrev { coord: usize, atom: usize, delta: f64 },
    /// Shift `E(X_{i+2} | F_{i+1})` on one atom and rebuild downstream.
    ConditionalNext { coord: usize, atom: usize, delta: f64 },
    /// Shift `Y_{i+1}` on one atom without touching anything else.
    Increment { coord: usize, atom: usize, delta: f64 },
}

fn conditional_by_atom(outcomes: &[Outcome], level: &Level, value: impl Fn(&Outcome) -> Q) -> Vec<Q> {
    let mut acc = vec![Q::zero(); level.len()];
    for (o, &a) in outcomes.iter().zip(&level.atom_of) {
        acc[a] += &o.prob * value(o);
    }
    acc.into_iter().zip(&level.prob).map(|(s, p)| s / p).collect()
}

fn build_levels(outcomes: &[Outcome], n: usize) -> Vec<Level> {
    let mut levels = Vec::with_capacity(n + 1);
    let total: Q = outcomes.iter().map(|o| o.prob.clone()).sum();
    levels.push(Level {
        atom_of: vec![0; outcomes.len()],
        parent: vec![0],
        prob: vec![total],
    });
    for i in 0..n {
        let prev = &levels[i];
        let mut ids: HashMap<(usize, &Q), usize> = HashMap::new();
        let mut atom_of = Vec::with_capacity(outcomes.len());
        let mut parent = Vec::new();
        let mut prob: Vec<Q> = Vec::new();
        for (o, &pa) in outcomes.iter().zip(&prev.atom_of) {
            let next = ids.len();
            let id = *ids.entry((pa, &o.x[i])).or_insert(next);
            if id == prob.len() {
                parent.push(pa);
                prob.push(Q::zero());
            }
            prob[id] += &o.prob;
            atom_of.push(id);
        }
        levels.push(Level { atom_of, parent, prob });
    }
    levels
}

/// Builds the decomposition by exact enumeration.
pub fn martingale_decompose(chain: &FiniteChain) -> Result<MartingaleTrace> {
    chain.validate()?;
    let n = chain.n_vars();
    let outcomes = chain.enumerate()?;
    let levels = build_levels(&outcomes, n);
    let e_prev: Vec<Vec<Q>> = (0..n)
        .map(|i| conditional_by_atom(&outcomes, &levels[i], |o| o.x[i].clone()))
        .collect();
    let e_next: Vec<Vec<Q>> = (0..n)
        .map(|i| {
            if i + 1 < n {
                conditional_by_atom(&outcomes, &levels[i + 1], |o| o.x[i + 1].clone())
            } else {
                vec![Q::zero(); levels[n].len()]
            }
        })
        .collect();
    let sigma2: Q = outcomes
        .iter()
        .map(|o| {
            let s: Q = o.x.iter().cloned().sum();
            &o.prob * &s * &s
        })
        .sum();
    if !sigma2.is_positive() {
        return Err(Error::InvalidSpec("sigma2 = 0".into()));
    }
    let mut trace = MartingaleTrace {
        n,
        max_abs: chain.max_abs(),
        outcomes,
        levels,
        e_prev,
        e_next,
        y: Vec::new(),
        cond_y2: Vec::new(),
        sigma2,
    };
    trace.rebuild_increments();
    Ok(trace)
}

impl MartingaleTrace {
    /// Recomputes `Y` and `E(Y²|F)` from the stored conditional expectations.
    pub fn rebuild_increments(&mut self) {
        let n = self.n;
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let lvl = &self.levels[i + 1];
            let mut yi = vec![None; lvl.len()];
            for (o, &a) in self.outcomes.iter().zip(&lvl.atom_of) {
                if yi[a].is_none() {
                    let pa = lvl.parent[a];
                    yi[a] = Some(&o.x[i] - &self.e_prev[i][pa] + &self.e_next[i][a]);
                }
            }
            y.push(yi.into_iter().map(|v| v.expect("every atom has an outcome")).collect());
        }
        self.y = y;
        self.cond_y2 = (0..n)
            .map(|i| {
                let lvl = &self.levels[i];
                let mut acc = vec![Q::zero(); lvl.len()];
                let next = &self.levels[i + 1];
                for a in 0..next.len() {
                    let v = &self.y[i][a];
                    acc[next.parent[a]] += &next.prob[a] * v * v;
                }
                acc.into_iter().zip(&lvl.prob).map(|(s, p)| s / p).collect()
            })
            .collect();
    }

    /// Applies a corruption; conditional-expectation mutations propagate
    /// into `Y` and `E(Y²|F)`.
    pub fn mutate(&mut self, m: Mutation) -> Result<()> {
        let bad = || Error::Domain(format!("mutation target out of range: {m:?}"));
        match m {
            Mutation::ConditionalPrev { coord, atom, delta } => {
                let slot = self.e_prev.get_mut(coord).and_then(|v| v.get_mut(atom)).ok_or_else(bad)?;
                *slot += super::chain::q_from_f64(delta)?;
                self.rebuild_increments();
            }
            Mutation::ConditionalNext { coord, atom, delta } => {
                let slot = self.e_next.get_mut(coord).and_then(|v| v.get_mut(atom)).ok_or_else(bad)?;
                *slot += super::chain::q_from_f64(delta)?;
                self.rebuild_increments();
            }
            Mutation::Increment { coord, atom, delta } => {
                let slot = self.y.get_mut(coord).and_then(|v| v.get_mut(atom)).ok_or_else(bad)?;
                *slot += super::chain::q_from_f64(delta)?;
            }
        }
        Ok(())
    }

    /// `Y_{i+1}` on outcome `w`.
    pub fn y_at(&self, i: usize, w: usize) -> &Q {
        &self.y[i][self.levels[i + 1].atom_of[w]]
    }

    /// `V² = Σ_i E(Y_i² | F_{i−1})` on outcome `w`.
    pub fn v2_at(&self, w: usize) -> Q {
        (0..self.n).map(|i| self.cond_y2[i][self.levels[i].atom_of[w]].clone()).sum()
    }

    /// `W_i = Σ_{k≤i} E(Y_k²/σ² | F_{k−1})` for `i = 0..=N` on outcome `w`.
    pub fn w_path(&self, w: usize) -> Vec<Q> {
        let mut out = Vec::with_capacity(self.n + 1);
        let mut acc = Q::zero();
        out.push(acc.clone());
        for i in 0..self.n {
            acc += &self.cond_y2[i][self.levels[i].atom_of[w]] / &self.sigma2;
            out.push(acc.clone());
        }
        out
    }

    /// `τ = max{m ≥ 1 : W_m ≤ 1}` on outcome `w` (0 if no such `m`).
    pub fn tau_at(&self, w: usize) -> usize {
        let path = self.w_path(w);
        let one = q(1, 1);
        (1..=self.n).rev().find(|&m| path[m] <= one).unwrap_or(0)
    }

    /// `16γ² = 144·max‖X‖²/σ²` with `γ = 3·max‖X‖_∞/σ`.
    pub fn sixteen_gamma2(&self) -> Q {
        q(144, 1) * &self.max_abs * &self.max_abs / &self.sigma2
    }

    pub fn gamma(&self) -> f64 {
        3.0 * q_to_f64(&self.max_abs) / q_to_f64(&self.sigma2).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_case_has_identity_increments() {
        let c = FiniteChain::independent_rademacher(4).unwrap();
        let t = martingale_decompose(&c).unwrap();
        for w in 0..t.outcomes.len() {
            for i in 0..4 {
                assert_eq!(t.y_at(i, w), &t.outcomes[w].x[i]);
            }
        }
        assert_eq!(t.sigma2, q(4, 1));
    }

    #[test]
    fn product_chain() {
        let c = FiniteChain::rademacher_products(2).unwrap();
        let t = martingale_decompose(&c).unwrap();
        assert_eq!(t.outcomes.len(), 8);
        for w in 0..8 {
            assert_eq!(t.y_at(0, w), &t.outcomes[w].x[0]);
            assert_eq!(t.y_at(1, w), &t.outcomes[w].x[1]);
            assert_eq!(t.v2_at(w), q(2, 1));
        }
        assert_eq!(t.sigma2, q(2, 1));
        assert!(t.e_next[0].iter().all(Zero::is_zero));
    }

    #[test]
    fn atoms_follow_observed_prefixes() {
        // X_1 = ε_1 ε_2 does not reveal ε_2: two atoms at level 1, not four
        let c = FiniteChain::rademacher_products(3).unwrap();
        let t = martingale_decompose(&c).unwrap();
        assert_eq!(t.levels[1].len(), 2);
        assert_eq!(t.levels[3].len(), 8);
    }

    #[test]
    fn single_coordinate_chain() {
        let c = FiniteChain::independent_rademacher(1).unwrap();
        let t = martingale_decompose(&c).unwrap();
        assert_eq!(t.levels.len(), 2);
        assert_eq!(t.tau_at(0), 1);
    }
}
