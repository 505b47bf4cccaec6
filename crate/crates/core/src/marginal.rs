//! Marginal laws of single array entries and innovations.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian;

/// Maximum number of atoms kept when convolving finite laws.
pub const MAX_CONVOLUTION_ATOMS: usize = 200_000;

/// One uniform component of a [`MarginalModel::UniformUnion`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformPiece {
    pub lo: f64,
    pub hi: f64,
    pub weight: f64,
}

/// The law of one real random variable, with whatever closed-form knowledge
/// is available for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarginalModel {
    /// Finitely many atoms.
    Finite { values: Vec<f64>, probs: Vec<f64> },
    /// Centered normal with standard deviation `sd`.
    Normal { sd: f64 },
    /// `scale · V` where `V` has density `(3/2)|x|^{-4}` on `|x| ≥ 1`.
    HeavyTail { scale: f64 },
    /// Mixture of uniform laws on intervals.
    UniformUnion { pieces: Vec<UniformPiece> },
    /// Known only by name (and possibly its second moment); cannot be sampled.
    SampleOnly {
        label: String,
        second_moment: Option<f64>,
    },
}

impl MarginalModel {
    pub fn rademacher() -> Self {
        MarginalModel::Finite {
            values: vec![-1.0, 1.0],
            probs: vec![0.5, 0.5],
        }
    }

    pub fn standard_normal() -> Self {
        MarginalModel::Normal { sd: 1.0 }
    }

    pub fn heavy_tail() -> Self {
        MarginalModel::HeavyTail { scale: 1.0 }
    }

    /// Uniform on `(-h, h)`.
    pub fn uniform_symmetric(h: f64) -> Self {
        MarginalModel::UniformUnion {
            pieces: vec![UniformPiece {
                lo: -h,
                hi: h,
                weight: 1.0,
            }],
        }
    }

    /// Uniform on `(-1, -1 + a) ∪ (1 - a, 1)`.
    pub fn uniform_edges(a: f64) -> Self {
        MarginalModel::UniformUnion {
            pieces: vec![
                UniformPiece {
                    lo: -1.0,
                    hi: -1.0 + a,
                    weight: 0.5,
                },
                UniformPiece {
                    lo: 1.0 - a,
                    hi: 1.0,
                    weight: 0.5,
                },
            ],
        }
    }

    /// Checks internal consistency and centering.
    pub fn validate(&self) -> Result<()> {
        match self {
            MarginalModel::Finite { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::InvalidSpec("finite law: values/probs mismatch".into()));
                }
                if probs.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
                    return Err(Error::InvalidSpec("finite law: probabilities must be > 0".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSpec("finite law: non-finite atom".into()));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidSpec(format!("finite law: total mass {total}")));
                }
            }
            MarginalModel::Normal { sd } => {
                if !(*sd >= 0.0) || !sd.is_finite() {
                    return Err(Error::InvalidSpec(format!("normal law: bad sd {sd}")));
                }
            }
            MarginalModel::HeavyTail { scale } => {
                if !(*scale > 0.0) || !scale.is_finite() {
                    return Err(Error::InvalidSpec(format!("heavy-tail law: bad scale {scale}")));
                }
            }
            MarginalModel::UniformUnion { pieces } => {
                if pieces.is_empty() {
                    return Err(Error::InvalidSpec("uniform union: no pieces".into()));
                }
                for p in pieces {
                    if !(p.hi > p.lo) || !(p.weight > 0.0) || !p.lo.is_finite() || !p.hi.is_finite() {
                        return Err(Error::InvalidSpec(format!("uniform union: bad piece {p:?}")));
                    }
                }
                let total: f64 = pieces.iter().map(|p| p.weight).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidSpec(format!("uniform union: total weight {total}")));
                }
            }
            MarginalModel::SampleOnly { second_moment, .. } => {
                if let Some(s) = second_moment {
                    if !(*s >= 0.0) {
                        return Err(Error::InvalidSpec("sample-only: negative second moment".into()));
                    }
                }
            }
        }
        if let Some(mu) = self.mean() {
            let scale = self.second_moment().unwrap_or(1.0).sqrt().max(1.0);
            if mu.abs() > 1e-12 * scale {
                return Err(Error::InvalidSpec(format!("marginal not centered: mean {mu}")));
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            MarginalModel::Finite { values, probs } => {
                Some(values.iter().zip(probs).map(|(v, p)| v * p).sum())
            }
            MarginalModel::Normal { .. } | MarginalModel::HeavyTail { .. } => Some(0.0),
            MarginalModel::UniformUnion { pieces } => {
                Some(pieces.iter().map(|p| p.weight * 0.5 * (p.lo + p.hi)).sum())
            }
            MarginalModel::SampleOnly { .. } => None,
        }
    }

    /// E[X²].
    pub fn second_moment(&self) -> Option<f64> {
        match self {
            MarginalModel::Finite { values, probs } => {
                Some(values.iter().zip(probs).map(|(v, p)| v * v * p).sum())
            }
            MarginalModel::Normal { sd } => Some(sd * sd),
            MarginalModel::HeavyTail { scale } => Some(3.0 * scale * scale),
            MarginalModel::UniformUnion { pieces } => Some(
                pieces
                    .iter()
                    .map(|p| p.weight * (p.hi.powi(3) - p.lo.powi(3)) / (3.0 * (p.hi - p.lo)))
                    .sum(),
            ),
            MarginalModel::SampleOnly { second_moment, .. } => *second_moment,
        }
    }

    /// E[X² 1{|X| > u}] for `u ≥ 0`, strict inequality.
    pub fn tail_second_moment(&self, u: f64) -> Option<f64> {
        let u = u.max(0.0);
        match self {
            MarginalModel::Finite { values, probs } => Some(
                values
                    .iter()
                    .zip(probs)
                    .filter(|(v, _)| v.abs() > u)
                    .map(|(v, p)| v * v * p)
                    .sum(),
            ),
            MarginalModel::Normal { sd } => {
                if *sd == 0.0 {
                    return Some(0.0);
                }
                let z = u / sd;
                Some(2.0 * sd * sd * (z * gaussian::pdf(z) + gaussian::sf(z)))
            }
            MarginalModel::HeavyTail { scale } => Some(3.0 * scale * scale / (u / scale).max(1.0)),
            MarginalModel::UniformUnion { pieces } => {
                let mut total = 0.0;
                for p in pieces {
                    let dens = p.weight / (p.hi - p.lo);
                    let a = p.lo.max(u);
                    if p.hi > a {
                        total += dens * (p.hi.powi(3) - a.powi(3)) / 3.0;
                    }
                    let b = p.hi.min(-u);
                    if b > p.lo {
                        total += dens * (b.powi(3) - p.lo.powi(3)) / 3.0;
                    }
                }
                Some(total)
            }
            MarginalModel::SampleOnly { .. } => None,
        }
    }

    /// Almost-sure bound on |X|, when one exists.
    pub fn max_abs(&self) -> Option<f64> {
        match self {
            MarginalModel::Finite { values, .. } => {
                Some(values.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            }
            MarginalModel::Normal { sd } if *sd == 0.0 => Some(0.0),
            MarginalModel::UniformUnion { pieces } => {
                Some(pieces.iter().fold(0.0_f64, |m, p| m.max(p.lo.abs()).max(p.hi.abs())))
            }
            _ => None,
        }
    }

    pub fn is_finite_support(&self) -> bool {
        matches!(self, MarginalModel::Finite { .. })
    }

    pub fn is_samplable(&self) -> bool {
        !matches!(self, MarginalModel::SampleOnly { .. })
    }

    /// Law of `w · X`.
    pub fn scaled(&self, w: f64) -> Option<MarginalModel> {
        Some(match self {
            MarginalModel::Finite { values, probs } => MarginalModel::Finite {
                values: values.iter().map(|v| v * w).collect(),
                probs: probs.clone(),
            },
            MarginalModel::Normal { sd } => MarginalModel::Normal { sd: sd * w.abs() },
            MarginalModel::HeavyTail { scale } => {
                if w == 0.0 {
                    MarginalModel::Finite {
                        values: vec![0.0],
                        probs: vec![1.0],
                    }
                } else {
                    MarginalModel::HeavyTail {
                        scale: scale * w.abs(),
                    }
                }
            }
            MarginalModel::UniformUnion { pieces } => {
                if w == 0.0 {
                    return Some(MarginalModel::Finite {
                        values: vec![0.0],
                        probs: vec![1.0],
                    });
                }
                MarginalModel::UniformUnion {
                    pieces: pieces
                        .iter()
                        .map(|p| {
                            let (a, b) = (p.lo * w, p.hi * w);
                            UniformPiece {
                                lo: a.min(b),
                                hi: a.max(b),
                                weight: p.weight,
                            }
                        })
                        .collect(),
                }
            }
            MarginalModel::SampleOnly { .. } => return None,
        })
    }

    /// Law of `Σ_j w_j ε_j` for iid `ε_j` with this law, when closed form.
    pub fn weighted_iid_sum(&self, weights: &[f64]) -> Option<MarginalModel> {
        let nonzero: Vec<f64> = weights.iter().copied().filter(|w| *w != 0.0).collect();
        if nonzero.is_empty() {
            return Some(MarginalModel::Finite {
                values: vec![0.0],
                probs: vec![1.0],
            });
        }
        if nonzero.len() == 1 {
            return self.scaled(nonzero[0]);
        }
        match self {
            MarginalModel::Normal { sd } => Some(MarginalModel::Normal {
                sd: sd * nonzero.iter().map(|w| w * w).sum::<f64>().sqrt(),
            }),
            MarginalModel::Finite { values, probs } => {
                let mut atoms: Vec<(f64, f64)> = vec![(0.0, 1.0)];
                for &w in &nonzero {
                    let mut next = Vec::with_capacity(atoms.len() * values.len());
                    for &(x, p) in &atoms {
                        for (v, q) in values.iter().zip(probs) {
                            next.push((x + w * v, p * q));
                        }
                    }
                    atoms = merge_atoms(next);
                    if atoms.len() > MAX_CONVOLUTION_ATOMS {
                        return None;
                    }
                }
                let (values, probs) = atoms.into_iter().unzip();
                Some(MarginalModel::Finite { values, probs })
            }
            _ => None,
        }
    }

    /// One draw. Callers must check [`MarginalModel::is_samplable`] first.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MarginalModel::Finite { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("validated non-empty")
            }
            MarginalModel::Normal { sd } => {
                let z: f64 = rng.sample(StandardNormal);
                sd * z
            }
            MarginalModel::HeavyTail { scale } => {
                let bits: u64 = rng.random();
                // uniform on (0, 1] from the top 53 bits, sign from the lowest
                let u = ((bits >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
                let mag = scale * u.powf(-1.0 / 3.0);
                if bits & 1 == 0 {
                    mag
                } else {
                    -mag
                }
            }
            MarginalModel::UniformUnion { pieces } => {
                let piece = if pieces.len() == 1 {
                    &pieces[0]
                } else {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut chosen = pieces.last().expect("validated non-empty");
                    for p in pieces {
                        acc += p.weight;
                        if u < acc {
                            chosen = p;
                            break;
                        }
                    }
                    chosen
                };
                let u: f64 = rng.random();
                piece.lo + (piece.hi - piece.lo) * u
            }
            MarginalModel::SampleOnly { label, .. } => {
                panic!("sample-only marginal `{label}` has no sampler")
            }
        }
    }
}

/// Sorts atoms by value and merges values equal up to a relative 1e-12.
pub(crate) fn merge_atoms(mut atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (x, p) in atoms {
        match out.last_mut() {
            Some(last) if (x - last.0).abs() <= 1e-12 * (1.0 + x.abs().max(last.0.abs())) => {
                last.1 += p;
            }
            _ => out.push((x, p)),
        }
    }
    out
}
