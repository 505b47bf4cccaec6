//! Explicit bound formulas, grid minimization over the truncation level and
//! the derived Kolmogorov and total-variation bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{l_curve, u_curve, McConfig, UMethod};
use crate::generators::coordinate_marginal;
use crate::marginal::MarginalModel;
use crate::model::{ArraySpec, BoundKind, BoundReport, BoundTerm, TruncationReport};

/// Standard errors added to Monte Carlo functionals for the pessimistic curve.
pub const PESSIMISTIC_SE: f64 = 5.0;
pub const DEFAULT_GRID_POINTS: usize = 200;
pub const DEFAULT_GRID_MIN: f64 = 1e-4;
pub const DEFAULT_GRID_MAX: f64 = 10.0;
const MAX_BREAKPOINTS: usize = 64;

fn check_inputs(functional: f64, c: f64) -> Result<()> {
    if !(functional >= 0.0) || !functional.is_finite() {
        return Err(Error::Domain(format!("functional must be finite and >= 0, got {functional}")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!("c must be finite and > 0, got {c}")));
    }
    Ok(())
}

/// `30(c^{1/3} + 12√U(c/2))`, capped at √2.
pub fn wasserstein_bound_m2(u_half_c: f64, c: f64) -> Result<BoundReport> {
    check_inputs(u_half_c, c)?;
    Ok(BoundReport::from_terms(
        BoundKind::WassersteinM2,
        c,
        vec![
            BoundTerm { name: "level".into(), value: 30.0 * c.cbrt() },
            BoundTerm { name: "tail".into(), value: 360.0 * u_half_c.sqrt() },
        ],
        None,
    ))
}

/// `30(c^{1/3} + 6√L(c))`, capped at √2.
pub fn wasserstein_bound_m1(l_c: f64, c: f64) -> Result<BoundReport> {
    check_inputs(l_c, c)?;
    Ok(BoundReport::from_terms(
        BoundKind::WassersteinM1,
        c,
        vec![
            BoundTerm { name: "level".into(), value: 30.0 * c.cbrt() },
            BoundTerm { name: "tail".into(), value: 180.0 * l_c.sqrt() },
        ],
        None,
    ))
}

/// `min(1, 2√d_W)`.
pub fn kolmogorov_from_wasserstein(dw: f64) -> Result<f64> {
    if !(dw >= 0.0) {
        return Err(Error::Domain(format!("d_W must be >= 0, got {dw}")));
    }
    Ok((2.0 * dw.sqrt()).min(1.0))
}

/// `√120·B^{1/2} + 30^{1/3}·l^{2/3}·B^{1/3}`, capped at 1, where
/// `B = c^{1/3} + 12√U(c/2)`.
pub fn tv_bound(b: f64, l_n: f64) -> Result<BoundReport> {
    if !(b >= 0.0) || !(l_n >= 0.0) {
        return Err(Error::Domain(format!("need B >= 0 and l >= 0, got B={b} l={l_n}")));
    }
    Ok(BoundReport::from_terms(
        BoundKind::Tv,
        f64::NAN,
        vec![
            BoundTerm { name: "wasserstein".into(), value: 120f64.sqrt() * b.sqrt() },
            BoundTerm { name: "smoothing".into(), value: 30f64.cbrt() * l_n.powf(2.0 / 3.0) * b.cbrt() },
        ],
        Some(l_n),
    ))
}

/// TV bound built on an evaluated Wasserstein report (`B = uncapped/30`).
pub fn tv_bound_from(dw: &BoundReport, l_n: Option<f64>) -> Result<BoundReport> {
    let l = l_n.ok_or_else(|| {
        Error::UnsupportedFamily("TV bound requires l_n from a characteristic-function model".into())
    })?;
    if dw.kind != BoundKind::WassersteinM2 && dw.kind != BoundKind::WassersteinM1 {
        return Err(Error::Domain("TV bound needs a Wasserstein report".into()));
    }
    let mut r = tv_bound(dw.uncapped / 30.0, l)?;
    r.c_used = dw.c_used;
    Ok(r)
}

/// Kolmogorov bound from a Wasserstein report.
pub fn kolmogorov_bound_from(dw: &BoundReport) -> Result<BoundReport> {
    Ok(BoundReport::from_terms(
        BoundKind::Kolmogorov,
        dw.c_used,
        vec![BoundTerm {
            name: "from-wasserstein".into(),
            value: 2.0 * dw.value.sqrt(),
        }],
        None,
    ))
}

/// Bound evaluated on a grid of truncation levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub kind: BoundKind,
    pub grid: Vec<f64>,
    pub values: Vec<BoundReport>,
    /// Same bound with each Monte Carlo functional raised by 5 SE.
    pub pessimistic: Vec<BoundReport>,
    /// The functional reports; for the m2 kind evaluated at `c/2`.
    pub functionals: Vec<TruncationReport>,
    pub argmin: usize,
    pub argmin_pessimistic: usize,
}

impl BoundCurve {
    pub fn best(&self) -> &BoundReport {
        &self.values[self.argmin]
    }

    pub fn best_pessimistic(&self) -> &BoundReport {
        &self.pessimistic[self.argmin_pessimistic]
    }
}

/// `points` log-spaced values over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0) || !(hi >= lo) || points == 0 {
        return Err(Error::Domain(format!("bad grid {lo}:{hi}:{points}")));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..points)
        .map(|i| {
            if i + 1 == points {
                hi
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect())
}

/// Levels at which `c ↦ U(c/2)` can change slope: `2m|x|/σ` for support
/// endpoints `x` of the coordinate marginal.
pub fn breakpoints(spec: &ArraySpec) -> Vec<f64> {
    let Some(sigma) = spec.sigma() else { return Vec::new() };
    let m = spec.dep_range as f64;
    let mut xs: Vec<f64> = match coordinate_marginal(spec) {
        Some(MarginalModel::Finite { values, .. }) => values.iter().map(|v| v.abs()).collect(),
        Some(MarginalModel::UniformUnion { pieces }) => {
            pieces.iter().flat_map(|p| [p.lo.abs(), p.hi.abs()]).collect()
        }
        Some(MarginalModel::HeavyTail { scale }) => vec![scale],
        _ => Vec::new(),
    };
    xs.retain(|x| *x > 0.0);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() > MAX_BREAKPOINTS {
        return Vec::new();
    }
    xs.into_iter().map(|x| 2.0 * m * x / sigma).collect()
}

/// Default grid: 200 log-spaced levels over `[1e-4, 10]`, plus
/// `c_n = 2mγ` and the marginal breakpoints.
pub fn default_c_grid(spec: &ArraySpec) -> Vec<f64> {
    let mut g = log_grid(DEFAULT_GRID_MIN, DEFAULT_GRID_MAX, DEFAULT_GRID_POINTS).expect("static grid");
    g.extend(spec.bounded_case_c());
    g.extend(breakpoints(spec));
    normalize_grid(g)
}

fn normalize_grid(mut g: Vec<f64>) -> Vec<f64> {
    g.retain(|c| *c > 0.0 && c.is_finite());
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

fn argmin(values: &[BoundReport], grid: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        let (v, b) = (values[i].uncapped, values[best].uncapped);
        if v < b || (v == b && grid[i] < grid[best]) {
            best = i;
        }
    }
    best
}

/// Evaluates the Wasserstein bound of `kind` at every grid level (sharing one
/// sample for Monte Carlo functionals) and locates the minimum.
///
/// Minima compare uncapped values; ties go to the smaller `c`.
pub fn minimize_bound(spec: &ArraySpec, kind: BoundKind, grid: &[f64], mc: McConfig) -> Result<BoundCurve> {
    let grid = normalize_grid(grid.to_vec());
    if grid.is_empty() {
        return Err(Error::Domain("empty c grid".into()));
    }
    type Pick = fn(&TruncationReport) -> (f64, f64);
    let (functionals, pick): (Vec<TruncationReport>, Pick) = match kind {
        BoundKind::WassersteinM2 => {
            let halves: Vec<f64> = grid.iter().map(|c| c / 2.0).collect();
            (u_curve(spec, &halves, UMethod::Auto, mc)?, |r| {
                (r.u_of_c, r.std_err.u.unwrap_or(0.0))
            })
        }
        BoundKind::WassersteinM1 => (l_curve(spec, &grid, mc)?, |r| {
            (r.l_of_c.unwrap_or(0.0), r.std_err.l.unwrap_or(0.0))
        }),
        other => {
            return Err(Error::Domain(format!(
                "minimize_bound takes a Wasserstein kind, got {}",
                other.as_str()
            )))
        }
    };
    let eval = |f: f64, c: f64| match kind {
        BoundKind::WassersteinM2 => wasserstein_bound_m2(f, c),
        _ => wasserstein_bound_m1(f, c),
    };
    let mut values = Vec::with_capacity(grid.len());
    let mut pessimistic = Vec::with_capacity(grid.len());
    for (c, r) in grid.iter().zip(&functionals) {
        let (f, se) = pick(r);
        values.push(eval(f, *c)?);
        pessimistic.push(eval(f + PESSIMISTIC_SE * se, *c)?);
    }
    let a = argmin(&values, &grid);
    let ap = argmin(&pessimistic, &grid);
    Ok(BoundCurve {
        kind,
        grid,
        values,
        pessimistic,
        functionals,
        argmin: a,
        argmin_pessimistic: ap,
    })
}

/// Outcome of comparing `L(2c)` with `4U(c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LluCheck {
    pub c: f64,
    pub u_of_c: f64,
    pub l_of_2c: f64,
    /// `4U(c) − L(2c)`
    pub margin: f64,
    /// Standard error of the margin (0 when both sides are exact).
    pub std_err: f64,
    pub holds: bool,
}

/// Checks `L(2c) ≤ 4U(c)` with a `−5 SE` allowance for Monte Carlo sides.
pub fn check_llu(spec: &ArraySpec, c: f64, mc: McConfig) -> Result<LluCheck> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("c must be > 0, got {c}")));
    }
    let both = l_curve(spec, &[c, 2.0 * c], mc)?;
    let u = &both[0];
    let l = &both[1];
    let l2c = l.l_of_c.expect("l_curve fills L");
    let margin = 4.0 * u.u_of_c - l2c;
    let se_u = u.std_err.u.unwrap_or(0.0);
    let se_l = l.std_err.l.unwrap_or(0.0);
    let std_err = ((4.0 * se_u).powi(2) + se_l * se_l).sqrt();
    Ok(LluCheck {
        c,
        u_of_c: u.u_of_c,
        l_of_2c: l2c,
        margin,
        std_err,
        holds: margin >= -PESSIMISTIC_SE * std_err,
    })
}
