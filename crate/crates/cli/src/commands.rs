//! Subcommand pipelines. Each returns the tables it produced; writing them is
//! left to the caller.

use mdep_clt::bounds::{default_c_grid, kolmogorov_bound_from, minimize_bound, tv_bound_from, wasserstein_bound_m2};
use mdep_clt::charfn::{compute_l as charfn_l, two_scale_cf};
use mdep_clt::distances::{empirical_tv_to_normal, empirical_w_and_k, exact_law, exact_kolmogorov_atomic_vs_normal,
    exact_wasserstein_atomic_vs_normal, outcome_count, Bootstrap, ENUMERATION_CAP};
use mdep_clt::functionals::{compute_u, l_curve, McConfig, UMethod};
use mdep_clt::generators::{heavy_tail_example_spec, standardized_sums, two_scale_example_spec};
use mdep_clt::internals::{random_chain, random_sweep, run_suite, ChainReport, Mutation};
use mdep_clt::seed::derive_stream_root;
use mdep_clt::{ArraySpec, BoundKind, Error, Family, MarginalModel, Metric, Sigma2Source};
use rayon::prelude::*;

use crate::config::{BoundChoice, ExperimentConfig, Params, SweepPoint, DEFAULT_BINS, DEFAULT_CHAINS,
    DEFAULT_MAX_CHAIN_N};
use crate::error::CliError;
use crate::output::{num, opt, Table};

/// Relative tolerance for `l_n` quadrature.
pub const L_TOL: f64 = 1e-8;

const PARAM_COLUMNS: [&str; 7] = ["n", "n_vars", "m", "t", "alpha", "a", "innovation"];

fn param_cells(p: &Params) -> Vec<String> {
    vec![
        opt(p.n),
        opt(p.n_vars),
        opt(p.m),
        opt(p.t),
        opt(p.alpha),
        opt(p.a),
        p.innovation
            .map(|i| serde_json::to_value(i).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
            .unwrap_or_default(),
    ]
}

fn with_params(extra: &[&'static str]) -> Vec<&'static str> {
    let mut h = PARAM_COLUMNS.to_vec();
    h.extend_from_slice(extra);
    h
}

fn sigma2_cells(source: &Sigma2Source) -> [String; 2] {
    match source {
        Sigma2Source::Exact => ["exact".into(), String::new()],
        Sigma2Source::Estimated { std_err, .. } => ["estimated".into(), num(*std_err)],
    }
}

/// `l_n` for specs with a characteristic-function model.
fn l_n_for(spec: &ArraySpec) -> Result<Option<f64>, CliError> {
    match spec.family {
        Family::TwoScale { n, alpha, a } => Ok(Some(charfn_l(&two_scale_cf(n, alpha, a)?, L_TOL)?)),
        _ => Ok(None),
    }
}

fn point_mc(cfg: &ExperimentConfig, idx: usize) -> McConfig {
    McConfig::new(cfg.replicates(), derive_stream_root(cfg.seed(), idx as u64))
}

fn run_points<T: Send>(
    points: &[SweepPoint],
    f: impl Fn(usize, &SweepPoint) -> Result<T, CliError> + Sync,
) -> Result<Vec<T>, CliError> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| f(i, p))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

const BOUNDS_COLUMNS: [&str; 22] = [
    "bound",
    "sigma2",
    "sigma2_source",
    "sigma2_se",
    "k",
    "seed",
    "c_argmin",
    "functional",
    "functional_value",
    "functional_se",
    "method",
    "dw_bound",
    "dw_bound_uncapped",
    "dw_bound_pessimistic",
    "c_argmin_pessimistic",
    "dk_bound",
    "l_n",
    "tv_bound",
    "u_1",
    "l_1",
    "l_1_se",
    "grid_points",
];

/// Minimized Wasserstein bound per sweep point with the derived Kolmogorov
/// and TV bounds.
pub fn cmd_bounds(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let points = cfg.sweep()?;
    let grid = cfg.c_grid()?;
    let kind = match cfg.bound.unwrap_or(BoundChoice::M2) {
        BoundChoice::M2 => BoundKind::WassersteinM2,
        BoundChoice::M1 => BoundKind::WassersteinM1,
    };
    let rows = run_points(&points, |i, p| {
        let mc = point_mc(cfg, i);
        let g = grid.clone().unwrap_or_else(|| default_c_grid(&p.spec));
        let curve = minimize_bound(&p.spec, kind, &g, mc)?;
        let best = curve.best();
        let pess = curve.best_pessimistic();
        let f = &curve.functionals[curve.argmin];
        let (fname, fval, fse) = match kind {
            BoundKind::WassersteinM2 => ("U(c/2)", f.u_of_c, f.std_err.u),
            _ => ("L(c)", f.l_of_c.unwrap_or(f64::NAN), f.std_err.l),
        };
        let dk = kolmogorov_bound_from(best)?;
        let l_n = l_n_for(&p.spec)?;
        let tv = match l_n {
            Some(l) => Some(tv_bound_from(best, Some(l))?.value),
            None => None,
        };
        let at1 = l_curve(&p.spec, &[1.0], mc)?.remove(0);
        let [src, src_se] = sigma2_cells(&f.sigma2_source);
        let mut row = param_cells(&p.params);
        row.extend([
            kind.as_str().to_string(),
            num(f.sigma2),
            src,
            src_se,
            opt(f.k),
            mc.seed.to_string(),
            num(best.c_used),
            fname.to_string(),
            num(fval),
            opt(fse),
            f.method.as_str().to_string(),
            num(best.value),
            num(best.uncapped),
            num(pess.value),
            num(pess.c_used),
            num(dk.value),
            opt(l_n),
            opt(tv),
            num(at1.u_of_c),
            opt(at1.l_of_c),
            opt(at1.std_err.l),
            curve.grid.len().to_string(),
        ]);
        Ok(row)
    })?;
    let mut t = Table::new("bounds", &with_params(&BOUNDS_COLUMNS));
    rows.into_iter().for_each(|r| t.push(r));
    Ok(vec![t])
}

/// Exact W and K when the spec's sum has a small finite law.
fn exact_w_k(spec: &ArraySpec) -> Result<Option<(f64, f64)>, CliError> {
    let finite = matches!(
        &spec.family,
        Family::MovingWindow { innovation: MarginalModel::Finite { .. }, .. }
    );
    if !finite || outcome_count(spec)? > ENUMERATION_CAP {
        return Ok(None);
    }
    match exact_law(spec) {
        Ok(law) => Ok(Some((
            exact_wasserstein_atomic_vs_normal(&law),
            exact_kolmogorov_atomic_vs_normal(&law),
        ))),
        Err(Error::EnumerationLimit { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

const ESTIMATE_COLUMNS: [&str; 12] = [
    "metric",
    "status",
    "point",
    "ci_low",
    "ci_high",
    "std_err",
    "bracket",
    "estimator",
    "k",
    "seed",
    "exact",
    "z_vs_exact",
];

/// Empirical distances of `S/σ` to the standard normal per sweep point.
pub fn cmd_estimate(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let points = cfg.sweep()?;
    let metrics = cfg.metrics()?;
    let bins = cfg.bins.unwrap_or(DEFAULT_BINS);
    let k = cfg.replicates();
    let rows = run_points(&points, |i, p| {
        let seed = derive_stream_root(cfg.seed(), i as u64);
        let samples = standardized_sums(&p.spec, k, seed)?;
        let boot = Bootstrap::new(derive_stream_root(seed, 0xd157));
        let wk = if metrics.iter().any(|m| matches!(m, Metric::W | Metric::K)) {
            Some(empirical_w_and_k(&samples, boot)?)
        } else {
            None
        };
        let exact = exact_w_k(&p.spec)?;
        let mut out = Vec::new();
        for &metric in &metrics {
            let mut row = param_cells(&p.params);
            let (est, exact_v) = match metric {
                Metric::W => (Ok(wk.clone().expect("computed").0), exact.map(|e| e.0)),
                Metric::K => (Ok(wk.clone().expect("computed").1), exact.map(|e| e.1)),
                Metric::TV => (empirical_tv_to_normal(&samples, bins, boot), None),
            };
            match est {
                Ok(e) => {
                    let z = exact_v.map(|x| (e.point - x) / e.std_err);
                    row.extend([
                        metric.as_str().to_string(),
                        "ok".to_string(),
                        num(e.point),
                        num(e.ci_low),
                        num(e.ci_high),
                        num(e.std_err),
                        opt(e.bracket),
                        format!("{:?}", e.estimator).to_lowercase(),
                        e.k.to_string(),
                        seed.to_string(),
                        opt(exact_v),
                        opt(z),
                    ]);
                }
                Err(Error::EstimatorInapplicable(why)) => {
                    let mut cells = vec![metric.as_str().to_string(), format!("inapplicable: {why}")];
                    cells.extend(std::iter::repeat_n(String::new(), 6));
                    cells.extend([k.to_string(), seed.to_string(), String::new(), String::new()]);
                    row.extend(cells);
                }
                Err(e) => return Err(e.into()),
            }
            out.push(row);
        }
        Ok(out)
    })?;
    let mut t = Table::new("estimate", &with_params(&ESTIMATE_COLUMNS));
    rows.into_iter().flatten().for_each(|r| t.push(r));
    Ok(vec![t])
}

/// Outcome of the internals suite: the table plus the failing checks.
pub struct InternalsRun {
    pub table: Table,
    pub failures: Vec<String>,
}

/// Runs the exact suite on random chains. `inject` corrupts chain 0.
pub fn cmd_verify_internals(cfg: &ExperimentConfig, inject: bool) -> Result<InternalsRun, CliError> {
    let count = cfg.chains.unwrap_or(DEFAULT_CHAINS);
    if count == 0 {
        return Err(CliError::Config("`chains` must be >= 1".into()));
    }
    let max_n = cfg.max_chain_n.unwrap_or(DEFAULT_MAX_CHAIN_N);
    if max_n == 0 {
        return Err(CliError::Config("`max_chain_n` must be >= 1".into()));
    }
    let root = cfg.seed();
    let mut reports: Vec<ChainReport> = random_sweep(root, count, max_n)?;
    if inject {
        let chain = random_chain(root, max_n)?;
        let mutation = Mutation::ConditionalPrev { coord: 0, atom: 0, delta: 0.5 };
        let mut r = run_suite(&chain, None, Some(mutation))?;
        r.seed = Some(root);
        reports[0] = r;
    }
    let mut table = Table::new(
        "verify-internals",
        &["seed", "n_vars", "alphabet", "check", "passed", "margin", "detail"],
    );
    let mut failures = Vec::new();
    for r in &reports {
        let seed = opt(r.seed);
        for c in &r.checks {
            table.push(vec![
                seed.clone(),
                r.n_vars.to_string(),
                r.alphabet.to_string(),
                c.name.clone(),
                c.passed.to_string(),
                num(c.margin),
                c.detail.clone(),
            ]);
            if !c.passed {
                failures.push(format!("chain seed {seed}: {} ({})", c.name, c.detail));
            }
        }
    }
    Ok(InternalsRun { table, failures })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleId {
    HeavyTail,
    TwoScale,
    TvExample,
}

impl ExampleId {
    pub fn as_str(self) -> &'static str {
        match self {
            ExampleId::HeavyTail => "heavy-tail",
            ExampleId::TwoScale => "two-scale",
            ExampleId::TvExample => "tv-example",
        }
    }

    /// Replicates used when neither the config nor the flags set them.
    pub fn default_replicates(self) -> usize {
        match self {
            ExampleId::HeavyTail => 10_000,
            ExampleId::TwoScale => 2_000,
            ExampleId::TvExample => 20_000,
        }
    }
}

pub const HEAVY_TAIL_MS: [usize; 4] = [4, 8, 16, 32];
pub const TWO_SCALE_NS: [usize; 3] = [1_000, 10_000, 100_000];
pub const TWO_SCALE_ALPHA: f64 = 0.3;
pub const TWO_SCALE_A: f64 = 0.2;
pub const TV_N: usize = 10_000;
pub const TV_ALPHA: f64 = 0.2;
pub const TV_AS: [f64; 3] = [0.4, 0.2, 0.1];

/// Tables for one of the built-in examples.
pub fn cmd_reproduce(id: ExampleId, seed: u64, k: usize, bins: usize) -> Result<Vec<Table>, CliError> {
    match id {
        ExampleId::HeavyTail => reproduce_heavy_tail(seed, k),
        ExampleId::TwoScale => reproduce_two_scale(seed, k),
        ExampleId::TvExample => reproduce_tv(seed, k, bins),
    }
}

fn reproduce_heavy_tail(seed: u64, k: usize) -> Result<Vec<Table>, CliError> {
    let rows = HEAVY_TAIL_MS
        .par_iter()
        .enumerate()
        .map(|(i, &m)| -> Result<Vec<String>, CliError> {
            let t = m * m;
            let spec = heavy_tail_example_spec(m, t)?;
            let mc = McConfig::new(k, derive_stream_root(seed, i as u64));
            let r = l_curve(&spec, &[1.0], mc)?.remove(0);
            Ok(vec![
                m.to_string(),
                t.to_string(),
                spec.n_vars.to_string(),
                num(r.sigma2),
                num(r.u_of_c),
                opt(r.l_of_c),
                opt(r.std_err.l),
                r.method.as_str().to_string(),
                k.to_string(),
                mc.seed.to_string(),
            ])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(
        "reproduce-heavy-tail",
        &["m", "t", "n_vars", "sigma2", "u_1", "l_1", "l_1_se", "l_method", "k", "seed"],
    );
    rows.into_iter().for_each(|r| table.push(r));
    Ok(vec![table])
}

fn reproduce_two_scale(seed: u64, k: usize) -> Result<Vec<Table>, CliError> {
    let alpha = TWO_SCALE_ALPHA;
    let mut rows = Vec::new();
    for (i, &n) in TWO_SCALE_NS.iter().enumerate() {
        let spec = two_scale_example_spec(n, alpha, TWO_SCALE_A)?;
        let mc = McConfig::new(k, derive_stream_root(seed, i as u64));
        let nf = n as f64;
        let c = 8.0 * nf.powf(-alpha);
        let u = compute_u(&spec, c / 2.0, UMethod::Analytic, mc)?;
        let at_c = wasserstein_bound_m2(u.u_of_c, c)?;
        let target = 60.0 * nf.powf(-alpha / 3.0);
        let mut grid = default_c_grid(&spec);
        grid.push(c);
        let curve = minimize_bound(&spec, BoundKind::WassersteinM2, &grid, mc)?;
        let samples = standardized_sums(&spec, k, mc.seed)?;
        let (w, _) = empirical_w_and_k(&samples, Bootstrap::new(derive_stream_root(mc.seed, 0xd157)))?;
        rows.push(vec![
            n.to_string(),
            num(alpha),
            num(TWO_SCALE_A),
            num(u.sigma2),
            num(c),
            num(u.u_of_c),
            num(at_c.uncapped),
            num(target),
            num(curve.best().uncapped),
            num(curve.best().c_used),
            num(w.point),
            num(w.ci_high),
            k.to_string(),
            mc.seed.to_string(),
        ]);
    }
    let mut table = Table::new(
        "reproduce-two-scale",
        &[
            "n",
            "alpha",
            "a",
            "sigma2",
            "c",
            "u_half_c",
            "bound_at_c",
            "sixty_n_pow",
            "bound_min",
            "c_argmin",
            "empirical_dw",
            "empirical_dw_ci_high",
            "k",
            "seed",
        ],
    );
    rows.into_iter().for_each(|r| table.push(r));
    Ok(vec![table])
}

fn reproduce_tv(seed: u64, k: usize, bins: usize) -> Result<Vec<Table>, CliError> {
    let n = TV_N;
    let alpha = TV_ALPHA;
    let mut rows = Vec::new();
    for (i, &a) in TV_AS.iter().enumerate() {
        let spec = two_scale_example_spec(n, alpha, a)?;
        let mc = McConfig::new(k, derive_stream_root(seed, i as u64));
        let l_n = charfn_l(&two_scale_cf(n, alpha, a)?, L_TOL)?;
        let curve = minimize_bound(&spec, BoundKind::WassersteinM2, &default_c_grid(&spec), mc)?;
        let dw = curve.best();
        let tv = tv_bound_from(dw, Some(l_n))?;
        let samples = standardized_sums(&spec, k, mc.seed)?;
        let boot = Bootstrap::new(derive_stream_root(mc.seed, 0xd157));
        let emp = empirical_tv_to_normal(&samples, bins, boot)?;
        rows.push(vec![
            n.to_string(),
            num(alpha),
            num(a),
            num(l_n),
            num(dw.uncapped / 30.0),
            num(dw.c_used),
            num(tv.value),
            num(tv.uncapped),
            num(emp.point),
            opt(emp.bracket),
            num(a.powi(4) * (n as f64).powf(alpha / 3.0)),
            k.to_string(),
            bins.to_string(),
            mc.seed.to_string(),
        ]);
    }
    let mut table = Table::new(
        "reproduce-tv-example",
        &[
            "n",
            "alpha",
            "a",
            "l_n",
            "b",
            "c_argmin",
            "tv_bound",
            "tv_bound_uncapped",
            "empirical_tv",
            "empirical_tv_bracket",
            "a4_n_alpha_over_3",
            "k",
            "bins",
            "seed",
        ],
    );
    rows.into_iter().for_each(|r| table.push(r));
    Ok(vec![table])
}
