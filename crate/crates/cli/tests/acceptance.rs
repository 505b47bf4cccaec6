//! End-to-end acceptance checks, one PASS/FAIL line each. Runs as a plain
//! binary so the lines are always visible.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use mdep_clt::bounds::{default_c_grid, minimize_bound, tv_bound_from, wasserstein_bound_m2, check_llu};
use mdep_clt::charfn::{compute_l as charfn_l, gaussian_cf_model, scaled_gaussian_cf_model, two_scale_cf};
use mdep_clt::distances::{
    empirical_tv_to_normal, empirical_w_and_k, exact_kolmogorov_atomic_vs_normal, exact_law,
    exact_wasserstein_atomic_vs_normal, AtomicLaw, Bootstrap,
};
use mdep_clt::functionals::{compute_u, l_curve, McConfig, UMethod};
use mdep_clt::generators::{heavy_tail_example_spec, moving_window_spec, standardized_sums, two_scale_example_spec};
use mdep_clt::internals::{random_chain, random_sweep, run_suite, Mutation};
use mdep_clt::seed::{derive_stream_root, replicate_rng};
use mdep_clt::{ArraySpec, BoundKind, MarginalModel};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: mdep_clt::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn bootstrap(seed: u64) -> Bootstrap {
    Bootstrap::new(derive_stream_root(seed, 0xd157))
}

fn bound_validity() -> Outcome {
    let specs: Vec<(&str, ArraySpec)> = vec![
        ("rademacher m=1", lib(moving_window_spec(50, 1, MarginalModel::rademacher(), vec![1.0, 1.0]))?),
        ("uniform m=2", lib(moving_window_spec(50, 2, MarginalModel::uniform_symmetric(1.0), vec![1.0, -0.5, 0.25]))?),
        ("normal m=4", lib(moving_window_spec(40, 4, MarginalModel::standard_normal(), vec![1.0; 5]))?),
        ("two-scale m=1", lib(two_scale_example_spec(1000, 0.3, 0.2))?),
        ("heavy-tail innovations m=2", lib(moving_window_spec(40, 2, MarginalModel::heavy_tail(), vec![1.0, 1.0, 1.0]))?),
        ("heavy-tail example m=2", lib(heavy_tail_example_spec(2, 4))?),
        ("heavy-tail example m=4", lib(heavy_tail_example_spec(4, 16))?),
        ("iid rademacher", lib(moving_window_spec(5, 0, MarginalModel::rademacher(), vec![1.0]))?),
    ];
    let mut worst = f64::INFINITY;
    for (i, (name, spec)) in specs.iter().enumerate() {
        let seed = derive_stream_root(1, i as u64);
        let curve = lib(minimize_bound(spec, BoundKind::WassersteinM2, &default_c_grid(spec), McConfig::new(20_000, seed)))?;
        let bound = curve.best_pessimistic().value;
        let samples = lib(standardized_sums(spec, 100_000, seed))?;
        let (w, _) = lib(empirical_w_and_k(&samples, bootstrap(seed)))?;
        ensure(bound >= w.ci_high, || format!("{name}: bound {bound} < ci_high {}", w.ci_high))?;
        worst = worst.min(bound - w.ci_high);
    }
    Ok(format!("{} specs, smallest bound - ci_high = {worst:.4}", specs.len()))
}

fn random_spec<R: Rng>(rng: &mut R) -> Result<ArraySpec, String> {
    match rng.random_range(0..4) {
        0 => {
            let m = rng.random_range(2..=4);
            lib(heavy_tail_example_spec(m, rng.random_range(1..=6)))
        }
        1 => lib(two_scale_example_spec(
            rng.random_range(50..=5000),
            rng.random_range(0.05..0.33),
            rng.random_range(0.05..0.95),
        )),
        _ => {
            let m = rng.random_range(0..=3);
            let innovation = match rng.random_range(0..4) {
                0 => MarginalModel::rademacher(),
                1 => MarginalModel::standard_normal(),
                2 => MarginalModel::uniform_symmetric(1.0),
                _ => MarginalModel::heavy_tail(),
            };
            let weights = (0..=m).map(|_| rng.random_range(-2.0..2.0)).collect();
            lib(moving_window_spec(rng.random_range(5..=40), m, innovation, weights))
        }
    }
}

fn llu() -> Outcome {
    let mut rng = replicate_rng(2, 0);
    let mut worst_z = f64::INFINITY;
    for s in 0..50 {
        let spec = random_spec(&mut rng)?;
        for j in 0..5 {
            let c = 10f64.powf(rng.random_range(-1.3..0.7));
            let mc = McConfig::new(4000, derive_stream_root(2, (s * 5 + j) as u64));
            let r = lib(check_llu(&spec, c, mc))?;
            ensure(r.holds, || format!("spec {s} ({:?}) c={c}: {r:?}", spec.family))?;
            if r.std_err > 0.0 {
                worst_z = worst_z.min(r.margin / r.std_err);
            } else {
                ensure(r.margin >= 0.0, || format!("exact margin {} < 0", r.margin))?;
            }
        }
    }
    Ok(format!("250 checks, smallest margin/SE = {worst_z:.2}"))
}

fn heavy_tail() -> Outcome {
    let mut zs = Vec::new();
    for (i, (m, t)) in [(2usize, 4usize), (4, 16)].into_iter().enumerate() {
        let spec = lib(heavy_tail_example_spec(m, t))?;
        let mc = McConfig::new(1_000_000, derive_stream_root(3, i as u64));
        let exact = lib(compute_u(&spec, 1.0, UMethod::Analytic, mc))?;
        let sigma2 = spec.sigma2.expect("exact");
        let closed = 3.0 * spec.n_vars as f64 * (m * m) as f64 / sigma2.powf(1.5);
        ensure((exact.u_of_c - closed).abs() <= 1e-12 * closed, || {
            format!("analytic U {} vs 3Nm^2/sigma^3 {closed}", exact.u_of_c)
        })?;
        let est = lib(compute_u(&spec, 1.0, UMethod::MonteCarlo, mc))?;
        let se = est.std_err.u.expect("monte carlo se");
        let z = (est.u_of_c - exact.u_of_c) / se;
        ensure(z.abs() <= 5.0, || format!("(m,t)=({m},{t}): U mc {} analytic {} z={z}", est.u_of_c, exact.u_of_c))?;
        zs.push(z);
    }
    let mut us = Vec::new();
    let mut ls = Vec::new();
    for (i, m) in [4usize, 8, 16, 32].into_iter().enumerate() {
        let spec = lib(heavy_tail_example_spec(m, m * m))?;
        let r = lib(l_curve(&spec, &[1.0], McConfig::new(5000, derive_stream_root(33, i as u64))))?.remove(0);
        us.push(r.u_of_c);
        ls.push(r.l_of_c.expect("l"));
    }
    ensure(us.windows(2).all(|w| w[1] > w[0]), || format!("U not increasing: {us:?}"))?;
    ensure(ls.windows(2).all(|w| w[1] < w[0]), || format!("L not decreasing: {ls:?}"))?;
    Ok(format!("z = {:.2}, {:.2}; U {:.3?}; L {:.4?}", zs[0], zs[1], us, ls))
}

fn two_scale() -> Outcome {
    let alpha = 0.3;
    let mut out = Vec::new();
    for n in [1_000usize, 10_000, 100_000] {
        let spec = lib(two_scale_example_spec(n, alpha, 0.2))?;
        let nf = n as f64;
        let c = 8.0 * nf.powf(-alpha);
        let mc = McConfig::new(1000, 4);
        let u = lib(compute_u(&spec, c / 2.0, UMethod::Analytic, mc))?;
        ensure(u.u_of_c == 0.0, || format!("n={n}: U(c/2) = {}", u.u_of_c))?;
        let target = 60.0 * nf.powf(-alpha / 3.0);
        let at_c = lib(wasserstein_bound_m2(u.u_of_c, c))?.uncapped;
        ensure((at_c - target).abs() <= 1e-12, || format!("n={n}: bound {at_c} vs {target}"))?;
        let mut grid = default_c_grid(&spec);
        grid.push(c);
        let best = lib(minimize_bound(&spec, BoundKind::WassersteinM2, &grid, mc))?.best().uncapped;
        ensure(best <= target, || format!("n={n}: minimized {best} > {target}"))?;
        out.push(format!("n={n} min {best:.3} <= {target:.3}"));
    }
    Ok(out.join("; "))
}

fn finite_innovation<R: Rng>(rng: &mut R) -> MarginalModel {
    // dyadic masses and integer atoms keep the centering exact
    let probs = match rng.random_range(0..3) {
        0 => vec![0.5, 0.5],
        1 => vec![0.25, 0.25, 0.5],
        _ => vec![0.125, 0.375, 0.5],
    };
    let mut values: Vec<f64> = (0..probs.len()).map(|_| rng.random_range(-3..=3) as f64).collect();
    if values.iter().all(|v| *v == values[0]) {
        values[0] += 1.0;
    }
    let mean: f64 = values.iter().zip(&probs).map(|(v, p)| v * p).sum();
    MarginalModel::Finite {
        values: values.iter().map(|v| v - mean).collect(),
        probs,
    }
}

fn oracle_equivalence() -> Outcome {
    let r2 = lib(moving_window_spec(2, 0, MarginalModel::rademacher(), vec![1.0]))?;
    let dk = exact_kolmogorov_atomic_vs_normal(&lib(exact_law(&r2))?);
    ensure((dk - 0.25).abs() <= 1e-12, || format!("N=2 Rademacher d_K = {dk}"))?;
    let mut rng = replicate_rng(5, 0);
    let mut worst = 0.0_f64;
    let mut misses = Vec::new();
    let mut done = 0;
    while done < 20 {
        let m = rng.random_range(0..=3);
        let weights: Vec<f64> = (0..=m).map(|_| rng.random_range(1..=4) as f64 * if rng.random_bool(0.3) { -1.0 } else { 1.0 }).collect();
        let n = rng.random_range(2..=10);
        let innovation = if rng.random_bool(0.4) { MarginalModel::rademacher() } else { finite_innovation(&mut rng) };
        let spec = match moving_window_spec(n, m, innovation, weights) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let law = lib(exact_law(&spec))?;
        let seed = derive_stream_root(5, done as u64);
        let samples = lib(standardized_sums(&spec, 1_000_000, seed))?;
        let (w, k) = lib(empirical_w_and_k(&samples, bootstrap(seed)))?;
        let ew = exact_wasserstein_atomic_vs_normal(&law);
        let ek = exact_kolmogorov_atomic_vs_normal(&law);
        let zw = (w.point - ew) / w.std_err;
        let zk = (k.point - ek) / k.std_err;
        if zw.abs() > 3.0 || zk.abs() > 3.0 {
            misses.push(format!(
                "spec {done} (N={n} m={m}): W {} vs {ew} (z={zw:.2}), K {} vs {ek} (z={zk:.2})",
                w.point, k.point
            ));
        }
        worst = worst.max(zw.abs()).max(zk.abs());
        done += 1;
    }
    ensure(misses.is_empty(), || format!("{} of 20 specs outside 3 SE: {}", misses.len(), misses.join("; ")))?;
    Ok(format!("20 specs, largest |z| = {worst:.2}; N=2 Rademacher d_K = {dk}"))
}

fn distance_relations() -> Outcome {
    let mut rng = replicate_rng(6, 0);
    let mut tightest = f64::INFINITY;
    for i in 0..100 {
        let a = rng.random_range(1..=30);
        let raw: Vec<(f64, f64)> = (0..a)
            .map(|_| (rng.random_range(-4.0..4.0), rng.random_range(0.01..1.0)))
            .collect();
        let total: f64 = raw.iter().map(|x| x.1).sum();
        let mean: f64 = raw.iter().map(|x| x.0 * x.1).sum::<f64>() / total;
        let var: f64 = raw.iter().map(|x| (x.0 - mean).powi(2) * x.1).sum::<f64>() / total;
        let atoms: Vec<(f64, f64)> = if var > 1e-6 {
            raw.iter().map(|x| ((x.0 - mean) / var.sqrt(), x.1 / total)).collect()
        } else {
            vec![(-1.0, 0.5), (1.0, 0.5)]
        };
        let law = lib(AtomicLaw::new(atoms))?;
        let w = exact_wasserstein_atomic_vs_normal(&law);
        let k = exact_kolmogorov_atomic_vs_normal(&law);
        ensure(k <= 2.0 * w.sqrt(), || format!("law {i}: d_K {k} > 2 sqrt(d_W {w})"))?;
        ensure(w <= 4.0 * k.sqrt(), || format!("law {i}: d_W {w} > 4 sqrt(d_K {k})"))?;
        ensure(w <= std::f64::consts::SQRT_2, || format!("law {i}: d_W {w} > sqrt 2"))?;
        tightest = tightest.min(2.0 * w.sqrt() - k).min(4.0 * k.sqrt() - w).min(std::f64::consts::SQRT_2 - w);
    }
    Ok(format!("100 laws, smallest slack {tightest:.4}"))
}

fn internals() -> Outcome {
    let reports = lib(random_sweep(700, 50, 10))?;
    let checks: usize = reports.iter().map(|r| r.checks.len()).sum();
    for r in &reports {
        if let Some(f) = r.failures().next() {
            return Err(format!("chain seed {:?}: {} ({})", r.seed, f.name, f.detail));
        }
    }
    let chain = lib(random_chain(700, 10))?;
    let mutated = lib(run_suite(&chain, None, Some(Mutation::ConditionalPrev { coord: 0, atom: 0, delta: 0.5 })))?;
    ensure(!mutated.passed, || "mutation went undetected".into())?;
    let caught = mutated.failures().next().map(|f| f.name.clone()).unwrap_or_default();
    Ok(format!("50 chains, {checks} checks; mutation caught by {caught}"))
}

fn quadrature() -> Outcome {
    let g = lib(charfn_l(&gaussian_cf_model(), 1e-10))?;
    ensure((g - 2.0).abs() <= 1e-7, || format!("gaussian l = {g}"))?;
    let mut worst = 0.0_f64;
    for s in [0.5, 2.0, 5.0] {
        let l = lib(charfn_l(&lib(scaled_gaussian_cf_model(s))?, 1e-10))?;
        let rel = (l - 2.0 / (s * s)).abs() / (2.0 / (s * s));
        ensure(rel <= 1e-6, || format!("s={s}: l = {l}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("|l-2| = {:.1e}, worst scaled rel err {worst:.1e}", (g - 2.0).abs()))
}

fn tv_pipeline() -> Outcome {
    let (n, alpha) = (10_000usize, 0.2);
    let mut ls = Vec::new();
    let mut out = Vec::new();
    for (i, a) in [0.4, 0.2].into_iter().enumerate() {
        let spec = lib(two_scale_example_spec(n, alpha, a))?;
        let seed = derive_stream_root(9, i as u64);
        let l = lib(charfn_l(&lib(two_scale_cf(n, alpha, a))?, 1e-8))?;
        let curve = lib(minimize_bound(&spec, BoundKind::WassersteinM2, &default_c_grid(&spec), McConfig::new(1000, seed)))?;
        let tv = lib(tv_bound_from(curve.best(), Some(l)))?;
        let samples = lib(standardized_sums(&spec, 20_000, seed))?;
        let emp = lib(empirical_tv_to_normal(&samples, 64, bootstrap(seed)))?;
        let rhs = emp.point + emp.bracket.unwrap_or(0.0);
        ensure(tv.value >= rhs, || format!("a={a}: TV bound {} < {rhs}", tv.value))?;
        ls.push(l);
        out.push(format!("a={a} l={l:.6} bound={} (uncapped {:.2}) emp+bracket={rhs:.4}", tv.value, tv.uncapped));
    }
    ensure(ls[1] > ls[0], || format!("l_n not increasing as a decreases: {ls:?}"))?;
    Ok(out.join("; "))
}

/// stdout, csv file, manifest
type RunBytes = (Vec<u8>, Vec<u8>, Vec<u8>);

fn reproduce_run(threads: &str, dir: &std::path::Path) -> Result<RunBytes, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mdep-clt"))
        .args(["reproduce", "two-scale", "--seed", "7", "--out"])
        .arg(dir)
        .env("MDEP_CLT_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let csv = std::fs::read(dir.join("reproduce-two-scale.csv")).map_err(|e| e.to_string())?;
    let manifest = std::fs::read(dir.join("manifest.json")).map_err(|e| e.to_string())?;
    Ok((out.stdout, csv, manifest))
}

fn determinism() -> Outcome {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    let a = reproduce_run("1", dirs[0].path())?;
    let b = reproduce_run("1", dirs[1].path())?;
    let c = reproduce_run("4", dirs[2].path())?;
    ensure(a == b, || "reruns differ".into())?;
    ensure(a == c, || "output depends on worker count".into())?;
    ensure(a.0 == a.1, || "stdout differs from the csv file".into())?;
    Ok(format!("{} bytes identical across 3 runs (1 and 4 workers)", a.1.len()))
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria: [Criterion; 10] = [
        ("1 bound validity", Duration::from_secs(120), bound_validity),
        ("2 L(2c) <= 4U(c)", Duration::from_secs(60), llu),
        ("3 heavy-tail example", Duration::from_secs(180), heavy_tail),
        ("4 two-scale example", Duration::from_secs(60), two_scale),
        ("5 distance oracles", Duration::from_secs(180), oracle_equivalence),
        ("6 distance relations", Duration::from_secs(30), distance_relations),
        ("7 martingale internals", Duration::from_secs(120), internals),
        ("8 quadrature calibration", Duration::from_secs(5), quadrature),
        ("9 TV pipeline", Duration::from_secs(180), tv_pipeline),
        ("10 determinism", Duration::from_secs(60), determinism),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        let start = Instant::now();
        let r = f();
        let took = start.elapsed();
        let r = r.and_then(|msg| {
            if took <= limit {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {took:.1?}, limit {limit:?}"))
            }
        });
        match r {
            Ok(msg) => println!("PASS {name} [{took:.1?}]: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name} [{took:.1?}]: {msg}");
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
