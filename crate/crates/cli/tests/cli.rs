use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_mdep-clt");

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("exp.toml");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn rows(out: &Output) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    r.records().map(|x| x.unwrap()).collect()
}

fn column(out: &Output, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let idx = r.headers().unwrap().iter().position(|h| h == name).expect("column");
    rows(out).iter().map(|row| row[idx].parse().unwrap()).collect()
}

#[test]
fn empty_sweep_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "family = \"two-scale\"\nn = []\nalpha = 0.3\na = 0.2\n");
    let out = run(&["bounds", "--config", &cfg], d.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
}

#[test]
fn unknown_keys_and_ids_are_usage_errors() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "family = \"two-scale\"\nnn = 3\n");
    assert_eq!(run(&["bounds", "--config", &cfg], d.path()).status.code(), Some(2));
    assert_eq!(run(&["reproduce", "nope"], d.path()).status.code(), Some(2));
    assert_eq!(run(&["bounds"], d.path()).status.code(), Some(2));
}

#[test]
fn two_scale_bounds_below_rate() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "family = \"two-scale\"\nn = [1000, 10000, 100000]\nalpha = 0.3\na = 0.2\n");
    let out = run(&["bounds", "--config", &cfg], d.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ns = column(&out, "n");
    let dw = column(&out, "dw_bound_uncapped");
    for (n, b) in ns.iter().zip(&dw) {
        assert!(*b <= 60.0 * n.powf(-0.1), "n={n} bound={b}");
    }
    assert!(d.path().join("bounds.csv").exists());
    assert!(d.path().join("manifest.json").exists());
}

#[test]
fn heavy_tail_columns_are_monotone() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "family = \"heavy-tail\"\nm = [4, 8, 16, 32]\nt_rule = \"m-squared\"\n");
    let out = run(&["bounds", "--config", &cfg, "--replicates", "2000"], d.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let u = column(&out, "u_1");
    let l = column(&out, "l_1");
    assert!(u.windows(2).all(|w| w[1] > w[0]), "{u:?}");
    assert!(l.windows(2).all(|w| w[1] < w[0]), "{l:?}");
}

#[test]
fn estimate_iid_normal_and_reruns_identical() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        "family = \"moving-window\"\nn_vars = 4\nm = 0\ninnovation = \"normal\"\nweights = [1.0]\n",
    );
    let args = ["estimate", "--config", &cfg, "--replicates", "1000000", "--metric", "W"];
    let a = run(&args, d.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let point = column(&a, "point");
    assert!(point[0] <= 0.01, "{point:?}");
    let b = run(&args, d.path());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn estimate_matches_exact_law() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        "family = \"moving-window\"\nn_vars = 8\nm = 1\ninnovation = \"rademacher\"\nweights = [1.0, 0.5]\n",
    );
    let out = run(&["estimate", "--config", &cfg, "--replicates", "200000", "--seed", "3"], d.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let z = column(&out, "z_vs_exact");
    assert_eq!(z.len(), 2);
    assert!(z.iter().all(|z| z.abs() <= 3.0), "{z:?}");
    let csv = std::fs::read(d.path().join("estimate.csv")).unwrap();
    assert_eq!(csv, out.stdout);
}

#[test]
fn tv_on_lattice_is_reported_not_fatal() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "family = \"moving-window\"\nn_vars = 2\nm = 0\ninnovation = \"rademacher\"\n");
    let out = run(&["estimate", "--config", &cfg, "--replicates", "5000", "--metric", "TV"], d.path());
    assert!(out.status.success());
    let r = rows(&out);
    assert!(r[0].iter().any(|c| c.starts_with("inapplicable")));
}

#[test]
fn verify_internals_default_and_mutation() {
    let d = tempfile::tempdir().unwrap();
    let ok = run(&["verify-internals"], d.path());
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(rows(&ok).len() >= 50);
    let bad = run(&["verify-internals", "--inject-mutation"], d.path());
    assert_eq!(bad.status.code(), Some(1));
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(err.contains("chain seed 0"), "{err}");
}

#[test]
fn manifest_hash_ignores_output_dir() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["reproduce", "two-scale", "--seed", "1", "--replicates", "200"];
    assert!(run(&args, a.path()).status.success());
    assert!(run(&args, b.path()).status.success());
    let ma = std::fs::read(a.path().join("manifest.json")).unwrap();
    let mb = std::fs::read(b.path().join("manifest.json")).unwrap();
    assert_eq!(ma, mb);
}
