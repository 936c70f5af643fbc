use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
    out: PathBuf,
}

fn config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn ergolab(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Outcome {
    let o = Command::new(env!("CARGO_BIN_EXE_ergolab"))
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs");
    Outcome {
        code: o.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&o.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
        out: out.to_path_buf(),
    }
}

fn read(o: &Outcome, file: &str) -> String {
    std::fs::read_to_string(o.out.join(file)).unwrap_or_else(|e| panic!("{file}: {e}\n{}{}", o.stdout, o.stderr))
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().to_string()).collect()
}

const ULAM: &str = "schema_version = 1\n[map]\nbuiltin = \"ulam\"\n";
const DOUBLING: &str = "schema_version = 1\n[map]\nbuiltin = \"doubling\"\n";

#[test]
fn analyze_map_writes_order_and_expansion_files() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "ulam.toml", ULAM);
    let o = ergolab("analyze-map", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.code, 0, "{}{}", o.stdout, o.stderr);
    for f in ["order_c0.5+.csv", "order_c0.5-.csv", "expansion.csv", "manifest-analyze-map.txt"] {
        assert!(o.out.join(f).exists(), "{f}");
    }
    let ratios = column(&read(&o, "order_c0.5+.csv"), "value_ratio");
    for r in ratios {
        assert!((r.parse::<f64>().unwrap() - 4.0).abs() < 1e-6, "{r}");
    }
}

#[test]
fn wrong_order_is_rejected_and_named() {
    let dir = TempDir::new().unwrap();
    let map = "schema_version = 1\nname = \"ulam\"\n\
        [[branch]]\nleft = 0.0\nright = 0.5\nformula = { kind = \"logistic\", r = 4.0 }\n\
        [[branch]]\nleft = 0.5\nright = 1.0\nformula = { kind = \"logistic\", r = 4.0 }\n\
        [[critical]]\nlocation = 0.5\nside = \"minus\"\norder = 2.0\n\
        [[critical]]\nlocation = 0.5\nside = \"plus\"\norder = 3.0\n";
    config(dir.path(), "wrong.toml", map);
    let cfg = config(dir.path(), "run.toml", "schema_version = 1\n[map]\nfile = \"wrong.toml\"\n");
    let o = ergolab("analyze-map", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("0.5+"), "{}", o.stderr);
    assert!(o.stderr.contains("declared order 3"), "{}", o.stderr);
}

#[test]
fn missing_map_is_a_line_numbered_parse_error() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "c.toml", "schema_version = 1\n\n[stats]\nseed = 4\n");
    let o = ergolab("analyze-map", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("line "), "{}", o.stderr);
    assert!(o.stderr.contains("map"), "{}", o.stderr);
}

#[test]
fn bad_values_name_their_line() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "c.toml", &format!("{ULAM}[stats]\nn_orbits = 1\n"));
    let o = ergolab("limits", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("line 5"), "{}", o.stderr);
    assert!(o.stderr.contains("stats.n_orbits"), "{}", o.stderr);
}

#[test]
fn doubling_partition_is_dyadic() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "d.toml", &format!("{DOUBLING}[inducing]\nq0 = 6\n"));
    let o = ergolab("induce", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.code, 0, "{}{}", o.stdout, o.stderr);
    let taus = column(&read(&o, "cells.csv"), "tau");
    assert_eq!(taus.len(), 64);
    assert!(taus.iter().all(|t| t == "6"));
}

#[test]
fn ulam_binding_table_has_one_m_hat() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "u.toml", ULAM);
    let o = ergolab("induce", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.code, 0, "{}{}", o.stdout, o.stderr);
    for f in ["cells.csv", "summability.csv", "propbind.csv", "F_conditions.csv"] {
        assert!(o.out.join(f).exists(), "{f}");
    }
    let m = column(&read(&o, "propbind.csv"), "M_hat");
    assert!(m.len() > 5);
    assert!(m.iter().all(|v| *v == m[0]));
    let verdicts = column(&read(&o, "summability.csv"), "verdict4");
    assert!(verdicts.iter().all(|v| v == "converging"), "{verdicts:?}");
}

#[test]
fn tiny_tau_max_exits_with_warning() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "u.toml", &format!("{ULAM}[inducing]\ntau_max = 1\n"));
    let o = ergolab("induce", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.code, 3, "{}{}", o.stdout, o.stderr);
    assert!(o.stdout.contains("WARN coverage"), "{}", o.stdout);
}

#[test]
fn doubling_two_cell_matrix() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "d.toml", &format!("{DOUBLING}[operator]\nk = 2\nn_eigs = 2\n[inducing]\nq0 = 4\n"));
    let o = ergolab("spectrum", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.code, 0, "{}{}", o.stdout, o.stderr);
    let m = read(&o, "matrix_L_f.csv");
    let rows: Vec<(String, String, f64)> = m
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string(), f[2].parse().unwrap())
        })
        .collect();
    let expect = [("0", "0"), ("0", "1"), ("1", "0"), ("1", "1")];
    assert_eq!(rows.len(), 4);
    for ((i, j, v), (ei, ej)) in rows.iter().zip(expect) {
        assert_eq!((i.as_str(), j.as_str()), (ei, ej));
        assert_eq!(*v, 0.5);
    }
}

#[test]
fn ulam_spectrum_reports_density_and_renewal() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        dir.path(),
        "u.toml",
        &format!("{ULAM}[operator]\nk = 2048\nk_scheme = 128\npushdown_k = 1024\npushdown_budget = 50000\n"),
    );
    let o = ergolab("spectrum", &cfg, &dir.path().join("out"), &[]);
    // The induced operator has transient cells, which is reported as a warning.
    assert!(o.code == 0 || o.code == 3, "{}{}", o.stdout, o.stderr);
    assert!(o.stdout.contains("PASS density L1 to reference"), "{}", o.stdout);
    assert!(column(&read(&o, "density.csv"), "reference").len() == 2048);
    let renewal = read(&o, "renewal.csv");
    let sv = column(&renewal, "min_singular");
    assert_eq!(sv.len(), 5);
    for v in &sv[1..] {
        assert!(v.parse::<f64>().unwrap() > 0.01);
    }
    let manifest = read(&o, "manifest-spectrum.txt");
    assert!(manifest.contains("PASS Gordin kernel"), "{manifest}");
}

fn small_limits(observable: &str, map: &str) -> String {
    format!(
        "{map}[stats]\nobservable = \"{observable}\"\nn_orbits = 4000\nhorizon = 2000\ngk_horizon = 1000\n\
         decay_horizon = 2000\nld_n = [50, 100, 200]\n"
    )
}

#[test]
fn doubling_cosine_variance_is_one_half() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "d.toml", &small_limits("cos2pi", DOUBLING));
    let o = ergolab("limits", &cfg, &dir.path().join("out"), &[]);
    let s2: f64 = column(&read(&o, "clt.csv"), "sigma2_gk")[0].parse().unwrap();
    assert!((s2 - 0.5).abs() < 0.025, "{s2}");
}

#[test]
fn ulam_decay_plot_is_annotated() {
    let dir = TempDir::new().unwrap();
    // The fit needs ten lags above the Monte Carlo floor.
    let body = small_limits("x", ULAM)
        .replace("n_orbits = 4000", "n_orbits = 10000")
        .replace("decay_horizon = 2000", "decay_horizon = 10000");
    let cfg = config(dir.path(), "u.toml", &body);
    let o = ergolab("limits", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.code, 0, "{}{}", o.stdout, o.stderr);
    let svg = read(&o, "decay.svg");
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"), "{}", &svg[..40]);
    assert!(svg.contains("R2 ="), "no fit annotation");
    assert!(column(&read(&o, "decay.csv"), "envelope").len() == 21);
}

#[test]
fn seed_repeat_is_byte_identical_across_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "u.toml", &small_limits("x", ULAM));
    let a = ergolab("limits", &cfg, &dir.path().join("a"), &["--threads", "1", "--seed", "9"]);
    let b = ergolab("limits", &cfg, &dir.path().join("b"), &["--threads", "3", "--seed", "9"]);
    for f in ["clt.csv", "green_kubo.csv", "decay.csv", "ld.csv", "fclt.csv"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    let c = ergolab("limits", &cfg, &dir.path().join("c"), &["--seed", "10"]);
    assert_ne!(read(&a, "clt.csv"), read(&c, "clt.csv"));
    let files = |o: &Outcome| -> String {
        let m = read(o, "manifest-limits.txt");
        m[m.find("[files]").unwrap()..].to_string()
    };
    assert_eq!(files(&a), files(&b));
}

#[test]
fn failed_checks_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let body = format!("{}ks_threshold = 0.0001\n", small_limits("x", DOUBLING));
    let cfg = config(dir.path(), "d.toml", &body);
    let o = ergolab("limits", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.code, 2, "{}{}", o.stdout, o.stderr);
    assert!(read(&o, "manifest-limits.txt").contains("FAIL CLT KS"));
}

#[test]
fn later_stages_reuse_the_cached_scheme() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        dir.path(),
        "u.toml",
        &format!("{ULAM}[operator]\nk = 256\nk_scheme = 64\npushdown_k = 256\npushdown_budget = 5000\n"),
    );
    let out = dir.path().join("out");
    let first = ergolab("induce", &cfg, &out, &[]);
    assert!(read(&first, "manifest-induce.txt").contains("scheme built"));
    let second = ergolab("spectrum", &cfg, &out, &[]);
    assert!(read(&second, "manifest-spectrum.txt").contains("scheme hit"));
}
