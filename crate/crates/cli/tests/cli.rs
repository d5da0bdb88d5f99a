use std::fs;
use std::process::{Command, Output};

fn pqdist(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pqdist"));
    cmd.args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("PQDIST_")) {
        cmd.env_remove(k);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn capacity_of_planar_ring() {
    let o = pqdist(&["capacity", "--resolution", "96"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# pqdist-csv v1 task=capacity"));
    assert_eq!(lines.next(), Some("condenser,group,p,resolution,value,iterations,residual"));
    let value: f64 = lines.next().unwrap().rsplit(',').nth(2).unwrap().parse().unwrap();
    assert!((value / (2.0 * std::f64::consts::PI) - 1.0).abs() < 0.05, "{value}");
}

#[test]
fn precondition_failure_exits_2() {
    let o = pqdist(&["push", "-p", "2", "-q", "1"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("precondition,"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("q > nu - 1"));
}

#[test]
fn env_overrides_apply() {
    let o = pqdist(&["capacity"], &[("PQDIST_RESOLUTION", "2")]);
    assert_eq!(o.status.code(), Some(2));
    // the flag wins over the environment
    let o = pqdist(&["capacity", "--resolution", "32"], &[("PQDIST_RESOLUTION", "2")]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn starved_solver_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("starved.toml");
    fs::write(&cfg, "resolution = 32\n[solver]\ntol = 1e-12\nmax_iters = 2\n").unwrap();
    let o = pqdist(&["capacity", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "resolution = \"fine\"\n").unwrap();
    let o = pqdist(&["capacity", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = pqdist(&["distort", "--map", "no_such_map"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn identity_suite_from_config_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.toml");
    fs::write(
        &cfg,
        "group = \"R2\"\nresolution = 32\ngeometry.r = 0.5\ngeometry.big_r = 1.0\n\
         suite.maps = [\"identity\", \"winding(k=2)\"]\nsuite.exponents = [[2.0, 2.0], [3.0, 2.0]]\n",
    )
    .unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = pqdist(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    assert!(String::from_utf8(ta).unwrap().starts_with("# pqdist-csv v1 task=verify_suite\n"));
}

#[test]
fn cov_is_seeded() {
    let args = ["cov", "--map", "winding(k=3)", "--seed", "5"];
    let a = stdout(&pqdist(&args, &[]));
    let b = stdout(&pqdist(&args, &[]));
    assert_eq!(a, b);
    let c = stdout(&pqdist(&["cov", "--map", "winding(k=3)", "--seed", "6"], &[]));
    assert_ne!(a, c);
}

#[test]
fn zoo_listing() {
    let o = pqdist(&["zoo"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("winding(k=2)"));
    assert_eq!(text, stdout(&pqdist(&["zoo"], &[])));
}
