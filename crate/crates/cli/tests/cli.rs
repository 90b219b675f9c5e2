use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dupnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dupnet"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn fluid_csv_peaks_at_ln2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "fluid.cfg", "beta = 1\nlambda = 1\nmu = 1\nhorizon = 5\nh = 0.001\n");
    let out = dupnet(dir.path(), &["fluid", "--config", "fluid.cfg", "--out", "res"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&dir.path().join("res/fluid.csv"));
    assert_eq!(table[0], ["t", "x0", "x1"]);
    let k = (2f64.ln() / 0.001).round() as usize;
    let x0: f64 = table[k + 1][1].parse().unwrap();
    assert!((x0 - 0.125).abs() < 1e-3);
    assert!(dir.path().join("res/fluid_gsp.csv").exists());
}

#[test]
fn simulate_from_absorbing_state() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "abs.cfg",
        r#"{"kind": "simulate", "lambda": 1, "mu": 1, "n": 10, "f_n": 10, "x0": 10, "horizon": 3}"#,
    );
    let out = dupnet(dir.path(), &["simulate", "--config", "abs.cfg", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let traj = fs::read_to_string(dir.path().join("o/trajectories.csv")).unwrap();
    assert_eq!(traj, "replica,time,kind,x0,x1\n");
    let summary = rows(&dir.path().join("o/summary.csv"));
    assert_eq!(summary[1][2], "true");
    assert_eq!(summary[1][4], "0");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sim.cfg", "lambda = 1\nmu = 1\nn = 50\nf_n = 50\nhorizon = 4\n");
    for (out_dir, par) in [("a", "1"), ("b", "3")] {
        let out = dupnet(
            dir.path(),
            &["simulate", "--config", "sim.cfg", "--replicas", "6", "--seed", "42", "--parallelism", par, "--out", out_dir],
        );
        assert!(out.status.success());
    }
    for f in ["trajectories.csv", "summary.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f} differs");
    }
    let table = rows(&dir.path().join("a/summary.csv"));
    assert_eq!(table.len(), 7);
}

#[test]
fn grid_recording_with_h() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "g.cfg", "lambda = 4\nmu = 1\nn = 100\nbeta = 1\nhorizon = 2\nh = 0.5\n");
    let out = dupnet(dir.path(), &["simulate", "--config", "g.cfg", "--replicas", "2", "--out", "."]);
    assert!(out.status.success());
    let table = rows(&dir.path().join("trajectories.csv"));
    assert_eq!(table.len(), 1 + 2 * 5);
    assert!(table[1..].iter().all(|r| r[2] == "grid"));
}

#[test]
fn decay_and_critical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "d.cfg", "kind = decay\nlambda = 4\nmu = 1\nbeta = 1\nhorizon = 3\nh = 0.1\n");
    let out = dupnet(dir.path(), &["run", "--config", "d.cfg"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&dir.path().join("out/decay.csv"));
    assert_eq!(table[0], ["t", "psi", "residual"]);
    assert_eq!(table.len(), 32);

    write(dir.path(), "c.cfg", "lambda = 2\nmu = 1\nhorizon = 1\nh = 0.01\n");
    let out = dupnet(dir.path(), &["critical", "--config", "c.cfg", "--replicas", "50"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&dir.path().join("out/critical.csv"));
    assert_eq!(table[0][0], "t");
    assert_eq!(table.len(), 102);
}

#[test]
fn verify_decay_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dupnet(dir.path(), &["verify", "decay", "--out", "v"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("decay: PASS"));
    assert!(dir.path().join("v/verify_decay.txt").exists());
    let csv = rows(&dir.path().join("v/verify_decay.csv"));
    assert_eq!(csv.len(), 4);
}

#[test]
fn usage_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.cfg", "lambda = 1\nmu = -2\nn = 5\nf_n = 5\nhorizon = 1\n");
    let out = dupnet(dir.path(), &["simulate", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu"));

    write(dir.path(), "miss.cfg", "lambda = 1\nmu = 2\nn = 5\nf_n = 5\n");
    let out = dupnet(dir.path(), &["simulate", "--config", "miss.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));

    let out = dupnet(dir.path(), &["verify", "nope"]);
    assert_eq!(out.status.code(), Some(2));

    write(dir.path(), "kind.cfg", "kind = fluid\nbeta = 1\nlambda = 1\nmu = 1\nhorizon = 1\n");
    let out = dupnet(dir.path(), &["decay", "--config", "kind.cfg"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn beta_is_ignored_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "w.cfg", "lambda = 1\nmu = 1\nn = 10\nf_n = 4\nbeta = 1\nhorizon = 1\n");
    let out = dupnet(dir.path(), &["simulate", "--config", "w.cfg"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));
}

#[test]
fn io_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let out = dupnet(dir.path(), &["simulate", "--config", "missing.cfg"]);
    assert_eq!(out.status.code(), Some(3));

    write(dir.path(), "ok.cfg", "lambda = 1\nmu = 1\nn = 5\nf_n = 5\nhorizon = 1\n");
    write(dir.path(), "blocker", "");
    let out = dupnet(dir.path(), &["simulate", "--config", "ok.cfg", "--out", "blocker/sub"]);
    assert_eq!(out.status.code(), Some(3));
}
