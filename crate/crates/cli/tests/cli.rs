use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn adiaspin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_adiaspin"));
    // Keep the caller's environment from leaking settings in.
    for (k, _) in std::env::vars() {
        if k.starts_with("ADIASPIN_") {
            cmd.env_remove(k);
        }
    }
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn evolve(dir: &Path, name: &str, solver: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let out = dir.join(name);
    let o = run(adiaspin()
        .args([
            "evolve",
            "--theta",
            "pi/3",
            "--ratio",
            "0.1",
            "--flags",
            "1,1,1",
            "--periods",
            "1",
            "--samples",
            "200",
            "--solver",
            solver,
            "--out",
        ])
        .arg(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    read_csv(&out)
}

#[test]
fn exact_evolution_is_normalized() {
    let dir = tempfile::tempdir().unwrap();
    let (header, rows) = evolve(dir.path(), "exact.csv", "exact");
    assert_eq!(
        header,
        [
            "t", "re_c1", "im_c1", "re_c2", "im_c2", "abs2_c1", "abs2_c2", "norm", "phase_c1",
            "phase_c2"
        ]
    );
    assert_eq!(rows.len(), 201);
    for r in &rows {
        assert!((r[7] - 1.0).abs() < 1e-12);
        assert!((r[5] + r[6] - r[7]).abs() < 1e-15);
    }
    let period = 2.0 * std::f64::consts::PI / 0.1;
    assert!((rows.last().unwrap()[0] - period).abs() < 1e-12);
}

#[test]
fn adiabatic_moduli_are_constant() {
    let dir = tempfile::tempdir().unwrap();
    let (_, rows) = evolve(dir.path(), "adiabatic.csv", "adiabatic");
    for r in &rows {
        assert!((r[5] - 1.0).abs() < 1e-14);
        assert!(r[6].abs() < 1e-14);
    }
}

#[test]
fn exact_and_numeric_files_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (_, exact) = evolve(dir.path(), "exact.csv", "exact");
    let (_, numeric) = evolve(dir.path(), "numeric.csv", "numeric");
    let (_, lab) = evolve(dir.path(), "lab.csv", "numeric-lab");
    for other in [&numeric, &lab] {
        let worst = exact
            .iter()
            .zip(other.iter())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }
}

#[test]
fn unknown_config_keys_are_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "theta = pi/3\nratio = 0.1\nthetta = 1\n").unwrap();
    let out = dir.path().join("never.csv");
    let o = run(adiaspin()
        .args(["evolve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("thetta"));
    assert!(!out.exists());

    let o = run(adiaspin()
        .args(["evolve", "--theta", "1", "--ratio", "0.1"])
        .env("ADIASPIN_RATOI", "1"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("RATOI"));
}

#[test]
fn out_of_domain_values_are_usage_errors() {
    for args in [
        ["--theta", "pi", "--ratio", "0.1", "--omega1", "1"],
        ["--theta", "1", "--ratio", "-0.1", "--omega1", "1"],
        ["--theta", "1", "--ratio", "0.1", "--omega1", "0"],
        ["--theta", "1", "--ratio", "0.1", "--omega1", "abc"],
    ] {
        let o = run(adiaspin().arg("evolve").args(args));
        assert_eq!(o.status.code(), Some(1), "{args:?}");
    }
    let o = run(adiaspin().args([
        "evolve",
        "--theta",
        "1",
        "--ratio",
        "0.1",
        "--solver",
        "numeric-lab",
        "--flags",
        "1,1,0",
    ]));
    assert_eq!(o.status.code(), Some(1));
    let o = run(adiaspin().args(["evolve", "--bogus"]));
    assert_eq!(o.status.code(), Some(1));
    let o = run(&mut adiaspin());
    assert_eq!(o.status.code(), Some(1));
    assert!(run(adiaspin().arg("--help")).status.success());
}

#[test]
fn precedence_is_cli_then_env_then_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "theta = 60\ndegrees = true\nratio = 0.5\nperiods = 3\nsamples = 10\n",
    )
    .unwrap();
    let last_t = |extra: &[&str], env: &[(&str, &str)]| {
        let out = dir.path().join("p.csv");
        let mut cmd = adiaspin();
        cmd.args(["evolve", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(extra);
        for (k, v) in env {
            cmd.env(k, v);
        }
        let o = run(&mut cmd);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        read_csv(&out).1.last().unwrap()[0]
    };
    let period = |r: f64| 2.0 * std::f64::consts::PI / r;
    assert!((last_t(&[], &[]) - 3.0 * period(0.5)).abs() < 1e-9);
    assert!((last_t(&[], &[("ADIASPIN_PERIODS", "2")]) - 2.0 * period(0.5)).abs() < 1e-9);
    assert!((last_t(&["--periods", "1"], &[("ADIASPIN_PERIODS", "2")]) - period(0.5)).abs() < 1e-9);
    assert!((last_t(&["--ratio", "0.25"], &[]) - 3.0 * period(0.25)).abs() < 1e-9);
}

#[test]
fn sweep_output_is_byte_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = run(adiaspin()
            .args([
                "sweep",
                "--theta",
                "pi/6,pi/4",
                "--ratio",
                "0.1,0.03,0.01,0.003",
                "--flags",
                "1,1,1",
                "--flags",
                "1,1,0",
                "--metrics",
                "sup-error,gamma-decomposition,norm-drift",
                "--workers",
                workers,
                "--out",
            ])
            .arg(&out));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (
            fs::read(&out).unwrap(),
            fs::read(format!("{}.fits.json", out.display())).unwrap(),
        )
    };
    let a = sweep("a.csv", "1");
    let b = sweep("b.csv", "4");
    assert_eq!(a, b);
    let text = String::from_utf8(a.0).unwrap();
    assert!(!text.contains("wall_time"));
    // 2 thetas x 2 flags x 4 ratios x (1 + 4 + 1) quantities.
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 4 * 6);
    let fits: serde_json::Value = serde_json::from_slice(&a.1).unwrap();
    let nondiag = fits["fits"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["quantity"] == "gamma-nondiagonal" && f["fit"].is_object())
        .unwrap();
    assert!((nondiag["fit"]["slope"].as_f64().unwrap() - 2.0).abs() < 0.1);
}

#[test]
fn sweep_rejects_empty_ratio_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = run(adiaspin()
        .args(["sweep", "--theta", "1", "--ratio", "", "--out"])
        .arg(&out));
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn berry_outputs_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv_out = dir.path().join("b.csv");
    let o = run(adiaspin()
        .args([
            "berry",
            "--theta",
            "pi/6,pi/2,5pi/6",
            "--ratio",
            "0.01",
            "--routes",
            "adiabatic",
            "--out",
        ])
        .arg(&csv_out));
    assert!(o.status.success());
    let text = fs::read_to_string(&csv_out).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let mut rows = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let g: f64 = f[col("geometric_phase")].parse().unwrap();
        let e: f64 = f[col("expected_geometric_phase")].parse().unwrap();
        let s: f64 = f[col("sum_rule")].parse().unwrap();
        let gap = (g - e).rem_euclid(2.0 * std::f64::consts::PI);
        assert!(gap.min(2.0 * std::f64::consts::PI - gap) < 1e-10);
        assert!(s.abs() < 1e-10);
        rows += 1;
    }
    assert_eq!(rows, 6);

    let json_out = dir.path().join("b.json");
    let o = run(adiaspin()
        .args([
            "berry", "--theta", "1", "--ratio", "0.01", "--states", "2", "--out",
        ])
        .arg(&json_out));
    assert!(o.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&json_out).unwrap()).unwrap();
    let rows = doc.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows
        .iter()
        .all(|r| r["state"] == "upper" && r["sum_rule"].is_number()));
}
