use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mobch::diagnostics::EnergyReport;
use mobch::prelude::{prepare_initial, run, Grid, GridFunction, MobilitySpec, PotentialSpec, RegularizedPotential, SimConfig};

const BASE: &str = "grid.dim = 1
grid.n = 32
potential.kind = double_well
sim.dt = 1e-2
sim.t_end = 0.5
initial.amplitude = 0.2
";

fn mobch(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mobch"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("MOBCH_THREADS", t),
        None => cmd.env_remove("MOBCH_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn run_writes_trajectory_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ok.cfg", BASE);
    let out = dir.path().join("out");
    let res = mobch(&["run", "--config", s(&cfg), "--out", s(&out), "--snapshots"], None);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let (header, rows) = read_csv(&out.join("trajectory.csv"));
    assert_eq!(header, ["t", "mass", "energy", "energy_n", "entropy", "h2_norm", "newton_iters"]);
    assert_eq!(rows.len(), 51);
    assert!(out.join("snapshots/u_000050.txt").exists());
    assert!(out.join("snapshots/w_000000.txt").exists());
}

#[test]
fn trajectory_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ok.cfg", BASE);
    let out = dir.path().join("out");
    assert_eq!(code(&mobch(&["run", "--config", s(&cfg), "--out", s(&out)], None)), 0);

    // the same run through the library
    let grid = Grid::line(32, 2.0 * std::f64::consts::PI).unwrap();
    let reg = RegularizedPotential::new(PotentialSpec::double_well(), 10_000).unwrap();
    let mob = MobilitySpec::two_plus_sine();
    let sim = SimConfig::new(grid, 1e-2, 0.5);
    let k = std::f64::consts::PI / grid.extent();
    let raw = GridFunction::from_fn(grid, |[x, _]| 0.0 + 0.2 * (k * x).cos());
    let traj = run(&prepare_initial(&raw, &sim, &reg).unwrap(), &sim, &mob, &reg).unwrap();
    let report = EnergyReport::from_trajectory(&traj, &mob, &reg).unwrap();

    let (_, rows) = read_csv(&out.join("trajectory.csv"));
    assert_eq!(rows.len(), report.times.len());
    for (k, row) in rows.iter().enumerate() {
        let parsed: Vec<f64> = row[..6].iter().map(|c| c.parse().unwrap()).collect();
        let expected = [
            report.times[k],
            report.mass[k],
            report.energy[k],
            report.energy_n[k],
            report.entropy[k],
            report.h2[k],
        ];
        for (a, b) in parsed.iter().zip(expected) {
            assert_eq!(a.to_bits(), b.to_bits(), "row {k}");
        }
        assert_eq!(row[6].parse::<usize>().unwrap(), traj.newton_iters[k]);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BASE}ensemble.count = 4\nensemble.sample_times = 0.1, 0.5\n");
    let cfg = write_config(dir.path(), "ok.cfg", &text);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&mobch(&["run", "--config", s(&cfg), "--out", s(&a), "--snapshots"], None)), 0);
    assert_eq!(code(&mobch(&["run", "--config", s(&cfg), "--out", s(&b), "--snapshots"], None)), 0);
    assert_eq!(
        fs::read(a.join("trajectory.csv")).unwrap(),
        fs::read(b.join("trajectory.csv")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("snapshots/u_000031.txt")).unwrap(),
        fs::read(b.join("snapshots/u_000031.txt")).unwrap()
    );

    // worker count does not change ensemble output
    let (e1, e4) = (dir.path().join("e1"), dir.path().join("e4"));
    assert_eq!(code(&mobch(&["ensemble", "--config", s(&cfg), "--out", s(&e1)], Some("1"))), 0);
    assert_eq!(code(&mobch(&["ensemble", "--config", s(&cfg), "--out", s(&e4)], Some("4"))), 0);
    for file in ["compactness.csv", "members/member_000.csv", "members/member_003.csv"] {
        assert_eq!(fs::read(e1.join(file)).unwrap(), fs::read(e4.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn ensemble_writes_compactness_table() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BASE}ensemble.count = 3\nensemble.sample_times = 0.1, 0.3, 0.5\n");
    let cfg = write_config(dir.path(), "ok.cfg", &text);
    let out = dir.path().join("out");
    let res = mobch(&["ensemble", "--config", s(&cfg), "--out", s(&out)], None);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let (header, rows) = read_csv(&out.join("compactness.csv"));
    assert_eq!(header, ["t_k", "rho", "covering_number", "diameter", "max_residual"]);
    assert_eq!(rows.len(), 3 * 4);
    for chunk in rows.chunks(4) {
        // covering numbers grow as the radius shrinks
        let counts: Vec<usize> = chunk.iter().map(|r| r[2].parse().unwrap()).collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
        assert!(counts.iter().all(|&c| (1..=3).contains(&c)));
    }
    assert!(out.join("members/member_002.csv").exists());
    assert!(!out.join("members/member_003.csv").exists());
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "bad.cfg", &BASE.replace("double_well", "quartic"));
    let res = mobch(&["run", "--config", s(&cfg), "--out", s(&out)], None);
    assert_eq!(code(&res), 1);
    let err = stderr(&res);
    assert!(err.starts_with("mobch: "), "{err}");
    assert!(err.contains("line 3") && err.contains("double_well, polynomial, logarithmic"), "{err}");

    let cfg = write_config(dir.path(), "neg.cfg", &format!("{BASE}sim.epsilon = -1\n"));
    let err = stderr(&mobch(&["run", "--config", s(&cfg), "--out", s(&out)], None));
    assert!(err.contains("ε ≥ 0 required"), "{err}");

    let cfg = write_config(dir.path(), "unknown.cfg", &format!("{BASE}sim.timestep = 1\n"));
    let res = mobch(&["run", "--config", s(&cfg), "--out", s(&out)], None);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("unknown key `sim.timestep`"));

    let res = mobch(&["run", "--config", s(&dir.path().join("missing.cfg")), "--out", s(&out)], None);
    assert_eq!(code(&res), 1);

    let ok = write_config(dir.path(), "ok.cfg", BASE);
    let res = mobch(&["run", "--config", s(&ok), "--out", s(&out)], Some("zero"));
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("MOBCH_THREADS"));
}

#[test]
fn usage_errors_exit_one() {
    let res = mobch(&["diagnose"], None);
    assert_eq!(code(&res), 1);
    let err = stderr(&res);
    assert!(err.starts_with("mobch: ") && err.contains("Usage:") && err.contains("--traj"), "{err}");
    assert_eq!(code(&mobch(&["frobnicate"], None)), 1);
    assert_eq!(code(&mobch(&["--help"], None)), 0);
}

#[test]
fn divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.replace("sim.dt = 1e-2", "sim.dt = 10").replace("sim.t_end = 0.5", "sim.t_end = 10")
        + "sim.newton_max_iter = 1\ninitial.amplitude = 0.5\n";
    let text = text.replace("initial.amplitude = 0.2\n", "");
    let cfg = write_config(dir.path(), "stiff.cfg", &text);
    let res = mobch(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("out"))], None);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
    assert!(stderr(&res).contains("Newton iteration diverged"));
}

#[test]
fn diagnose_passes_then_catches_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ok.cfg", &format!("{BASE}diagnose.c_bound = 10\n"));
    let out = dir.path().join("out");
    assert_eq!(code(&mobch(&["run", "--config", s(&cfg), "--out", s(&out), "--snapshots"], None)), 0);
    let res = mobch(&["diagnose", "--traj", s(&out), "--config", s(&cfg)], None);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stdout));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("[PASS] mass conservation"));
    assert!(report.contains("[PASS] energy dissipation"));
    assert!(report.contains("[PASS] dissipativity"));
    assert!(report.contains("[PASS] entropy dissipation"), "{report}");
    assert!(report.contains("overall: PASS"));
    let (header, rows) = read_csv(&out.join("diagnostics.csv"));
    assert_eq!(header.len(), 10);
    assert_eq!(rows.len(), 51);

    // shift one value of one snapshot: the mean is no longer conserved
    let path = out.join("snapshots/u_000020.txt");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let v: f64 = lines[5].parse().unwrap();
    lines[5] = format!("{:.16e}", v + 1e-3);
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let res = mobch(&["diagnose", "--traj", s(&out), "--config", s(&cfg)], None);
    assert_eq!(code(&res), 3);
    assert!(stderr(&res).contains("mass conservation"));
}

#[test]
fn diagnose_without_snapshots_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ok.cfg", BASE);
    let out = dir.path().join("out");
    assert_eq!(code(&mobch(&["run", "--config", s(&cfg), "--out", s(&out)], None)), 0);
    assert_eq!(code(&mobch(&["diagnose", "--traj", s(&out), "--config", s(&cfg)], None)), 1);
}

#[test]
fn potential_table_marks_the_domain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "log.cfg",
        "potential.kind = logarithmic\npotential.lambda_log = 3\nsim.yosida_n = 100\n",
    );
    let out = dir.path().join("out");
    let res = mobch(
        &["potential-table", "--config", s(&cfg), "--r-min", "-1.5", "--r-max", "1.5", "--samples", "7", "--out", s(&out)],
        None,
    );
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let (header, rows) = read_csv(&out.join("potential_table.csv"));
    assert_eq!(header, ["r", "W", "Wprime", "beta", "beta_n", "W_n"]);
    assert_eq!(rows.len(), 7);
    let num = |r: usize, c: usize| rows[r][c].parse::<f64>().unwrap();
    // r = -1.5, -1, 1, 1.5 lie outside (-1, 1)
    for r in [0, 1, 5, 6] {
        assert!(num(r, 1).is_nan() && num(r, 2).is_nan() && num(r, 3).is_nan(), "row {r}");
        assert!(num(r, 4).is_finite() && num(r, 5).is_finite());
    }
    // W(0) = 0 and the table is odd/even about 0
    assert_eq!(num(3, 1), 0.0);
    assert_eq!(num(2, 4), -num(4, 4));
    assert_eq!(num(2, 5), num(4, 5));

    let res = mobch(&["potential-table", "--config", s(&cfg), "--samples", "1"], None);
    assert_eq!(code(&res), 1);
}
