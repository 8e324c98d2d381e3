use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, Write};
use std::path::Path;

use mobch::attractor::{compactness_probe, generate_ensemble, run_ensemble};
use mobch::diagnostics::{
    dissipativity_fit, dist_w_series, energy_equality_residual, energy_n, entropy_dissipation_check,
    regularization_window_scan, EnergyReport,
};
use mobch::ops::l2_norm;
use mobch::prelude::{prepare_initial, GridFunction, RegularizedPotential, StepState, Trajectory};
use mobch::timestepper;
use mobch::snapshot::read_snapshot;

use crate::config::{parse_config, parse_potential_config, RootConfig};
use crate::output::{f, write_snapshots, write_trajectory_csv, Csv};
use crate::CliError;

/// Worst drift of the spatial mean, relative to `max(1, ‖u₀‖)`.
fn mean_drift(traj: &Trajectory, report: &EnergyReport) -> f64 {
    let volume = traj.config.grid().volume();
    let scale = l2_norm(&traj.states[0].u).max(1.0);
    let m0 = report.mass[0];
    report.mass.iter().map(|m| (m - m0).abs() / volume).fold(0.0, f64::max) / scale
}

/// Number of snapshot intervals where `𝓔_n` grew beyond solver noise, and
/// the largest change.
fn energy_increases(traj: &Trajectory, report: &EnergyReport) -> (usize, f64) {
    let tol = (10.0 * traj.config.newton_tol).max(1e-9);
    let mut count = 0;
    let mut largest = f64::NEG_INFINITY;
    for pair in report.energy_n.windows(2) {
        let change = pair[1] - pair[0];
        largest = largest.max(change);
        if change > tol * (1.0 + pair[0].abs()) {
            count += 1;
        }
    }
    (count, largest)
}

const MASS_TOL: f64 = 1e-10;

/// Mass and energy checks shared by `run` and `ensemble`.
fn check_invariants(traj: &Trajectory, report: &EnergyReport, label: &str) -> Result<(), CliError> {
    let drift = mean_drift(traj, report);
    if !(drift <= MASS_TOL) {
        return Err(CliError::Diagnostic(format!("{label}: mean drifted by {drift:e}")));
    }
    let (increases, largest) = energy_increases(traj, report);
    if increases > 0 {
        return Err(CliError::Diagnostic(format!(
            "{label}: regularized energy increased on {increases} intervals (largest {largest:e})"
        )));
    }
    Ok(())
}

fn simulate(cfg: &RootConfig) -> Result<Trajectory, CliError> {
    let reg = cfg.regularized()?;
    let u0 = prepare_initial(&cfg.initial_datum()?, &cfg.sim, &reg)?;
    Ok(timestepper::run(&u0, &cfg.sim, &cfg.mobility, &reg)?)
}

pub fn run(config: &Path, out: &Path, snapshots: bool) -> Result<(), CliError> {
    let cfg = parse_config(config)?;
    let traj = simulate(&cfg)?;
    let report = EnergyReport::from_trajectory(&traj, &cfg.mobility, &cfg.regularized()?)?;
    write_trajectory_csv(&out.join("trajectory.csv"), &traj, &report)?;
    if snapshots {
        write_snapshots(&out.join("snapshots"), &traj)?;
    }
    check_invariants(&traj, &report, "run")
}

pub fn ensemble(config: &Path, out: &Path) -> Result<(), CliError> {
    let cfg = parse_config(config)?;
    let reg = cfg.regularized()?;
    let inits = generate_ensemble(&cfg.ensemble, &cfg.potential)?;
    let trajs = run_ensemble(&cfg.ensemble, &inits, &cfg.mobility, &reg)?;
    let probe = compactness_probe(&trajs, &cfg.ensemble, &cfg.potential, &cfg.mobility)?;

    let mut csv = Csv::create(
        &out.join("compactness.csv"),
        &["t_k", "rho", "covering_number", "diameter", "max_residual"],
    )?;
    for row in &probe.rows {
        for &(rho, count) in &row.covering {
            csv.row(&[f(row.t), f(rho), count.to_string(), f(row.diameter), f(row.max_residual)])?;
        }
    }
    csv.finish()?;

    let mut failures = Vec::new();
    for (i, traj) in trajs.iter().enumerate() {
        let report = EnergyReport::from_trajectory(traj, &cfg.mobility, &reg)?;
        write_trajectory_csv(&out.join("members").join(format!("member_{i:03}.csv")), traj, &report)?;
        if let Err(e) = check_invariants(traj, &report, &format!("member {i}")) {
            failures.push(e.to_string());
        }
    }
    let diameters: Vec<String> = probe.rows.iter().map(|r| format!("{:.6}", r.diameter)).collect();
    println!(
        "{} members, diameters [{}], compactness evidence: {}",
        trajs.len(),
        diameters.join(", "),
        if probe.compactness_evidence() { "yes" } else { "no" }
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Diagnostic(failures.join("; ")))
    }
}

/// Rebuild a trajectory from the `u_*.txt` / `w_*.txt` pairs of a run.
fn load_trajectory(dir: &Path, cfg: &RootConfig) -> Result<Trajectory, CliError> {
    let snaps = dir.join("snapshots");
    let mut names: Vec<String> = fs::read_dir(&snaps)
        .map_err(|e| CliError::io(&snaps, e))?
        .filter_map(|entry| entry.ok()?.file_name().into_string().ok())
        .filter(|name| name.starts_with("u_") && name.ends_with(".txt"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no snapshots found; write them with `run --snapshots`",
            snaps.display()
        )));
    }
    let read = |name: &str| -> Result<(GridFunction, f64), CliError> {
        let path = snaps.join(name);
        let file = fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
        let (field, t) = read_snapshot(BufReader::new(file))?;
        if !field.grid().compatible(&cfg.grid) {
            return Err(CliError::Usage(format!("{}: grid differs from the config", path.display())));
        }
        Ok((field, t))
    };
    let cadence = cfg.sim.dt * cfg.sim.snapshot_every as f64;
    let mut states = Vec::with_capacity(names.len());
    for (k, name) in names.iter().enumerate() {
        let (u, t) = read(name)?;
        let (w, tw) = read(&name.replacen("u_", "w_", 1))?;
        if tw != t || (t - k as f64 * cadence).abs() > 0.25 * cfg.sim.dt {
            return Err(CliError::Usage(format!(
                "snapshot {name} at t = {t} does not match the configured cadence {cadence}"
            )));
        }
        states.push(StepState {
            u,
            w,
            t,
            step_index: k * cfg.sim.snapshot_every,
        });
    }
    let initial_energy = energy_n(&states[0].u, &cfg.regularized()?, &cfg.sim.f)?;
    Ok(Trajectory {
        newton_iters: vec![0; states.len()],
        states,
        config: cfg.sim.clone(),
        initial_energy,
    })
}

pub fn diagnose(traj_dir: &Path, config: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = parse_config(config)?;
    let reg = cfg.regularized()?;
    let traj = load_trajectory(traj_dir, &cfg)?;
    let report = EnergyReport::from_trajectory(&traj, &cfg.mobility, &reg)?;
    let dist_w = dist_w_series(&traj, &cfg.potential, Some(&reg))?;
    let out = out.unwrap_or(traj_dir);

    let mut csv = Csv::create(
        &out.join("diagnostics.csv"),
        &[
            "t",
            "mass",
            "energy",
            "energy_n",
            "dissipation",
            "visc_dissipation",
            "entropy",
            "h2_norm",
            "residual_energy_eq",
            "dist_w",
        ],
    )?;
    for k in 0..report.times.len() {
        csv.row(&[
            f(report.times[k]),
            f(report.mass[k]),
            f(report.energy[k]),
            f(report.energy_n[k]),
            f(report.dissipation[k]),
            f(report.visc_dissipation[k]),
            f(report.entropy[k]),
            f(report.h2[k]),
            f(report.residual_energy_eq[k]),
            f(dist_w[k]),
        ])?;
    }
    csv.finish()?;

    let mut text = String::new();
    let mut failed = Vec::new();
    let mut line = |status: &str, name: &str, detail: String| {
        if status == "FAIL" {
            failed.push(name.to_string());
        }
        let _ = writeln!(text, "[{status}] {name}: {detail}");
    };
    let t_end = traj.last().t;

    let drift = mean_drift(&traj, &report);
    line(
        if drift <= MASS_TOL { "PASS" } else { "FAIL" },
        "mass conservation",
        format!("worst relative drift of the mean {drift:.3e} (bound {MASS_TOL:e})"),
    );

    let (increases, largest) = energy_increases(&traj, &report);
    line(
        if increases == 0 { "PASS" } else { "FAIL" },
        "energy dissipation",
        format!("{increases} increases of the regularized energy, largest change {largest:.3e}"),
    );

    let residual = energy_equality_residual(&traj, &cfg.mobility, &reg, 0.0, t_end)?;
    let dissipated = report.dissipation.last().copied().unwrap_or(0.0)
        + report.visc_dissipation.last().copied().unwrap_or(0.0);
    line(
        "INFO",
        "energy equality",
        format!("residual {residual:.3e} on [0, {t_end}], total dissipation {dissipated:.6e}"),
    );

    if report.energy.iter().any(|e| e.is_nan()) {
        line("FAIL", "dissipativity", "the state left the domain of the potential".into());
    } else {
        match dissipativity_fit(&report, report.energy[0]) {
            Ok(fit) => line(
                "PASS",
                "dissipativity",
                format!("kappa {:.6}, C0 {:.6e}, worst margin {:.3e}", fit.kappa, fit.c0, fit.margin),
            ),
            Err(e) => line("FAIL", "dissipativity", e.to_string()),
        }
    }

    match entropy_dissipation_check(&traj, &cfg.mobility, &cfg.potential) {
        Ok(check) => line(
            if check.violations == 0 { "PASS" } else { "FAIL" },
            "entropy dissipation",
            format!(
                "c6 {:.6}, worst left side {:.6}, {} violations over {} intervals",
                check.c6,
                check.worst,
                check.violations,
                check.lhs.len()
            ),
        ),
        Err(mobch::Error::WrongPotentialClass { reason }) => {
            line("SKIP", "entropy dissipation", format!("not applicable ({reason})"))
        }
        Err(e) => return Err(e.into()),
    }

    match cfg.diagnose.c_bound {
        Some(c_bound) => {
            let windows = regularization_window_scan(&traj, &cfg.potential, c_bound, cfg.diagnose.window)?;
            let list: Vec<String> = windows
                .iter()
                .map(|w| format!("[{}, {}]", w.onset, w.end()))
                .collect();
            line(
                "INFO",
                "regularization windows",
                format!(
                    "{} windows of length >= {} below C_bound = {c_bound}: {}",
                    windows.len(),
                    cfg.diagnose.window,
                    list.join(" ")
                ),
            );
        }
        None => line("SKIP", "regularization windows", "set diagnose.c_bound to scan".into()),
    }

    let _ = writeln!(
        text,
        "overall: {}",
        if failed.is_empty() { "PASS".to_string() } else { format!("FAIL ({})", failed.join(", ")) }
    );
    let header = format!("mobch diagnostics: {} snapshots on [0, {t_end}]\n", traj.states.len());
    let path = out.join("report.txt");
    fs::write(&path, format!("{header}{text}")).map_err(|e| CliError::io(&path, e))?;
    print!("{header}{text}");
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Diagnostic(format!("failed: {}", failed.join(", "))))
    }
}

pub fn potential_table(
    config: &Path,
    r_min: Option<f64>,
    r_max: Option<f64>,
    samples: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let (spec, n) = parse_potential_config(config)?;
    let reg = RegularizedPotential::new(spec, n)?;
    let edge = if spec.is_singular() { 0.999 } else { 2.0 };
    let (lo, hi) = (r_min.unwrap_or(-edge), r_max.unwrap_or(edge));
    if samples < 2 || !(lo < hi) {
        return Err(CliError::Usage(format!(
            "need r_min < r_max and at least 2 samples, got [{lo}, {hi}] with {samples}"
        )));
    }
    let nan_outside = |v: mobch::Result<f64>| match v {
        Ok(x) => Ok(x),
        Err(mobch::Error::DomainViolation { .. }) => Ok(f64::NAN),
        Err(e) => Err(e),
    };
    let mut rows = Vec::with_capacity(samples);
    for k in 0..samples {
        let r = if k + 1 == samples { hi } else { lo + (hi - lo) * k as f64 / (samples - 1) as f64 };
        rows.push(vec![
            f(r),
            f(nan_outside(spec.w(r))?),
            f(nan_outside(spec.w_prime(r))?),
            f(nan_outside(spec.beta(r))?),
            f(reg.yosida_beta(r)?),
            f(reg.w_n(r)?),
        ]);
    }
    let header = ["r", "W", "Wprime", "beta", "beta_n", "W_n"];
    match out {
        Some(dir) => {
            let mut csv = Csv::create(&dir.join("potential_table.csv"), &header)?;
            for row in &rows {
                csv.row(row)?;
            }
            csv.finish()
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            let mut body = header.join(",");
            for row in &rows {
                body.push('\n');
                body.push_str(&row.join(","));
            }
            writeln!(lock, "{body}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}
