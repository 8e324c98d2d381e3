//! Energy-stable time stepping for the regularized problem
//!
//! ```text
//! u_t + B_u w = 0,        w = ε u_t + B u + W_n'(u) + f.
//! ```
//!
//! One step of size `dt` solves
//!
//! ```text
//! (u⁺ - u)/dt + B_{u} w⁺ = 0,
//! w⁺ = ε (u⁺ - u)/dt + B u⁺ + β_n(u⁺) - λ u + f,
//! ```
//!
//! i.e. implicit Euler with the convex part `β_n` and the gradient term
//! implicit, the concave part `-λu` explicit and the mobility lagged at the
//! old state. Testing the first equation with `w⁺` and the second with
//! `u⁺ - u` gives `𝓔_n(u⁺) ≤ 𝓔_n(u)` for every `dt`.
//!
//! The nonlinear system is solved by damped Newton on the coupled
//! `(u, w)` unknowns. The Jacobian is banded once the unknowns are
//! interleaved cell by cell, and is nonsingular because `β_n' ≥ 0`.

use crate::diagnostics::energy_n;
use crate::error::{Error, Result};
use crate::grid::{apply_flux_operator, CellMobility, Grid, GridFunction};
use crate::linalg::BandMatrix;
use crate::mobility::MobilitySpec;
use crate::ops::{elliptic_mollify, l2_norm, mean, norms};
use crate::potentials::{PotentialSpec, RegularizedPotential};

/// Parameters of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Viscosity ε ≥ 0.
    pub epsilon: f64,
    /// With `epsilon = 0`, use `ε_n = 1/n` instead (vanishing-viscosity
    /// approximation of the non-viscous problem).
    pub vanishing_viscosity: bool,
    pub yosida_n: u64,
    pub dt: f64,
    pub t_end: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Bound on `|mean(u)|`.
    pub m: f64,
    pub snapshot_every: usize,
    /// Time-independent source.
    pub f: GridFunction,
}

impl SimConfig {
    /// Defaults: ε = 0, n = 10⁴, Newton tolerance 1e-10 with at most 50
    /// iterations, m = 0.9, a snapshot every step, no source.
    pub fn new(grid: Grid, dt: f64, t_end: f64) -> Self {
        Self {
            epsilon: 0.0,
            vanishing_viscosity: false,
            yosida_n: 10_000,
            dt,
            t_end,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            m: 0.9,
            snapshot_every: 1,
            f: GridFunction::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.f.grid()
    }

    /// The viscosity actually used by the scheme.
    pub fn effective_epsilon(&self) -> f64 {
        if self.epsilon == 0.0 && self.vanishing_viscosity {
            1.0 / self.yosida_n as f64
        } else {
            self.epsilon
        }
    }

    /// Number of time steps covering `[0, t_end]`.
    pub fn step_count(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }

    pub fn validate(&self, spec: &PotentialSpec) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!("ε ≥ 0 required, got {}", self.epsilon)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("dt > 0 required, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::invalid(format!("t_end ≥ 0 required, got {}", self.t_end)));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::invalid(format!("newton_tol > 0 required, got {}", self.newton_tol)));
        }
        if self.newton_max_iter == 0 || self.snapshot_every == 0 || self.yosida_n == 0 {
            return Err(Error::invalid("newton_max_iter, snapshot_every and yosida_n must be positive"));
        }
        if !(self.m > 0.0) {
            return Err(Error::invalid(format!("m > 0 required, got {}", self.m)));
        }
        if spec.is_singular() && !(self.m < 1.0) {
            return Err(Error::invalid(format!("singular potentials need m < 1, got {}", self.m)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub u: GridFunction,
    pub w: GridFunction,
    pub t: f64,
    pub step_index: usize,
}

/// Solver statistics of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub newton_iters: usize,
    pub residual: f64,
}

/// Snapshots of a run, `snapshot_every` steps apart.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<StepState>,
    pub config: SimConfig,
    /// `𝓔_n(u₀)`.
    pub initial_energy: f64,
    /// Newton iterations spent since the previous snapshot.
    pub newton_iters: Vec<usize>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// Index of the snapshot at time `t`, matched to within a quarter step.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let tol = 0.25 * self.config.dt;
        self.states
            .iter()
            .position(|s| (s.t - t).abs() <= tol)
            .ok_or(Error::TimesNotInTrajectory { time: t })
    }

    pub fn last(&self) -> &StepState {
        self.states.last().expect("trajectories hold at least the initial state")
    }
}

/// Elliptic regularization of raw initial data, `u₀,ₙ = (I + B/n)⁻¹ u₀`.
///
/// Checks the contraction `‖u₀,ₙ‖_V ≤ ‖u₀‖_V`, the distance bound
/// `‖u₀,ₙ - u₀‖ ≤ n^{-1/2}‖u₀‖_V`, and the convexity inequality
/// `∫W_n(u₀,ₙ) ≤ ∫W_n(u₀) + λ/2 (‖u₀‖² - ‖u₀,ₙ‖²)` which together bound
/// the regularized energy of the result by that of the raw datum.
pub fn prepare_initial(u0_raw: &GridFunction, cfg: &SimConfig, reg: &RegularizedPotential) -> Result<GridFunction> {
    let spec = reg.base();
    for &x in u0_raw.values() {
        spec.w(x)?;
    }
    check_mean_bound(u0_raw, cfg.m)?;
    let n = cfg.yosida_n;
    let out = elliptic_mollify(u0_raw, n)?;

    let raw = norms(u0_raw);
    let smooth = norms(&out);
    let slack = 1e-10 * (1.0 + raw.h1());
    let dist = l2_norm(&out.sub(u0_raw)?);
    if smooth.h1() > raw.h1() + slack || dist > raw.h1() / (n as f64).sqrt() + slack {
        return Err(Error::ConvergenceFailure {
            what: "elliptic mollifier (norm bounds violated)",
            iterations: 0,
            residual: dist,
        });
    }
    let vol = out.grid().cell_volume();
    let wn_sum = |v: &GridFunction| -> Result<f64> {
        v.values().iter().map(|&x| reg.w_n(x)).sum::<Result<f64>>().map(|s| s * vol)
    };
    let lhs = wn_sum(&out)?;
    let rhs = wn_sum(u0_raw)? + 0.5 * spec.lambda() * (raw.l2 * raw.l2 - smooth.l2 * smooth.l2);
    if lhs > rhs + 1e-10 * (1.0 + rhs.abs()) {
        return Err(Error::ConvergenceFailure {
            what: "elliptic mollifier (energy bound violated)",
            iterations: 0,
            residual: lhs - rhs,
        });
    }
    Ok(out)
}

fn check_mean_bound(u: &GridFunction, m: f64) -> Result<()> {
    let mu = mean(u);
    // closed bound; allow roundoff of the summation
    if mu.abs() > m * (1.0 + 1e-14) + 1e-15 {
        return Err(Error::MeanBoundViolation { mean: mu, bound: m });
    }
    Ok(())
}

/// Reusable solver for one configuration.
pub struct Stepper<'a> {
    cfg: &'a SimConfig,
    mob: &'a MobilitySpec,
    reg: &'a RegularizedPotential,
    grid: Grid,
    epsilon: f64,
    band: usize,
    // scratch
    beta_n: Vec<f64>,
    beta_n_prime: Vec<f64>,
    lap: Vec<f64>,
    flux: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(cfg: &'a SimConfig, mob: &'a MobilitySpec, reg: &'a RegularizedPotential) -> Result<Self> {
        cfg.validate(reg.base())?;
        let grid = *cfg.grid();
        let stride = if grid.dim() == 1 { 1 } else { grid.n() };
        let len = grid.len();
        Ok(Self {
            cfg,
            mob,
            reg,
            grid,
            epsilon: cfg.effective_epsilon(),
            band: 2 * stride + 1,
            beta_n: vec![0.0; len],
            beta_n_prime: vec![0.0; len],
            lap: vec![0.0; len],
            flux: vec![0.0; len],
        })
    }

    /// State at `t = 0` with `w₀ = B u₀ + W_n'(u₀) + f`.
    pub fn initial_state(&self, u0: &GridFunction) -> Result<StepState> {
        if !u0.grid().compatible(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let mut lap = vec![0.0; self.grid.len()];
        apply_flux_operator(&self.grid, None, u0.values(), &mut lap);
        let f = self.cfg.f.values();
        let mut w = Vec::with_capacity(lap.len());
        for (k, &x) in u0.values().iter().enumerate() {
            w.push(lap[k] + self.reg.w_n_prime(x)? + f[k]);
        }
        Ok(StepState {
            u: u0.clone(),
            w: GridFunction::from_vec_unchecked(self.grid, w),
            t: 0.0,
            step_index: 0,
        })
    }

    fn eval_beta(&mut self, u: &[f64]) -> Result<()> {
        for (k, &x) in u.iter().enumerate() {
            let p = self.reg.eval(x)?;
            self.beta_n[k] = p.beta_n;
            self.beta_n_prime[k] = p.beta_n_prime;
        }
        Ok(())
    }

    /// Residuals in interleaved layout; returns the discrete L² norm.
    fn residual(
        &mut self,
        faces: &[f64],
        u_old: &[f64],
        explicit: &[f64],
        u: &[f64],
        w: &[f64],
        out: &mut [f64],
    ) -> Result<f64> {
        let dt = self.cfg.dt;
        self.eval_beta(u)?;
        apply_flux_operator(&self.grid, Some(faces), w, &mut self.flux);
        apply_flux_operator(&self.grid, None, u, &mut self.lap);
        let mut sq = 0.0;
        for k in 0..u.len() {
            let rate = (u[k] - u_old[k]) / dt;
            let r1 = rate + self.flux[k];
            let r2 = w[k] - self.epsilon * rate - self.lap[k] - self.beta_n[k] - explicit[k];
            out[2 * k] = r1;
            out[2 * k + 1] = r2;
            sq += r1 * r1 + r2 * r2;
        }
        Ok((sq * self.grid.cell_volume()).sqrt())
    }

    fn assemble(&self, faces: &[f64], slopes: &[f64]) -> BandMatrix {
        let len = self.grid.len();
        let dt = self.cfg.dt;
        let mut jac = BandMatrix::zeros(2 * len, self.band, self.band);
        for k in 0..len {
            jac.add(2 * k, 2 * k, 1.0 / dt);
            jac.add(2 * k + 1, 2 * k + 1, 1.0);
            jac.add(2 * k + 1, 2 * k, -(self.epsilon / dt + slopes[k]));
        }
        let inv_h2 = 1.0 / (self.grid.h() * self.grid.h());
        self.grid.for_each_face(|a, b, slot| {
            let c = faces[slot] * inv_h2;
            jac.add(2 * a, 2 * a + 1, c);
            jac.add(2 * a, 2 * b + 1, -c);
            jac.add(2 * b, 2 * b + 1, c);
            jac.add(2 * b, 2 * a + 1, -c);
            jac.add(2 * a + 1, 2 * a, -inv_h2);
            jac.add(2 * a + 1, 2 * b, inv_h2);
            jac.add(2 * b + 1, 2 * b, -inv_h2);
            jac.add(2 * b + 1, 2 * a, inv_h2);
        });
        jac
    }

    /// Advance one step.
    pub fn step(&mut self, state: &StepState) -> Result<(StepState, StepStats)> {
        let step = state.step_index + 1;
        let len = self.grid.len();
        let lambda = self.reg.base().lambda();
        let mobility = CellMobility::at_state(self.mob, &state.u)?;
        let faces = mobility.faces().to_vec();
        let u_old = state.u.values().to_vec();
        let f = self.cfg.f.values();
        let explicit: Vec<f64> = (0..len).map(|k| -lambda * u_old[k] + f[k]).collect();

        let mut u = u_old.clone();
        let mut w = state.w.values().to_vec();
        // consistent chemical potential for the initial guess u⁺ = u
        self.eval_beta(&u)?;
        apply_flux_operator(&self.grid, None, &u, &mut self.lap);
        for k in 0..len {
            w[k] = self.lap[k] + self.beta_n[k] + explicit[k];
        }

        let mut res = vec![0.0; 2 * len];
        let mut norm = self.residual(&faces, &u_old, &explicit, &u, &w, &mut res)?;
        let tol = self.cfg.newton_tol;
        let mut iters = 0;
        let mut delta = vec![0.0; 2 * len];
        let mut trial_res = vec![0.0; 2 * len];
        let (mut trial_u, mut trial_w) = (vec![0.0; len], vec![0.0; len]);

        while norm > tol {
            if iters >= self.cfg.newton_max_iter {
                return Err(Error::NewtonDivergence {
                    step,
                    iterations: iters,
                    residual: norm,
                });
            }
            iters += 1;
            let slopes = self.beta_n_prime.clone();
            let mut accepted = self.try_direction(
                &faces, &slopes, &u_old, &explicit, &u, &w, &res, norm, &mut delta, &mut trial_u, &mut trial_w,
                &mut trial_res,
            )?;
            if accepted.is_none() {
                // Picard fallback: secant slopes of β_n between old and current iterate
                let current_beta = self.beta_n.clone();
                self.eval_beta(&u_old)?;
                let secant: Vec<f64> = (0..len)
                    .map(|k| {
                        let du = u[k] - u_old[k];
                        if du.abs() > 1e-12 {
                            ((current_beta[k] - self.beta_n[k]) / du).max(0.0)
                        } else {
                            slopes[k]
                        }
                    })
                    .collect();
                // restore β_n at the current iterate
                self.residual(&faces, &u_old, &explicit, &u, &w, &mut res)?;
                accepted = self.try_direction(
                    &faces, &secant, &u_old, &explicit, &u, &w, &res, norm, &mut delta, &mut trial_u,
                    &mut trial_w, &mut trial_res,
                )?;
            }
            match accepted {
                Some(new_norm) => {
                    u.copy_from_slice(&trial_u);
                    w.copy_from_slice(&trial_w);
                    res.copy_from_slice(&trial_res);
                    norm = new_norm;
                }
                None => {
                    return Err(Error::NewtonDivergence {
                        step,
                        iterations: iters,
                        residual: norm,
                    })
                }
            }
        }

        Ok((
            StepState {
                u: GridFunction::from_vec_unchecked(self.grid, u),
                w: GridFunction::from_vec_unchecked(self.grid, w),
                t: state.t + self.cfg.dt,
                step_index: step,
            },
            StepStats {
                newton_iters: iters,
                residual: norm,
            },
        ))
    }

    /// Solve the linearized system with the given slopes for `β_n` and
    /// backtrack along the direction. Returns the accepted residual norm,
    /// leaving the accepted iterate in `trial_*`.
    #[allow(clippy::too_many_arguments)]
    fn try_direction(
        &mut self,
        faces: &[f64],
        slopes: &[f64],
        u_old: &[f64],
        explicit: &[f64],
        u: &[f64],
        w: &[f64],
        res: &[f64],
        norm: f64,
        delta: &mut [f64],
        trial_u: &mut [f64],
        trial_w: &mut [f64],
        trial_res: &mut [f64],
    ) -> Result<Option<f64>> {
        let lu = self.assemble(faces, slopes).factor()?;
        for (d, r) in delta.iter_mut().zip(res) {
            *d = -r;
        }
        lu.solve_in_place(delta);
        let mut step = 1.0;
        for _ in 0..12 {
            for k in 0..u.len() {
                trial_u[k] = u[k] + step * delta[2 * k];
                trial_w[k] = w[k] + step * delta[2 * k + 1];
            }
            let trial = self.residual(faces, u_old, explicit, trial_u, trial_w, trial_res)?;
            if trial <= (1.0 - 1e-4 * step) * norm {
                return Ok(Some(trial));
            }
            step *= 0.5;
        }
        Ok(None)
    }
}

/// One step of the scheme from `state`.
pub fn step(
    state: &StepState,
    cfg: &SimConfig,
    mob: &MobilitySpec,
    reg: &RegularizedPotential,
) -> Result<StepState> {
    Ok(Stepper::new(cfg, mob, reg)?.step(state)?.0)
}

/// Run from `u0` (normally the output of [`prepare_initial`]) to `cfg.t_end`.
pub fn run(u0: &GridFunction, cfg: &SimConfig, mob: &MobilitySpec, reg: &RegularizedPotential) -> Result<Trajectory> {
    run_with(u0, cfg, mob, reg, |_, _| {})
}

/// As [`run`], calling `observer` after every step.
pub fn run_with(
    u0: &GridFunction,
    cfg: &SimConfig,
    mob: &MobilitySpec,
    reg: &RegularizedPotential,
    mut observer: impl FnMut(&StepState, &StepStats),
) -> Result<Trajectory> {
    if reg.index() != cfg.yosida_n {
        return Err(Error::invalid(format!(
            "regularized potential has index {} but the configuration asks for {}",
            reg.index(),
            cfg.yosida_n
        )));
    }
    let mut stepper = Stepper::new(cfg, mob, reg)?;
    check_mean_bound(u0, cfg.m)?;
    let mut state = stepper.initial_state(u0)?;
    let initial_energy = energy_n(u0, reg, &cfg.f)?;
    let mut states = vec![state.clone()];
    let mut newton_iters = vec![0];
    let mut since_snapshot = 0;
    for k in 1..=cfg.step_count() {
        let (mut next, stats) = stepper.step(&state).map_err(|e| match e {
            e @ Error::NewtonDivergence { .. } => e,
            other => Error::AtStep {
                step: k,
                source: Box::new(other),
            },
        })?;
        next.t = k as f64 * cfg.dt;
        since_snapshot += stats.newton_iters;
        observer(&next, &stats);
        if k % cfg.snapshot_every == 0 {
            states.push(next.clone());
            newton_iters.push(since_snapshot);
            since_snapshot = 0;
        }
        state = next;
    }
    Ok(Trajectory {
        states,
        config: cfg.clone(),
        initial_energy,
        newton_iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::laplacian_neumann;
    use std::f64::consts::PI;

    fn setup(n: usize) -> (Grid, MobilitySpec, RegularizedPotential) {
        let grid = Grid::line(n, 2.0 * PI).unwrap();
        let reg = RegularizedPotential::new(PotentialSpec::double_well(), 10_000).unwrap();
        (grid, MobilitySpec::two_plus_sine(), reg)
    }

    #[test]
    fn constant_state_is_stationary() {
        let (grid, mob, reg) = setup(16);
        for eps in [0.0, 1e-2] {
            let mut cfg = SimConfig::new(grid, 1e-2, 0.5);
            cfg.epsilon = eps;
            let u0 = GridFunction::constant(grid, 0.3);
            let traj = run(&u0, &cfg, &mob, &reg).unwrap();
            let wn = reg.w_n_prime(0.3).unwrap();
            for s in &traj.states {
                assert!(s.u.values().iter().all(|&x| x == 0.3));
            }
            for s in &traj.states[1..] {
                assert!(s.w.values().iter().all(|&x| (x - wn).abs() <= 1e-14));
            }
        }
    }

    #[test]
    fn snapshot_count_and_cadence() {
        let (grid, mob, reg) = setup(8);
        let mut cfg = SimConfig::new(grid, 0.01, 0.95);
        cfg.snapshot_every = 7;
        let traj = run(&GridFunction::constant(grid, 0.1), &cfg, &mob, &reg).unwrap();
        let expected = (0.95f64 / (0.01 * 7.0)).floor() as usize + 1;
        assert_eq!(traj.states.len(), expected);
        let times = traj.times();
        for pair in times.windows(2) {
            assert!((pair[1] - pair[0] - 0.07).abs() < 1e-12);
        }
    }

    #[test]
    fn step_conserves_mass_and_decreases_energy() {
        let (grid, mob, reg) = setup(64);
        let mut cfg = SimConfig::new(grid, 1e-2, 0.0);
        cfg.f = GridFunction::constant(grid, 0.1);
        let u0 = GridFunction::from_fn(grid, |[x, _]| 0.2 * (x / 2.0).cos() + 0.4 * (1.5 * x).sin());
        let mut stepper = Stepper::new(&cfg, &mob, &reg).unwrap();
        let mut state = stepper.initial_state(&u0).unwrap();
        let m0 = mean(&u0);
        let mut e = energy_n(&u0, &reg, &cfg.f).unwrap();
        for _ in 0..200 {
            let (next, stats) = stepper.step(&state).unwrap();
            assert!(stats.residual <= cfg.newton_tol);
            assert!((mean(&next.u) - m0).abs() <= 1e-13 * (1.0 + l2_norm(&next.u)));
            let e_next = energy_n(&next.u, &reg, &cfg.f).unwrap();
            assert!(e_next <= e + cfg.newton_tol, "{e_next} > {e}");
            e = e_next;
            state = next;
        }
    }

    #[test]
    fn converged_step_satisfies_both_equations() {
        let (grid, mob, reg) = setup(32);
        let mut cfg = SimConfig::new(grid, 5e-3, 0.0);
        cfg.epsilon = 0.05;
        let u0 = GridFunction::from_fn(grid, |[x, _]| 0.6 * (x / 2.0).cos());
        let stepper = Stepper::new(&cfg, &mob, &reg).unwrap();
        let s0 = stepper.initial_state(&u0).unwrap();
        let s1 = step(&s0, &cfg, &mob, &reg).unwrap();
        let cm = CellMobility::at_state(&mob, &s0.u).unwrap();
        let rate = s1.u.sub(&s0.u).unwrap().map(|x| x / cfg.dt);
        let eq1 = rate.add(&crate::ops::div_b_grad(&cm, &s1.w).unwrap()).unwrap();
        assert!(l2_norm(&eq1) <= 1e-10);
        let lam = reg.base().lambda();
        let mut rhs = laplacian_neumann(&s1.u);
        for k in 0..grid.len() {
            rhs[k] += cfg.epsilon * rate[k] + reg.yosida_beta(s1.u[k]).unwrap() - lam * s0.u[k];
        }
        assert!(l2_norm(&s1.w.sub(&rhs).unwrap()) <= 1e-10);
    }

    #[test]
    fn two_dimensional_run_conserves_mass() {
        let grid = Grid::square(12, 2.0 * PI).unwrap();
        let reg = RegularizedPotential::new(PotentialSpec::double_well(), 10_000).unwrap();
        let mob = MobilitySpec::two_plus_sine();
        let mut cfg = SimConfig::new(grid, 1e-2, 0.5);
        cfg.snapshot_every = 10;
        let u0 = GridFunction::from_fn(grid, |[x, y]| 0.1 + 0.3 * (x / 2.0).cos() * (y).cos());
        let traj = run(&u0, &cfg, &mob, &reg).unwrap();
        let m0 = mean(&u0);
        let mut e = traj.initial_energy;
        for s in &traj.states {
            assert!((mean(&s.u) - m0).abs() <= 1e-12);
            let en = energy_n(&s.u, &reg, &cfg.f).unwrap();
            assert!(en <= e + 1e-9);
            e = en;
        }
    }

    #[test]
    fn logarithmic_potential_runs_through_yosida() {
        let grid = Grid::line(48, 2.0 * PI).unwrap();
        let spec = PotentialSpec::logarithmic(3.0).unwrap();
        let reg = RegularizedPotential::new(spec, 1000).unwrap();
        let mob = MobilitySpec::two_plus_sine();
        let mut cfg = SimConfig::new(grid, 1e-2, 2.0);
        cfg.snapshot_every = 50;
        cfg.yosida_n = 1000;
        let u0 = GridFunction::from_fn(grid, |[x, _]| 0.1 * (x / 2.0).cos());
        let u0 = prepare_initial(&u0, &cfg, &reg).unwrap();
        let traj = run(&u0, &cfg, &mob, &reg).unwrap();
        let last = traj.last();
        assert!(last.u.values().iter().all(|x| x.is_finite()));
        let e_last = energy_n(&last.u, &reg, &cfg.f).unwrap();
        assert!(e_last < traj.initial_energy);
    }

    #[test]
    fn prepare_initial_contracts_and_preserves_mean() {
        let (grid, _, reg) = setup(64);
        let cfg = SimConfig::new(grid, 1e-3, 0.0);
        let c = prepare_initial(&GridFunction::constant(grid, 0.4), &cfg, &reg).unwrap();
        assert!(c.values().iter().all(|&x| (x - 0.4).abs() <= 1e-15));
        let raw = GridFunction::from_fn(grid, |[x, _]| 0.2 + 0.5 * (3.0 * x).sin() + 0.1 * (11.0 * x).cos());
        let out = prepare_initial(&raw, &cfg, &reg).unwrap();
        assert!((mean(&out) - mean(&raw)).abs() <= 1e-14);
        assert!(norms(&out).h1() <= norms(&raw).h1());
    }

    #[test]
    fn prepare_initial_enforces_mean_bound_and_domain() {
        let grid = Grid::line(8, 1.0).unwrap();
        let reg = RegularizedPotential::new(PotentialSpec::logarithmic(1.0).unwrap(), 100).unwrap();
        let mut cfg = SimConfig::new(grid, 1e-3, 0.0);
        cfg.m = 0.5;
        assert!(matches!(
            prepare_initial(&GridFunction::constant(grid, 0.6), &cfg, &reg),
            Err(Error::MeanBoundViolation { .. })
        ));
        // |mean| = m exactly is admissible
        assert!(prepare_initial(&GridFunction::constant(grid, 0.5), &cfg, &reg).is_ok());
        assert!(matches!(
            prepare_initial(&GridFunction::constant(grid, 1.0), &cfg, &reg),
            Err(Error::DomainViolation { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let grid = Grid::line(4, 1.0).unwrap();
        let dw = PotentialSpec::double_well();
        let mut cfg = SimConfig::new(grid, 1e-3, 1.0);
        assert!(cfg.validate(&dw).is_ok());
        cfg.epsilon = -1.0;
        let err = cfg.validate(&dw).unwrap_err().to_string();
        assert!(err.contains("ε ≥ 0 required"), "{err}");
        cfg.epsilon = 0.0;
        cfg.m = 1.0;
        assert!(cfg.validate(&dw).is_ok());
        assert!(cfg.validate(&PotentialSpec::logarithmic(1.0).unwrap()).is_err());
        cfg.vanishing_viscosity = true;
        cfg.yosida_n = 50;
        assert_eq!(cfg.effective_epsilon(), 0.02);
    }

    #[test]
    fn tiny_iteration_budget_reports_divergence() {
        let (grid, mob, reg) = setup(32);
        let mut cfg = SimConfig::new(grid, 10.0, 10.0);
        cfg.newton_max_iter = 1;
        let u0 = GridFunction::from_fn(grid, |[x, _]| 0.5 * (x / 2.0).cos());
        assert!(matches!(run(&u0, &cfg, &mob, &reg), Err(Error::NewtonDivergence { step: 1, .. })));
    }
}
