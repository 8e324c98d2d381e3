//! Energies, the energy equality, dissipativity fits, entropy and the
//! local-regularization scan.

mod entropy;

pub use entropy::{
    entropy_dissipation_check, entropy_dissipation_check_ensemble, entropy_functional, entropy_lhs,
    entropy_violations, integrate, smallest_grid_bound, EntropyCheck, EntropyTable,
};

use crate::error::{Error, Result};
use crate::grid::{CellMobility, GridFunction};
use crate::mobility::MobilitySpec;
use crate::ops::{div_b_grad, dist_w, inner, integral, l2_norm, norms};
use crate::potentials::{PotentialSpec, RegularizedPotential};
use crate::timestepper::{StepState, Trajectory};

fn gradient_energy(u: &GridFunction) -> f64 {
    let h1 = norms(u).h1_semi;
    0.5 * h1 * h1
}

/// `𝓔(u) = ∫ (|∇u|²/2 + W(u) + f u)`.
pub fn energy(u: &GridFunction, spec: &PotentialSpec, f: &GridFunction) -> Result<f64> {
    let mut w = 0.0;
    for &x in u.values() {
        w += spec.w(x)?;
    }
    Ok(gradient_energy(u) + w * u.grid().cell_volume() + inner(f, u)?)
}

/// `𝓔_n(u)`, the energy with `W_n` in place of `W`. Defined for every real `u`.
pub fn energy_n(u: &GridFunction, reg: &RegularizedPotential, f: &GridFunction) -> Result<f64> {
    let mut w = 0.0;
    for &x in u.values() {
        w += reg.w_n(x)?;
    }
    Ok(gradient_energy(u) + w * u.grid().cell_volume() + inner(f, u)?)
}

/// Constants `(η, c)` with `𝓔(v) ≥ η ‖v‖²_{H¹} - c` for all admissible `v`.
pub fn energy_coercivity(spec: &PotentialSpec, f: &GridFunction) -> (f64, f64) {
    let vol = f.grid().volume();
    let f2 = l2_norm(f).powi(2);
    let lambda = spec.lambda();
    if lambda > 0.0 {
        // W ≥ 3λr² - c_W and f v ≥ -(3λ/2) v² - f²/(6λ)
        (0.5f64.min(1.5 * lambda), spec.c_w() * vol + f2 / (6.0 * lambda))
    } else {
        // λ = 0 only for the pure power a|r|^p: r² - a|r|^p ≤ (1 - 2/p)(2/(ap))^{2/(p-2)}
        let p = spec.growth_exponent().unwrap_or(4.0);
        let eta = match spec.kind() {
            crate::potentials::PotentialKind::Polynomial { eta, .. } => eta,
            _ => 1.0,
        };
        let a = eta / (p * (p - 1.0));
        let c0 = (1.0 - 2.0 / p) * (2.0 / (a * p)).powf(2.0 / (p - 2.0));
        (0.5, c0 * vol + 0.5 * f2)
    }
}

/// Time series of the conserved and dissipated quantities of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    /// `𝓔(u(t))`; NaN where `u` has left the domain of `W`.
    pub energy: Vec<f64>,
    pub energy_n: Vec<f64>,
    /// Cumulative `∫ ⟨B_u w, w⟩ dt`.
    pub dissipation: Vec<f64>,
    /// Cumulative `ε ∫ ‖u_t‖² dt`.
    pub visc_dissipation: Vec<f64>,
    pub mass: Vec<f64>,
    pub entropy: Vec<f64>,
    pub h2: Vec<f64>,
    /// `𝓔_n(t) - 𝓔_n(0) + dissipation + visc_dissipation`.
    pub residual_energy_eq: Vec<f64>,
}

/// `⟨B_u w, w⟩ = ∫ b(u)|∇w|²`.
pub fn dissipation_rate(state: &StepState, mob: &MobilitySpec) -> Result<f64> {
    let cm = CellMobility::at_state(mob, &state.u)?;
    Ok(inner(&div_b_grad(&cm, &state.w)?, &state.w)?.max(0.0))
}

/// `‖u_t‖²` at every snapshot: centered differences inside, one-sided at the ends.
fn rate_squares(states: &[StepState]) -> Result<Vec<f64>> {
    let n = states.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return Ok(out);
    }
    for (k, slot) in out.iter_mut().enumerate() {
        let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
        let d = states[b].u.sub(&states[a].u)?;
        let r = l2_norm(&d) / (states[b].t - states[a].t);
        *slot = r * r;
    }
    Ok(out)
}

fn trapezoid_cumulative(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.extend(values.first().map(|_| 0.0));
    for k in 1..values.len() {
        acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
        out.push(acc);
    }
    out
}

impl EnergyReport {
    pub fn from_trajectory(traj: &Trajectory, mob: &MobilitySpec, reg: &RegularizedPotential) -> Result<Self> {
        let spec = reg.base();
        let f = &traj.config.f;
        let eps = traj.config.effective_epsilon();
        let table = EntropyTable::new(mob);
        let times = traj.times();
        let mut energy = Vec::new();
        let mut energy_n_series = Vec::new();
        let mut rates = Vec::new();
        let mut mass = Vec::new();
        let mut entropy = Vec::new();
        let mut h2 = Vec::new();
        for s in &traj.states {
            energy.push(match self::energy(&s.u, spec, f) {
                Ok(e) => e,
                Err(Error::DomainViolation { .. }) => f64::NAN,
                Err(e) => return Err(e),
            });
            energy_n_series.push(energy_n(&s.u, reg, f)?);
            rates.push(dissipation_rate(s, mob)?);
            mass.push(integral(&s.u));
            entropy.push(table.functional(&s.u));
            h2.push(norms(&s.u).h2_discrete);
        }
        let dissipation = trapezoid_cumulative(&times, &rates);
        let visc: Vec<f64> = rate_squares(&traj.states)?.iter().map(|r| eps * r).collect();
        let visc_dissipation = trapezoid_cumulative(&times, &visc);
        let e0 = energy_n_series.first().copied().unwrap_or(0.0);
        let residual_energy_eq = (0..times.len())
            .map(|k| energy_n_series[k] - e0 + dissipation[k] + visc_dissipation[k])
            .collect();
        Ok(Self {
            times,
            energy,
            energy_n: energy_n_series,
            dissipation,
            visc_dissipation,
            mass,
            entropy,
            h2,
            residual_energy_eq,
        })
    }
}

/// Defect of the energy equality
/// `𝓔_n(u(t₂)) - 𝓔_n(u(t₁)) + ∫∫ b(u)|∇w|² + ε ∫ ‖u_t‖² = 0`
/// on `[t₁, t₂]`, with both time integrals by the trapezoid rule over the
/// snapshots.
pub fn energy_equality_residual(
    traj: &Trajectory,
    mob: &MobilitySpec,
    reg: &RegularizedPotential,
    t1: f64,
    t2: f64,
) -> Result<f64> {
    let i1 = traj.index_of(t1)?;
    let i2 = traj.index_of(t2)?;
    if i1 > i2 {
        return Err(Error::invalid(format!("need t1 ≤ t2, got {t1} > {t2}")));
    }
    if i1 == i2 {
        return Ok(0.0);
    }
    let states = &traj.states[i1..=i2];
    let f = &traj.config.f;
    let eps = traj.config.effective_epsilon();
    let times: Vec<f64> = states.iter().map(|s| s.t).collect();
    let rates = states.iter().map(|s| dissipation_rate(s, mob)).collect::<Result<Vec<_>>>()?;
    let diss = *trapezoid_cumulative(&times, &rates).last().unwrap_or(&0.0);
    let visc = if eps > 0.0 {
        let sq: Vec<f64> = rate_squares(states)?.iter().map(|r| eps * r).collect();
        *trapezoid_cumulative(&times, &sq).last().unwrap_or(&0.0)
    } else {
        0.0
    };
    let e1 = energy_n(&states[0].u, reg, f)?;
    let e2 = energy_n(&states[states.len() - 1].u, reg, f)?;
    Ok((e2 - e1 + diss + visc).abs())
}

/// A pair `(κ, C₀)` of the dissipativity estimate
/// `𝓔(u(t)) ≤ 𝓔(u₀) e^{-κt} + C₀`, with its worst slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipativityFit {
    pub kappa: f64,
    pub c0: f64,
    /// `min_t (e0 e^{-κt} + C₀ - 𝓔(t))`, minimized over all fitted series.
    pub margin: f64,
}

impl DissipativityFit {
    pub fn is_valid(&self) -> bool {
        self.margin >= 0.0
    }

    /// Worst slack of this pair on one series.
    pub fn margin_on(&self, times: &[f64], energy: &[f64], e0: f64) -> f64 {
        pair_margin(self.kappa, self.c0, times, energy, e0)
    }
}

/// One energy series with its initial energy.
#[derive(Debug, Clone, Copy)]
pub struct EnergySeries<'a> {
    pub times: &'a [f64],
    pub energy: &'a [f64],
    pub e0: f64,
}

fn pair_margin(kappa: f64, c0: f64, times: &[f64], energy: &[f64], e0: f64) -> f64 {
    times
        .iter()
        .zip(energy)
        .map(|(&t, &e)| if e.is_nan() { f64::NEG_INFINITY } else { e0 * (-kappa * t).exp() + c0 - e })
        .fold(f64::INFINITY, f64::min)
}

/// Decay rates searched: `10^{-3 + k/16}`, `k = 0..=80`, which includes 1.
pub fn kappa_grid() -> Vec<f64> {
    (0..=80).map(|k| 10f64.powf(-3.0 + k as f64 / 16.0)).collect()
}

/// Fit one `(κ, C₀)` to every series, optionally capping `C₀`.
///
/// For each `κ` of [`kappa_grid`] the smallest admissible
/// `C₀(κ) = max_t (𝓔(t) - e0 e^{-κt})` is computed; the chosen pair
/// minimizes the area under the bound over the sampled horizon,
/// `Σ_series e0 (1 - e^{-κT})/κ + C₀ T`. The margin of the result is 0 up
/// to roundoff unless every series is constant.
pub fn dissipativity_fit_ensemble(series: &[EnergySeries<'_>], c0_max: Option<f64>) -> Result<DissipativityFit> {
    if series.is_empty() || series.iter().any(|s| s.times.is_empty() || s.times.len() != s.energy.len()) {
        return Err(Error::invalid("dissipativity fit needs nonempty series of matching length"));
    }
    if series.iter().any(|s| s.energy.iter().any(|e| !e.is_finite()) || !s.e0.is_finite()) {
        return Err(Error::NoValidFit);
    }
    let horizon = series
        .iter()
        .flat_map(|s| s.times.iter())
        .fold(0.0f64, |m, &t| m.max(t))
        .max(f64::MIN_POSITIVE);
    let mut best: Option<(f64, DissipativityFit)> = None;
    for kappa in kappa_grid() {
        let c0 = series
            .iter()
            .map(|s| {
                s.times
                    .iter()
                    .zip(s.energy)
                    .map(|(&t, &e)| e - s.e0 * (-kappa * t).exp())
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if c0_max.is_some_and(|cap| c0 > cap) {
            continue;
        }
        let area: f64 = series
            .iter()
            .map(|s| s.e0 * (-(-kappa * horizon).exp_m1()) / kappa + c0 * horizon)
            .sum();
        let margin_of = |c0: f64| {
            series
                .iter()
                .map(|s| pair_margin(kappa, c0, s.times, s.energy, s.e0))
                .fold(f64::INFINITY, f64::min)
        };
        // the two orders of evaluation can disagree in the last bit
        let mut c0 = c0;
        let mut margin = margin_of(c0);
        while margin < 0.0 {
            c0 -= 2.0 * margin;
            margin = margin_of(c0);
        }
        let fit = DissipativityFit { kappa, c0, margin };
        if best.as_ref().is_none_or(|(a, _)| area < *a) {
            best = Some((area, fit));
        }
    }
    best.map(|(_, fit)| fit).ok_or(Error::NoValidFit)
}

/// Fit `(κ, C₀)` to the energy series of one report.
pub fn dissipativity_fit(report: &EnergyReport, e0: f64) -> Result<DissipativityFit> {
    dissipativity_fit_series(&report.times, &report.energy, e0)
}

pub fn dissipativity_fit_series(times: &[f64], energy: &[f64], e0: f64) -> Result<DissipativityFit> {
    dissipativity_fit_ensemble(&[EnergySeries { times, energy, e0 }], None)
}

/// As [`dissipativity_fit_series`] with `C₀ ≤ c0_max`; `NoValidFit` when no
/// decay rate of the grid admits such a constant.
pub fn dissipativity_fit_bounded(times: &[f64], energy: &[f64], e0: f64, c0_max: f64) -> Result<DissipativityFit> {
    dissipativity_fit_ensemble(&[EnergySeries { times, energy, e0 }], Some(c0_max))
}

/// A maximal time interval on which `d_𝒲(u(t), 0) ≤ C_bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationWindow {
    pub onset: f64,
    pub length: f64,
}

impl RegularizationWindow {
    pub fn end(&self) -> f64 {
        self.onset + self.length
    }
}

/// `d_𝒲(u(t), 0)` at every snapshot.
pub fn dist_w_series(traj: &Trajectory, spec: &PotentialSpec, fallback: Option<&RegularizedPotential>) -> Result<Vec<f64>> {
    traj.states
        .iter()
        .map(|s| dist_w(&s.u, &GridFunction::zeros(*s.u.grid()), spec, fallback))
        .collect()
}

/// Maximal runs of snapshots with `d_𝒲(u(t), 0) ≤ c_bound` lasting at
/// least `window`.
pub fn regularization_window_scan(
    traj: &Trajectory,
    spec: &PotentialSpec,
    c_bound: f64,
    window: f64,
) -> Result<Vec<RegularizationWindow>> {
    let fallback = RegularizedPotential::new(*spec, traj.config.yosida_n)?;
    let d = dist_w_series(traj, spec, Some(&fallback))?;
    Ok(windows_below(&traj.times(), &d, c_bound, window))
}

/// Maximal runs of `values ≤ c_bound` with duration at least `window`.
pub fn windows_below(times: &[f64], values: &[f64], c_bound: f64, window: f64) -> Vec<RegularizationWindow> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let slack = 1e-9 * times.last().map_or(1.0, |t| t.abs().max(1.0));
    let close = |s: usize, e: usize, out: &mut Vec<RegularizationWindow>| {
        let length = times[e] - times[s];
        if length + slack >= window {
            out.push(RegularizationWindow {
                onset: times[s],
                length,
            });
        }
    };
    for (k, &v) in values.iter().enumerate() {
        match (v <= c_bound, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                close(s, k - 1, &mut out);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        close(s, values.len() - 1, &mut out);
    }
    out
}

/// Smallest `τ ∈ [0, tau_max]` with `[T + τ, T + τ + δ]` inside a reported
/// window, if any.
pub fn window_after(windows: &[RegularizationWindow], t: f64, tau_max: f64, delta: f64) -> Option<f64> {
    let slack = 1e-9 * t.abs().max(1.0);
    windows
        .iter()
        .filter_map(|w| {
            let tau = (w.onset - t).max(0.0);
            (tau <= tau_max + slack && t + tau + delta <= w.end() + slack).then_some(tau)
        })
        .min_by(|a, b| a.total_cmp(b))
}
