//! Ensembles of trajectories from a bounded set of initial data, with
//! empirical probes of point dissipativity and asymptotic compactness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{CellMobility, GridFunction};
use crate::mobility::MobilitySpec;
use crate::ops::{dist_v, div_b_grad, inner, l2_norm, remove_mean};
use crate::potentials::{PotentialSpec, RegularizedPotential};
use crate::timestepper::{prepare_initial, run, SimConfig, StepState, Trajectory};

/// Distance used to compare ensemble states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    /// Energy-space metric `d_𝒱`.
    #[default]
    EnergySpace,
    /// Plain L² distance.
    L2,
}

impl Metric {
    pub fn distance(self, a: &GridFunction, b: &GridFunction, spec: &PotentialSpec) -> Result<f64> {
        match self {
            Metric::EnergySpace => dist_v(a, b, spec),
            Metric::L2 => Ok(l2_norm(&a.sub(b)?)),
        }
    }
}

/// Default radius ladder as fractions of the diameter at the first sample time.
pub const RHO_FRACTIONS: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub count: usize,
    /// Bound `R` on `d_𝒱(u₀, 0)`.
    pub radius: f64,
    /// Bound `m` on `|mean(u₀)|`.
    pub mean_band: f64,
    pub seed: u64,
    pub sample_times: Vec<f64>,
    /// Number of cosine modes per direction in the random fields.
    pub modes: usize,
    pub metric: Metric,
    pub base: SimConfig,
}

impl EnsembleConfig {
    pub fn new(base: SimConfig, count: usize, radius: f64, mean_band: f64, seed: u64, sample_times: Vec<f64>) -> Self {
        Self {
            count,
            radius,
            mean_band,
            seed,
            sample_times,
            modes: 8,
            metric: Metric::EnergySpace,
            base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("ensemble needs at least one member"));
        }
        if self.modes == 0 {
            return Err(Error::invalid("ensemble fields need at least one mode"));
        }
        if !(self.mean_band >= 0.0) || self.mean_band > self.base.m {
            return Err(Error::invalid(format!(
                "mean band {} must lie in [0, m = {}]",
                self.mean_band, self.base.m
            )));
        }
        if self.sample_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("sample times must be strictly increasing"));
        }
        Ok(())
    }
}

/// Random band-limited mean-zero field with unit L² norm.
fn random_shape(grid: &crate::grid::Grid, modes: usize, rng: &mut ChaCha8Rng) -> GridFunction {
    let l = grid.extent();
    let mut coeffs = Vec::new();
    if grid.dim() == 1 {
        for k in 1..=modes {
            let a: f64 = rng.sample(StandardNormal);
            coeffs.push((k, 0, a / k as f64));
        }
    } else {
        for k in 0..=modes {
            for j in 0..=modes {
                if k + j == 0 {
                    continue;
                }
                let a: f64 = rng.sample(StandardNormal);
                coeffs.push((k, j, a / (k + j) as f64));
            }
        }
    }
    let field = GridFunction::from_fn(*grid, |[x, y]| {
        coeffs
            .iter()
            .map(|&(k, j, a)| {
                a * (k as f64 * std::f64::consts::PI * x / l).cos() * (j as f64 * std::f64::consts::PI * y / l).cos()
            })
            .sum()
    });
    let field = remove_mean(&field);
    let norm = l2_norm(&field);
    if norm > 0.0 {
        field.map(|v| v / norm)
    } else {
        field
    }
}

/// Member `index` of the ensemble; stream `index` of the seeded generator.
pub fn ensemble_member(cfg: &EnsembleConfig, spec: &PotentialSpec, index: usize) -> Result<GridFunction> {
    if !(cfg.radius > 0.0) {
        return Err(Error::RadiusInfeasible { radius: cfg.radius });
    }
    let grid = *cfg.base.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let mean = if cfg.mean_band > 0.0 {
        rng.random_range(-cfg.mean_band..=cfg.mean_band)
    } else {
        0.0
    };
    let shape = random_shape(&grid, cfg.modes, &mut rng);
    let target = cfg.radius * rng.random_range(0.5..=1.0);
    // largest admissible amplitude keeps values strictly inside a singular domain
    let amp_max = if spec.is_singular() {
        0.98 * (1.0 - mean.abs()) / shape.max_abs().max(f64::MIN_POSITIVE)
    } else {
        10.0 * cfg.radius
    };
    let zero = GridFunction::zeros(grid);
    // a mean that alone overshoots the target is pulled toward 0 first
    let mut mean = mean;
    let constant = |m: f64| dist_v(&GridFunction::constant(grid, m), &zero, spec);
    if constant(mean)? > target {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if constant(mid * mean)? <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        mean *= lo;
    }
    let field = |s: f64| shape.map(|v| mean + s * amp_max * v);
    let dist = |s: f64| dist_v(&field(s), &zero, spec);
    // bisect on the fluctuation amplitude; s = 0 always satisfies the bound
    let (mut lo, mut hi) = (0.0, 1.0);
    if dist(hi)? <= target {
        lo = hi;
    } else {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if dist(mid)? <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    Ok(field(lo))
}

/// Deterministic ensemble of `cfg.count` initial data with
/// `|mean| ≤ mean_band` and `d_𝒱(u₀, 0) ≤ radius`.
pub fn generate_ensemble(cfg: &EnsembleConfig, spec: &PotentialSpec) -> Result<Vec<GridFunction>> {
    cfg.validate()?;
    (0..cfg.count).map(|i| ensemble_member(cfg, spec, i)).collect()
}

/// Mollify and run every member in parallel. Errors name the failing member.
pub fn run_ensemble(
    cfg: &EnsembleConfig,
    inits: &[GridFunction],
    mob: &MobilitySpec,
    reg: &RegularizedPotential,
) -> Result<Vec<Trajectory>> {
    inits
        .par_iter()
        .enumerate()
        .map(|(index, u0)| {
            prepare_initial(u0, &cfg.base, reg)
                .and_then(|u| run(&u, &cfg.base, mob, reg))
                .map_err(|e| Error::EnsembleMember {
                    index,
                    seed: cfg.seed,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// `⟨B_u w, w⟩^{1/2}`, zero exactly at equilibria.
pub fn steady_state_residual(state: &StepState, mob: &MobilitySpec) -> Result<f64> {
    let cm = CellMobility::at_state(mob, &state.u)?;
    Ok(inner(&div_b_grad(&cm, &state.w)?, &state.w)?.max(0.0).sqrt())
}

/// Statistics of the ensemble at one sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactnessRow {
    pub t: f64,
    pub diameter: f64,
    /// `(ρ, N(ρ))` along the radius ladder.
    pub covering: Vec<(f64, usize)>,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompactnessReport {
    pub rows: Vec<CompactnessRow>,
}

impl CompactnessReport {
    /// The diameter at the last sample time does not exceed the first one.
    pub fn compactness_evidence(&self) -> bool {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.diameter <= a.diameter,
            _ => false,
        }
    }

    /// Covering numbers at the ladder entry closest to `rho`.
    pub fn covering_at(&self, rho: f64) -> Vec<usize> {
        self.rows
            .iter()
            .map(|r| {
                r.covering
                    .iter()
                    .min_by(|a, b| (a.0 - rho).abs().total_cmp(&(b.0 - rho).abs()))
                    .map_or(0, |c| c.1)
            })
            .collect()
    }
}

/// Greedy ε-net size: points are taken in order and each new center covers
/// everything within `rho`.
fn greedy_cover(dist: &[Vec<f64>], order: &[usize], rho: f64) -> usize {
    let n = order.len();
    let mut covered = vec![false; n];
    let mut centers = 0;
    for &i in order {
        if covered[i] {
            continue;
        }
        centers += 1;
        for j in 0..n {
            if dist[i][j] <= rho {
                covered[j] = true;
            }
        }
    }
    centers
}

/// Covering numbers on a radius ladder, nonincreasing in `ρ`.
///
/// Each count is the best greedy net over all cyclic rotations of the
/// point order; a running minimum over larger radii keeps the ladder
/// monotone (a net for a small radius is also one for a larger radius).
pub fn covering_numbers(dist: &[Vec<f64>], rhos: &[f64]) -> Vec<(f64, usize)> {
    let n = dist.len();
    let mut sorted: Vec<f64> = rhos.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut counts: Vec<(f64, usize)> = sorted
        .iter()
        .map(|&rho| {
            let best = (0..n.max(1))
                .map(|shift| {
                    let order: Vec<usize> = (0..n).map(|k| (k + shift) % n.max(1)).collect();
                    greedy_cover(dist, &order, rho)
                })
                .min()
                .unwrap_or(0);
            (rho, best)
        })
        .collect();
    for k in 1..counts.len() {
        counts[k].1 = counts[k].1.min(counts[k - 1].1);
    }
    // report in the order requested
    rhos.iter()
        .map(|&rho| *counts.iter().find(|c| c.0 == rho).expect("every radius was counted"))
        .collect()
}

fn pairwise(states: &[&GridFunction], metric: Metric, spec: &PotentialSpec) -> Result<Vec<Vec<f64>>> {
    let n = states.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = metric.distance(states[i], states[j], spec)?;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    Ok(d)
}

/// Diameters, covering numbers and steady-state residuals of the ensemble
/// at every sample time. The radius ladder is [`RHO_FRACTIONS`] times the
/// diameter at the first sample time.
pub fn compactness_probe(
    trajs: &[Trajectory],
    cfg: &EnsembleConfig,
    spec: &PotentialSpec,
    mob: &MobilitySpec,
) -> Result<CompactnessReport> {
    let mut indices = Vec::with_capacity(trajs.len());
    for (k, traj) in trajs.iter().enumerate() {
        let idx = cfg
            .sample_times
            .iter()
            .map(|&t| traj.index_of(t))
            .collect::<Result<Vec<_>>>()
            .map_err(|_| Error::MismatchedSampling {
                reason: format!("member {k} lacks a snapshot at one of {:?}", cfg.sample_times),
            })?;
        indices.push(idx);
    }
    let mut rows = Vec::with_capacity(cfg.sample_times.len());
    let mut ladder: Option<Vec<f64>> = None;
    for (s, &t) in cfg.sample_times.iter().enumerate() {
        let states: Vec<&StepState> = trajs.iter().zip(&indices).map(|(tr, idx)| &tr.states[idx[s]]).collect();
        let us: Vec<&GridFunction> = states.iter().map(|st| &st.u).collect();
        let dist = pairwise(&us, cfg.metric, spec)?;
        let diameter = dist.iter().flatten().fold(0.0f64, |m, &d| m.max(d));
        let rhos = ladder
            .get_or_insert_with(|| RHO_FRACTIONS.iter().map(|f| f * diameter).collect())
            .clone();
        let covering = covering_numbers(&dist, &rhos);
        let max_residual = states
            .iter()
            .map(|st| steady_state_residual(st, mob))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0f64, f64::max);
        rows.push(CompactnessRow {
            t,
            diameter,
            covering,
            max_residual,
        });
    }
    Ok(CompactnessReport { rows })
}
