//! Entropy functional `∫ μ̂(u)` with
//!
//! ```text
//! μ(s) = ∫₀ˢ dr / b(r),      μ̂(s) = ∫₀ˢ μ(r) dr = ∫₀ˢ (s - t) / b(t) dt,
//! ```
//!
//! and the check of its dissipative estimate along trajectories.

use std::collections::HashMap;
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::mobility::MobilitySpec;
use crate::ops::norms;
use crate::potentials::{PotentialKind, PotentialSpec};
use crate::timestepper::Trajectory;

const QUAD_TOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 40;
/// Spacing of the memoized breakpoints.
const LATTICE: f64 = 0.5;

fn simpson(g: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (g(a) + 4.0 * g(0.5 * (a + b)) + g(b))
}

fn adaptive(g: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = simpson(g, a, m);
    let right = simpson(g, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(g, a, m, left, 0.5 * tol, depth - 1) + adaptive(g, m, b, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `g` over `[a, b]` (oriented).
pub fn integrate(g: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let whole = simpson(&g, a, b);
    adaptive(&g, a, b, whole, tol, MAX_DEPTH)
}

/// Memoized evaluation of `μ` and `μ̂` for one mobility law.
///
/// Values at the breakpoints `kΔ` are built outward from 0 and cached; a
/// query at `s` integrates only over the short gap to its nearest
/// breakpoint. The cache is behind a lock so one table can be shared by
/// parallel workers.
#[derive(Debug)]
pub struct EntropyTable {
    mob: MobilitySpec,
    nodes: RwLock<HashMap<i64, (f64, f64)>>,
}

impl Clone for EntropyTable {
    fn clone(&self) -> Self {
        let nodes = self.nodes.read().expect("entropy cache poisoned").clone();
        Self {
            mob: self.mob.clone(),
            nodes: RwLock::new(nodes),
        }
    }
}

impl EntropyTable {
    pub fn new(mob: &MobilitySpec) -> Self {
        let mut nodes = HashMap::new();
        nodes.insert(0, (0.0, 0.0));
        Self {
            mob: mob.clone(),
            nodes: RwLock::new(nodes),
        }
    }

    pub fn mobility(&self) -> &MobilitySpec {
        &self.mob
    }

    /// `(μ(s_k), μ̂(s_k))` at breakpoint `k`.
    fn node(&self, k: i64) -> (f64, f64) {
        if let Some(&v) = self.nodes.read().expect("entropy cache poisoned").get(&k) {
            return v;
        }
        let mut nodes = self.nodes.write().expect("entropy cache poisoned");
        let step = k.signum();
        // walk outward from the closest cached breakpoint
        let mut j = k;
        while !nodes.contains_key(&j) {
            j -= step;
        }
        let mut cur = nodes[&j];
        while j != k {
            let next = j + step;
            cur = self.advance(j as f64 * LATTICE, cur, next as f64 * LATTICE);
            nodes.insert(next, cur);
            j = next;
        }
        cur
    }

    /// Carry `(μ, μ̂)` from `a` to `s`.
    fn advance(&self, a: f64, (mu_a, hat_a): (f64, f64), s: f64) -> (f64, f64) {
        let b = |t: f64| self.mob.b(t);
        let mu = mu_a + integrate(|t| 1.0 / b(t), a, s, QUAD_TOL);
        let hat = hat_a + mu_a * (s - a) + integrate(|t| (s - t) / b(t), a, s, QUAD_TOL);
        (mu, hat)
    }

    fn eval(&self, s: f64) -> (f64, f64) {
        let k = (s / LATTICE).round() as i64;
        self.advance(k as f64 * LATTICE, self.node(k), s)
    }

    /// `μ(s) = ∫₀ˢ dr / b(r)`.
    pub fn mu(&self, s: f64) -> f64 {
        self.eval(s).0
    }

    /// `μ̂(s) = ∫₀ˢ μ(r) dr`.
    pub fn mu_hat(&self, s: f64) -> f64 {
        if self.mob.is_constant() {
            return 0.5 * s * s / self.mob.b(0.0);
        }
        self.eval(s).1
    }

    /// `∫_Ω μ̂(u)`.
    pub fn functional(&self, u: &GridFunction) -> f64 {
        u.values().iter().map(|&s| self.mu_hat(s)).sum::<f64>() * u.grid().cell_volume()
    }
}

/// `∫_Ω μ̂(u)` with a fresh table.
pub fn entropy_functional(u: &GridFunction, mob: &MobilitySpec) -> f64 {
    EntropyTable::new(mob).functional(u)
}

/// Outcome of the entropy dissipation check.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyCheck {
    /// Intervals whose left side exceeds `c6`.
    pub violations: usize,
    /// Largest left side over all intervals.
    pub worst: f64,
    /// Smallest constant of the search grid that bounds every interval.
    pub c6: f64,
    /// Left side per snapshot interval.
    pub lhs: Vec<f64>,
}

/// Growth constant `η` of `W''(r) ≥ η|r|^{p-2} - λ`, with the exponent `p`.
fn growth_constants(spec: &PotentialSpec) -> Result<(f64, f64)> {
    let (p, eta) = match spec.kind() {
        // W'' = 3r² - 1 exactly
        PotentialKind::DoubleWell => (4.0, 3.0),
        PotentialKind::Polynomial { p, eta, .. } => (p, eta),
        PotentialKind::Logarithmic { .. } => {
            return Err(Error::WrongPotentialClass {
                reason: "the logarithmic potential is singular".into(),
            })
        }
    };
    if !(p > 2.0 && p < 6.0) {
        return Err(Error::WrongPotentialClass {
            reason: format!("p = {p}"),
        });
    }
    Ok((p, eta))
}

/// Discrete `∫ |u|^{p-2} |∇u|²` with face averages of the weight.
fn weighted_gradient(u: &GridFunction, p: f64) -> f64 {
    let g = u.grid();
    let inv_h2 = 1.0 / (g.h() * g.h());
    let v = u.values();
    let mut s = 0.0;
    g.for_each_face(|a, b, _| {
        let weight = 0.5 * (v[a].abs().powf(p - 2.0) + v[b].abs().powf(p - 2.0));
        let d = v[a] - v[b];
        s += weight * d * d * inv_h2;
    });
    s * g.cell_volume()
}

/// Left side `2 d/dt ∫μ̂(u) + ½‖u‖²_{H²} + η∫|u|^{p-2}|∇u|²` per snapshot
/// interval, with the time derivative as a difference quotient and the
/// other terms at the right end.
pub fn entropy_lhs(traj: &Trajectory, table: &EntropyTable, spec: &PotentialSpec) -> Result<Vec<f64>> {
    let (p, eta) = growth_constants(spec)?;
    let states = &traj.states;
    let mut s_prev = states.first().map(|s| table.functional(&s.u));
    let mut out = Vec::with_capacity(states.len().saturating_sub(1));
    for pair in states.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let s_next = table.functional(&b.u);
        let h2 = norms(&b.u).h2_discrete;
        let lhs = 2.0 * (s_next - s_prev.unwrap_or(0.0)) / (b.t - a.t)
            + 0.5 * h2 * h2
            + eta * weighted_gradient(&b.u, p);
        out.push(lhs);
        s_prev = Some(s_next);
    }
    Ok(out)
}

/// Smallest `2^{k/4}` (k ≥ -80) bounding every value, or the largest grid
/// value when none does.
pub fn smallest_grid_bound(values: &[f64]) -> f64 {
    const K_MIN: i32 = -80;
    const K_MAX: i32 = 240;
    let worst = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let grid = |k: i32| 2f64.powf(k as f64 / 4.0);
    if values.iter().any(|x| x.is_nan()) || worst == f64::INFINITY {
        return grid(K_MAX);
    }
    (K_MIN..=K_MAX).map(grid).find(|&c| c >= worst).unwrap_or(grid(K_MAX))
}

/// Search one constant `c6` bounding the left side on every interval of
/// every trajectory, and count violations against it.
pub fn entropy_dissipation_check_ensemble(
    trajs: &[&Trajectory],
    mob: &MobilitySpec,
    spec: &PotentialSpec,
) -> Result<EntropyCheck> {
    let table = EntropyTable::new(mob);
    let mut lhs = Vec::new();
    for traj in trajs {
        lhs.extend(entropy_lhs(traj, &table, spec)?);
    }
    Ok(check_against(lhs, smallest_grid_bound))
}

fn check_against(lhs: Vec<f64>, pick: impl Fn(&[f64]) -> f64) -> EntropyCheck {
    let c6 = pick(&lhs);
    let violations = lhs.iter().filter(|&&x| !(x <= c6)).count();
    let worst = lhs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    EntropyCheck {
        violations,
        worst,
        c6,
        lhs,
    }
}

/// Single-trajectory form of [`entropy_dissipation_check_ensemble`].
pub fn entropy_dissipation_check(traj: &Trajectory, mob: &MobilitySpec, spec: &PotentialSpec) -> Result<EntropyCheck> {
    entropy_dissipation_check_ensemble(&[traj], mob, spec)
}

/// Count intervals of `traj` above a previously fitted `c6`.
pub fn entropy_violations(traj: &Trajectory, mob: &MobilitySpec, spec: &PotentialSpec, c6: f64) -> Result<EntropyCheck> {
    let lhs = entropy_lhs(traj, &EntropyTable::new(mob), spec)?;
    Ok(check_against(lhs, |_| c6))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::potentials::RegularizedPotential;
    use crate::timestepper::{run, SimConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn simpson_is_accurate() {
        let v = integrate(|t| t.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
        assert_eq!(integrate(|t| t, 1.0, 1.0, 1e-12), 0.0);
        assert!((integrate(|t| t * t, 1.0, 0.0, 1e-12) + 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn unit_mobility_gives_half_square() {
        let grid = Grid::line(10, 1.0).unwrap();
        let u = GridFunction::constant(grid, 2.0);
        let one = MobilitySpec::constant(1.0).unwrap();
        assert!((entropy_functional(&u, &one) - 2.0).abs() < 1e-14);
        assert_eq!(entropy_functional(&GridFunction::zeros(grid), &MobilitySpec::two_plus_sine()), 0.0);
        // non-constant law with b ≡ 1 exercises the quadrature path
        let custom = MobilitySpec::custom(|_| 1.0, 1.0, 1.0, 0.0).unwrap();
        let t = EntropyTable::new(&custom);
        for s in [-3.3, -0.2, 0.7, 4.9] {
            assert!((t.mu_hat(s) - 0.5 * s * s).abs() < 1e-12);
            assert!((t.mu(s) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn bracket_at_one_for_sine_mobility() {
        let t = EntropyTable::new(&MobilitySpec::two_plus_sine());
        let v = t.mu_hat(1.0);
        assert!(v > 1.0 / 6.0 && v < 0.5, "{v}");
    }

    #[test]
    fn matches_independent_closed_form() {
        // b = 2 + sin r: μ(s) has the closed form (2/√3)(atan((2 tan(s/2) + 1)/√3) - π/6) on |s| < π
        let t = EntropyTable::new(&MobilitySpec::two_plus_sine());
        let sq3 = 3f64.sqrt();
        let mu = |s: f64| 2.0 / sq3 * (((2.0 * (s / 2.0).tan() + 1.0) / sq3).atan() - std::f64::consts::PI / 6.0);
        for s in [-2.5, -1.0, -0.3, 0.4, 1.7, 3.0] {
            assert!((t.mu(s) - mu(s)).abs() < 1e-9, "s = {s}");
        }
        // μ̂' = μ checked by central differences
        for s in [-2.0, 0.5, 2.5] {
            let d = (t.mu_hat(s + 1e-4) - t.mu_hat(s - 1e-4)) / 2e-4;
            assert!((d - mu(s)).abs() < 1e-7);
        }
    }

    #[test]
    fn cache_is_order_independent() {
        let mob = MobilitySpec::sine(1.5, 0.5, 3.0).unwrap();
        let a = EntropyTable::new(&mob);
        let b = EntropyTable::new(&mob);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<f64> = (0..200).map(|_| rng.random_range(-6.0..6.0)).collect();
        let forward: Vec<f64> = samples.iter().map(|&s| a.mu_hat(s)).collect();
        for (i, &s) in samples.iter().enumerate().rev() {
            assert!((b.mu_hat(s) - forward[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_wrong_potential_classes() {
        let grid = Grid::line(4, 1.0).unwrap();
        let reg = RegularizedPotential::new(PotentialSpec::double_well(), 100).unwrap();
        let mut cfg = SimConfig::new(grid, 0.1, 0.2);
        cfg.yosida_n = 100;
        let traj = run(&GridFunction::zeros(grid), &cfg, &MobilitySpec::two_plus_sine(), &reg).unwrap();
        let mob = MobilitySpec::two_plus_sine();
        let log = PotentialSpec::logarithmic(1.0).unwrap();
        assert!(matches!(
            entropy_dissipation_check(&traj, &mob, &log),
            Err(Error::WrongPotentialClass { .. })
        ));
        let p6 = PotentialSpec::polynomial(6.0, 1.0, 1.0, 1.0).unwrap();
        assert!(entropy_dissipation_check(&traj, &mob, &p6).is_err());
    }

    #[test]
    fn zero_and_constant_trajectories() {
        let grid = Grid::line(16, 2.0).unwrap();
        let one = MobilitySpec::constant(1.0).unwrap();
        let p4 = PotentialSpec::polynomial(4.0, 3.0, 3.0, 1.0).unwrap();
        let reg = RegularizedPotential::new(p4, 1000).unwrap();
        let mut cfg = SimConfig::new(grid, 0.05, 1.0);
        cfg.yosida_n = 1000;
        let zero = run(&GridFunction::zeros(grid), &cfg, &one, &reg).unwrap();
        let check = entropy_dissipation_check(&zero, &one, &p4).unwrap();
        assert_eq!(check.violations, 0);
        assert_eq!(check.worst, 0.0);
        assert!(check.c6 >= 0.0);

        let c = run(&GridFunction::constant(grid, 0.4), &cfg, &one, &reg).unwrap();
        let check = entropy_dissipation_check(&c, &one, &p4).unwrap();
        assert_eq!(check.violations, 0);
        // only the L² part of the H² norm survives: ½ · 0.16 · |Ω|
        for &x in &check.lhs {
            assert!((x - 0.16).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_bound_is_tight() {
        let c = smallest_grid_bound(&[0.3, 1.9, 1.0]);
        assert!(c >= 1.9 && c < 1.9 * 2f64.powf(0.25));
        assert_eq!(smallest_grid_bound(&[f64::NAN]), 2f64.powi(60));
    }
}
