//! Discrete elliptic operators and metrics on grid functions.
//!
//! `B` is the negative Laplacian with zero-flux faces, so that
//! `⟨Bv, z⟩ = ∫ ∇v·∇z` and `B` is positive semidefinite. `B_u` is the
//! mobility-weighted variant `-div(b(u)∇·)` in conservative flux form;
//! fluxes telescope, so every output of `B` or `B_u` has zero mean.

use crate::error::{Error, Result};
use crate::grid::{apply_flux_operator, flux_operator_diagonal, CellMobility, GridFunction};
use crate::linalg::{dot, pcg};
use crate::potentials::{PotentialSpec, RegularizedPotential};

/// Relative residual target of the elliptic CG solves.
pub const CG_RELATIVE_TOL: f64 = 1e-11;

/// Cell average `|Ω|⁻¹ ∫ v`.
pub fn mean(v: &GridFunction) -> f64 {
    v.values().iter().sum::<f64>() / v.values().len() as f64
}

/// `∫ v`.
pub fn integral(v: &GridFunction) -> f64 {
    v.values().iter().sum::<f64>() * v.grid().cell_volume()
}

/// Cell inner product `⟨v, z⟩ = h^d Σ v_k z_k`.
pub fn inner(v: &GridFunction, z: &GridFunction) -> Result<f64> {
    v.ensure_compatible(z)?;
    Ok(dot(v.values(), z.values()) * v.grid().cell_volume())
}

/// `v - mean(v)`.
pub fn remove_mean(v: &GridFunction) -> GridFunction {
    let m = mean(v);
    v.map(|x| x - m)
}

/// `B v`.
pub fn laplacian_neumann(v: &GridFunction) -> GridFunction {
    let grid = *v.grid();
    let mut out = vec![0.0; grid.len()];
    apply_flux_operator(&grid, None, v.values(), &mut out);
    GridFunction::from_vec_unchecked(grid, out)
}

/// `B_u w` for frozen cell mobilities.
pub fn div_b_grad(mobility: &CellMobility, w: &GridFunction) -> Result<GridFunction> {
    w.ensure_compatible(mobility.cells())?;
    let grid = *w.grid();
    let mut out = vec![0.0; grid.len()];
    apply_flux_operator(&grid, Some(mobility.faces()), w.values(), &mut out);
    Ok(GridFunction::from_vec_unchecked(grid, out))
}

/// Discrete L² norm.
pub fn l2_norm(v: &GridFunction) -> f64 {
    (dot(v.values(), v.values()) * v.grid().cell_volume()).sqrt()
}

/// `𝒩_u(rhs)`: the mean-zero solution `ζ` of `B_u ζ = rhs`.
///
/// Requires `|mean(rhs)| ≤ tol`; the mean is then projected out exactly.
/// The returned `ζ` satisfies `‖B_u ζ - rhs‖ ≤ tol` (discrete L²) whenever
/// `tol` is above the CG floor of `1e-11 ‖rhs‖`.
pub fn solve_neumann_inverse(mobility: &CellMobility, rhs: &GridFunction, tol: f64) -> Result<GridFunction> {
    rhs.ensure_compatible(mobility.cells())?;
    let m = mean(rhs);
    if !(m.abs() <= tol) {
        return Err(Error::MeanNotZero { mean: m, tol });
    }
    let grid = *rhs.grid();
    let faces = mobility.faces();
    let diag = flux_operator_diagonal(&grid, Some(faces));
    let rhs0 = remove_mean(rhs);
    // CG works with Euclidean norms; convert the discrete L² target
    let scale = grid.cell_volume().sqrt();
    let rhs_norm = l2_norm(&rhs0);
    let target = tol.min(CG_RELATIVE_TOL * rhs_norm).max(1e-14 * rhs_norm) / scale;
    let sol = pcg(
        |x, y| apply_flux_operator(&grid, Some(faces), x, y),
        &diag,
        rhs0.values(),
        target,
        true,
    )?;
    Ok(GridFunction::from_vec_unchecked(grid, sol.x))
}

/// `(I + B/n)⁻¹ v`, the elliptic regularization of initial data.
///
/// The mean is carried over exactly: averaging the equation shows the
/// solution has the mean of `v`, so only the mean-zero part is solved for.
pub fn elliptic_mollify(v: &GridFunction, n: u64) -> Result<GridFunction> {
    if n == 0 {
        return Err(Error::invalid("mollification index must be positive"));
    }
    let grid = *v.grid();
    let inv_n = 1.0 / n as f64;
    let m = mean(v);
    let rhs = remove_mean(v);
    let rhs_norm = dot(rhs.values(), rhs.values()).sqrt();
    let diag: Vec<f64> = flux_operator_diagonal(&grid, None).iter().map(|d| 1.0 + inv_n * d).collect();
    let mut scratch = vec![0.0; grid.len()];
    let sol = pcg(
        |x, y| {
            apply_flux_operator(&grid, None, x, y);
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = xi + inv_n * *yi;
            }
        },
        &diag,
        rhs.values(),
        1e-13 * rhs_norm,
        false,
    )?;
    scratch.copy_from_slice(&sol.x);
    let shift = m - scratch.iter().sum::<f64>() / scratch.len() as f64;
    scratch.iter_mut().for_each(|x| *x += shift);
    Ok(GridFunction::from_vec_unchecked(grid, scratch))
}

/// Cell-quadrature norms of a grid function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    /// `⟨Bv, v⟩^{1/2}`.
    pub h1_semi: f64,
    /// `(‖v‖² + ‖Bv‖²)^{1/2}`.
    pub h2_discrete: f64,
}

impl Norms {
    /// Full H¹ norm `(‖v‖² + ‖∇v‖²)^{1/2}`.
    pub fn h1(&self) -> f64 {
        (self.l2 * self.l2 + self.h1_semi * self.h1_semi).sqrt()
    }
}

pub fn norms(v: &GridFunction) -> Norms {
    let vol = v.grid().cell_volume();
    let bv = laplacian_neumann(v);
    let l1 = v.values().iter().map(|x| x.abs()).sum::<f64>() * vol;
    let l2sq = dot(v.values(), v.values()) * vol;
    let h1sq = (dot(bv.values(), v.values()) * vol).max(0.0);
    let bsq = dot(bv.values(), bv.values()) * vol;
    Norms {
        l1,
        l2: l2sq.sqrt(),
        h1_semi: h1sq.sqrt(),
        h2_discrete: (l2sq + bsq).sqrt(),
    }
}

/// Whether the energy-space metric needs the `‖W(v) - W(z)‖_{L¹}` term:
/// it is redundant under controlled growth with `p ≤ 6`, which covers every
/// nonsingular potential here.
fn needs_potential_term(spec: &PotentialSpec) -> bool {
    !matches!(spec.growth_exponent(), Some(p) if p <= 6.0)
}

/// `d_𝒱(v, z) = ‖v - z‖ + ‖W(v) - W(z)‖_{L¹}`.
pub fn dist_v(v: &GridFunction, z: &GridFunction, spec: &PotentialSpec) -> Result<f64> {
    let diff = v.sub(z)?;
    let mut d = l2_norm(&diff);
    if needs_potential_term(spec) {
        let mut l1 = 0.0;
        for (&a, &b) in v.values().iter().zip(z.values()) {
            l1 += (spec.w(a)? - spec.w(b)?).abs();
        }
        d += l1 * v.grid().cell_volume();
    }
    Ok(d)
}

/// `d_𝒲(v, z) = ‖v - z‖_{H²} + ‖β(v) - β(z)‖`, the β term only for singular
/// potentials. When a value leaves the domain of β, the Yosida approximation
/// `fallback` is used instead if one is given.
pub fn dist_w(
    v: &GridFunction,
    z: &GridFunction,
    spec: &PotentialSpec,
    fallback: Option<&RegularizedPotential>,
) -> Result<f64> {
    let diff = v.sub(z)?;
    let mut d = norms(&diff).h2_discrete;
    if spec.is_singular() {
        let domain = spec.domain();
        let interior = v.values().iter().chain(z.values()).all(|&x| domain.contains(x));
        let beta = |x: f64| -> Result<f64> {
            match (interior, fallback) {
                (true, _) => spec.beta(x),
                (false, Some(reg)) => reg.yosida_beta(x),
                (false, None) => spec.beta(x),
            }
        };
        let mut sq = 0.0;
        for (&a, &b) in v.values().iter().zip(z.values()) {
            let e = beta(a)? - beta(b)?;
            sq += e * e;
        }
        d += (sq * v.grid().cell_volume()).sqrt();
    }
    Ok(d)
}
