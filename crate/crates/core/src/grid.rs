//! Uniform cell-centered grids on `[0, L]` or `[0, L]²` and the functions
//! that live on them.
//!
//! Cells are stored in row-major order: in 2D cell `(i, j)` (column `i`
//! along x, row `j` along y) has index `j * n + i`. All integrals use the
//! midpoint rule, so `⟨v, z⟩ = h^d Σ v_k z_k`.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::mobility::MobilitySpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, extent: f64) -> Result<Self> {
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::invalid(format!("grid extent must be positive, got {extent}")));
        }
        Self::from_spacing(dim, n, extent / n as f64)
    }

    pub fn from_spacing(dim: usize, n: usize, h: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid(format!("only 1D and 2D grids are supported, got dim = {dim}")));
        }
        if n == 0 {
            return Err(Error::invalid("grid needs at least one cell per dimension"));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid(format!("cell width must be positive, got {h}")));
        }
        Ok(Self { dim, n, h })
    }

    pub fn line(n: usize, extent: f64) -> Result<Self> {
        Self::new(1, n, extent)
    }

    pub fn square(n: usize, extent: f64) -> Result<Self> {
        Self::new(2, n, extent)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn extent(&self) -> f64 {
        self.h * self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// `|Ω|`.
    pub fn volume(&self) -> f64 {
        self.extent().powi(self.dim as i32)
    }

    /// Cell center coordinates; the second entry is 0 in 1D.
    pub fn center(&self, k: usize) -> [f64; 2] {
        let (i, j) = if self.dim == 1 {
            (k, 0)
        } else {
            (k % self.n, k / self.n)
        };
        let y = if self.dim == 1 { 0.0 } else { (j as f64 + 0.5) * self.h };
        [(i as f64 + 0.5) * self.h, y]
    }

    pub fn compatible(&self, other: &Grid) -> bool {
        self.dim == other.dim && self.n == other.n && (self.h - other.h).abs() <= 1e-12 * self.h
    }

    /// Visit every interior face once as `(left, right)` cell indices.
    #[inline]
    pub(crate) fn for_each_face(&self, mut f: impl FnMut(usize, usize, usize)) {
        // third argument is the face slot in the face arrays
        let n = self.n;
        let mut slot = 0;
        if self.dim == 1 {
            for k in 0..n.saturating_sub(1) {
                f(k, k + 1, slot);
                slot += 1;
            }
        } else {
            for j in 0..n {
                for i in 0..n - 1 {
                    let k = j * n + i;
                    f(k, k + 1, slot);
                    slot += 1;
                }
            }
            for j in 0..n - 1 {
                for i in 0..n {
                    let k = j * n + i;
                    f(k, k + n, slot);
                    slot += 1;
                }
            }
        }
    }

    pub(crate) fn face_count(&self) -> usize {
        if self.dim == 1 {
            self.n - 1
        } else {
            2 * self.n * (self.n - 1)
        }
    }
}

/// Cell values of a scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "grid has {} cells but {} values were given",
                grid.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("grid function values must be finite, found {bad}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Sample `f` at the cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.center(k))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn try_map(&self, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect::<Result<Vec<_>>>()?;
        Ok(Self { grid: self.grid, values })
    }

    pub(crate) fn ensure_compatible(&self, other: &GridFunction) -> Result<()> {
        if self.grid.compatible(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `self - other`.
    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.ensure_compatible(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.ensure_compatible(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub(crate) fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<usize> for GridFunction {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

impl IndexMut<usize> for GridFunction {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.values[k]
    }
}

/// Cell mobilities `b(u)` together with the derived face mobilities.
///
/// Construction validates `α ≤ b ≤ μ_upper` cell by cell.
#[derive(Debug, Clone)]
pub struct CellMobility {
    cells: GridFunction,
    faces: Vec<f64>,
    alpha: f64,
}

impl CellMobility {
    /// Freeze the mobility at the state `u`.
    pub fn at_state(mob: &MobilitySpec, u: &GridFunction) -> Result<Self> {
        let cells = u.map(|r| mob.b(r));
        Self::from_cells(mob, cells)
    }

    /// Use explicit cell values, checked against the bounds of `mob`.
    pub fn from_cells(mob: &MobilitySpec, cells: GridFunction) -> Result<Self> {
        for &b in cells.values() {
            mob.check(b)?;
        }
        let grid = *cells.grid();
        let mut faces = vec![0.0; grid.face_count()];
        let avg = mob.face_average();
        grid.for_each_face(|a, b, slot| faces[slot] = avg.combine(cells[a], cells[b]));
        Ok(Self {
            cells,
            faces,
            alpha: mob.alpha(),
        })
    }

    pub fn cells(&self) -> &GridFunction {
        &self.cells
    }

    pub fn grid(&self) -> &Grid {
        self.cells.grid()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub(crate) fn faces(&self) -> &[f64] {
        &self.faces
    }
}

/// `out = -div(c ∇v)` with zero-flux boundaries, face coefficients `c`
/// (`None` means unit coefficients).
pub(crate) fn apply_flux_operator(grid: &Grid, faces: Option<&[f64]>, v: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    grid.for_each_face(|a, b, slot| {
        let c = faces.map_or(1.0, |f| f[slot]);
        let flux = c * inv_h2 * (v[a] - v[b]);
        out[a] += flux;
        out[b] -= flux;
    });
}

/// Diagonal of the flux operator, used for Jacobi preconditioning and the
/// Newton Jacobian.
pub(crate) fn flux_operator_diagonal(grid: &Grid, faces: Option<&[f64]>) -> Vec<f64> {
    let mut diag = vec![0.0; grid.len()];
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    grid.for_each_face(|a, b, slot| {
        let c = faces.map_or(1.0, |f| f[slot]) * inv_h2;
        diag[a] += c;
        diag[b] += c;
    });
    diag
}
