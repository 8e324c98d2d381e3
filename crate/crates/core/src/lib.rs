//! Cahn–Hilliard dynamics with nonconstant mobility on uniform 1D and 2D
//! grids.
//!
//! The crate is organised bottom-up:
//!
//! * [`potentials`]: configuration potentials `W` and their Yosida
//!   regularizations `W_n`;
//! * [`mobility`] and [`grid`]: mobility laws and cell-centered grid
//!   functions;
//! * [`ops`]: the Neumann operators `B` and `B_u`, the mobility-weighted
//!   inverse, the elliptic mollifier, norms and metrics;
//! * [`timestepper`]: the energy-stable scheme;
//! * [`diagnostics`]: energies, the energy equality, dissipativity,
//!   entropy and regularization windows;
//! * [`attractor`]: ensembles and compactness statistics;
//! * [`snapshot`]: the plain-text snapshot format.
//!
//! ```
//! use mobch::prelude::*;
//!
//! let grid = Grid::line(64, 2.0 * std::f64::consts::PI)?;
//! let reg = RegularizedPotential::new(PotentialSpec::double_well(), 10_000)?;
//! let mob = MobilitySpec::two_plus_sine();
//! let cfg = SimConfig::new(grid, 1e-2, 1.0);
//! let raw = GridFunction::from_fn(grid, |[x, _]| 0.1 * (x / 2.0).cos());
//! let u0 = prepare_initial(&raw, &cfg, &reg)?;
//! let traj = run(&u0, &cfg, &mob, &reg)?;
//! assert_eq!(traj.states.len(), 101);
//! # Ok::<(), mobch::Error>(())
//! ```

// `!(x > 0.0)` checks are meant to reject NaN too; index loops mirror the stencils
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod attractor;
pub mod diagnostics;
pub mod error;
pub mod grid;
mod linalg;
pub mod mobility;
pub mod ops;
pub mod potentials;
pub mod snapshot;
pub mod timestepper;

pub use error::{Error, Result};

// the guide's code blocks run as doctests
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/potentials.md")]
    mod potentials {}
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/timestepping.md")]
    mod timestepping {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/attractor.md")]
    mod attractor {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

/// The types most programs need.
pub mod prelude {
    pub use crate::attractor::{
        compactness_probe, generate_ensemble, run_ensemble, steady_state_residual, CompactnessReport, EnsembleConfig,
        Metric,
    };
    pub use crate::diagnostics::{
        dissipativity_fit, energy, energy_equality_residual, energy_n, entropy_dissipation_check, entropy_functional,
        regularization_window_scan, DissipativityFit, EnergyReport,
    };
    pub use crate::error::{Error, Result};
    pub use crate::grid::{CellMobility, Grid, GridFunction};
    pub use crate::mobility::{FaceAverage, MobilitySpec};
    pub use crate::ops::{dist_v, dist_w, elliptic_mollify, mean, norms, solve_neumann_inverse};
    pub use crate::potentials::{PotentialKind, PotentialSpec, RegularizedPotential};
    pub use crate::timestepper::{prepare_initial, run, step, SimConfig, StepState, Trajectory};
}
