//! Finite-resolution model of the dyadic Carleson operator: tiles, the mass
//! and Calderón-Zygmund decompositions, function-space norms near `L^1`, and
//! numerical checks of the associated inequalities.

pub mod cz;
pub mod dyadic;
pub mod error;
pub mod forest;
pub mod grid;
pub mod harness;
pub mod kernel;
pub mod mass;
pub mod spaces;
pub mod tile;
pub mod verify;

pub use cz::{cz_decompose, level_exponents, tree_projection, CzDecomposition};
pub use dyadic::{dilate_dyadic, dilate_set, DyadicInterval, TorusSet};
pub use error::{Error, Result};
pub use grid::{
    decreasing_rearrangement, distribution_function, dyadic_maximal, lp_norm, stopping_intervals,
    weak_quasinorm, DyadicAverages, GridFunction,
};
pub use kernel::{
    apply_scale, apply_tile, apply_tileset, apply_tileset_adjoint, eta_profile, psi,
    truncated_kernel, CarlesonModel, KernelConfig, ScaleBank,
};
pub use forest::{forest_decompose, is_bmo_forest, is_linf_forest, is_tree, BmoForest, LinfForest, Tree};
pub use harness::{run_pipeline, FSpec, NSpec, RunConfig};
pub use mass::{mass_decompose, MassConfig, MassDecomposition};
pub use num_complex::Complex64;
pub use spaces::{orlicz_norm, qa_upper, soria_norms, space_report, PhiProfile, QaStrategy};
pub use tile::{
    bmo_c_norm, build_tile_family, counting_function, decay_factor, density, e_count, e_set,
    mass, tile_dilate, tile_leq, tile_lt, ECounts, LinearizingFunction, Tile, TileLattice,
    TileSet,
};
pub use verify::{Analysis, CheckRecord, PassConstants, VerificationReport};
