//! Numerical checks of the decomposition properties and operator bounds.

mod analysis;
mod checks;
mod constants;
mod record;
mod stats;

pub use analysis::{Analysis, PieceLabel, TreeEval};
pub use checks::*;
pub use constants::PassConstants;
pub use record::{ratio, real, Bound, CheckRecord, Context, ReportMeta, Summary, VerificationReport};
pub use stats::{ls_slope, mann_kendall, normal_critical, MannKendall};
