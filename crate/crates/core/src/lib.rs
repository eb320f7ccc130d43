//! Rough-path toolkit: truncated tensor algebra, signature lifts, rough-path
//! metrics, Gaussian sampling and rough differential equation solvers.

pub mod algebra;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod io;
pub mod metrics;
pub mod path;
pub mod rde;

pub use algebra::{GroupElement, Level, Shape, TruncatedTensor};
pub use error::{Error, Result};
pub use experiments::{Driver, RateStudyResult, StudyConfig};
pub use gaussian::RngSpec;
pub use metrics::{Good2Terms, MetricReport, PairSet, Reference};
pub use path::{LiftedPath, PiecewiseLinearPath};
pub use rde::{solve_ode, solve_rde_level2, RDESolution, VectorFieldSet};
