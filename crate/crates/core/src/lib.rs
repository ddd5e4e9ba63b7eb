//! Pointwise sparse domination of singular integral operators on uniform grids.
//!
//! The crate discretizes functions as cell values on a grid of `N^n` cells
//! (`n = 1, 2`), applies kernel operators by direct quadrature with the diagonal
//! cell skipped, and builds sparse families through the stopping-time construction
//! driven by the sharp truncated maximal operator. Independent checkers in
//! [`verify`] audit every output.

pub mod error;
pub mod grid;
pub mod maximal;
pub mod operators;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Cell, CellSet, Cube, Grid, GridFunction, Rect};
pub use maximal::CubeSweepPolicy;
pub use operators::{Kernel, KernelSpec};
pub use sparse::{PipelineConfig, SparseFamily, ThresholdMode};
