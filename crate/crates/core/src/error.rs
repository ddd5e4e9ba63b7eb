use thiserror::Error;

use crate::grid::{Cell, Cube};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Dilation factor or cube geometry that cannot stay grid-anchored.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// Attempt to split a single-cell cube.
    #[error("cube {0} is a single cell and has no dyadic children")]
    Leaf(Cube),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("validation failed: {0}")]
    Validation(String),

    /// Kernel produced a non-finite value for a pair of cells.
    #[error("kernel `{kernel}` is not finite at x={x:?}, y={y:?}")]
    Numeric { kernel: String, x: Cell, y: Cell },

    /// The stopping time was started on a cube whose density already exceeds the height.
    #[error("density of the exceptional set in {cube} is {density}, above the stopping height {lambda}")]
    Density {
        cube: Cube,
        density: f64,
        lambda: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
