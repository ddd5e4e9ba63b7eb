//! Discrete geometry and integration: uniform grids, grid-anchored cubes,
//! cell functions and sets, cube integrals and power/Orlicz averages.
//!
//! Functions are piecewise constant on cells and read as zero outside their
//! frame, so every integral is a finite sum of `value * cell_measure`.

mod cube;
mod field;
mod integrate;
mod orlicz;

pub use cube::{Cell, Cube, Rect};
pub use field::{CellSet, GridFunction, GridFunctionRecord};
pub use integrate::{abs_pow, avg_p, cube_integral, SummedArea};
pub(crate) use integrate::root as integrate_root;
pub use orlicz::{orlicz_avg, validate_young, FnYoung, LogYoung, PowerYoung, YoungFunction};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of `cells_per_side^dim` cells covering `[0, phys_side)^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct Grid {
    dim: usize,
    cells_per_side: usize,
    phys_side: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRepr {
    dim: usize,
    cells_per_side: usize,
    #[serde(default = "default_phys_side")]
    phys_side: f64,
}

fn default_phys_side() -> f64 {
    1.0
}

impl TryFrom<GridRepr> for Grid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        Grid::new(r.dim, r.cells_per_side, r.phys_side)
    }
}

impl From<Grid> for GridRepr {
    fn from(g: Grid) -> Self {
        GridRepr {
            dim: g.dim,
            cells_per_side: g.cells_per_side,
            phys_side: g.phys_side,
        }
    }
}

impl Grid {
    pub fn new(dim: usize, cells_per_side: usize, phys_side: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::param(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if !cells_per_side.is_power_of_two() {
            return Err(Error::param(format!(
                "cells per side must be a power of 2, got {cells_per_side}"
            )));
        }
        if !(phys_side.is_finite() && phys_side > 0.0) {
            return Err(Error::param(format!(
                "physical side must be positive, got {phys_side}"
            )));
        }
        Ok(Grid {
            dim,
            cells_per_side,
            phys_side,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    pub fn phys_side(&self) -> f64 {
        self.phys_side
    }

    pub fn cell_width(&self) -> f64 {
        self.phys_side / self.cells_per_side as f64
    }

    /// `h^dim`.
    pub fn cell_measure(&self) -> f64 {
        self.cell_width().powi(self.dim as i32)
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_side.pow(self.dim as u32)
    }

    /// The cube `[0, N)^dim` holding every stored value.
    pub fn window(&self) -> Cube {
        let n = self.cells_per_side as i64;
        if self.dim == 1 {
            Cube::interval(0, n)
        } else {
            Cube::square(0, 0, n)
        }
    }

    pub fn window_rect(&self) -> Rect {
        self.window().rect()
    }

    /// Physical coordinates of a cell center; the unused axis reads 0 in one dimension.
    #[inline]
    pub fn center(&self, c: Cell) -> [f64; 2] {
        let h = self.cell_width();
        let y = if self.dim == 2 { (c[1] as f64 + 0.5) * h } else { 0.0 };
        [(c[0] as f64 + 0.5) * h, y]
    }

    pub fn measure(&self, q: &Cube) -> f64 {
        q.num_cells() as f64 * self.cell_measure()
    }

    /// Builds a cube of this grid's dimension, reading only the needed anchor components.
    pub fn cube(&self, anchor: Cell, side: i64) -> Result<Cube> {
        Cube::new(&anchor[..self.dim], side)
    }

    pub(crate) fn check_cube(&self, q: &Cube) -> Result<()> {
        if q.dim() != self.dim {
            return Err(Error::param(format!(
                "cube {q} has dimension {} on a {}-dimensional grid",
                q.dim(),
                self.dim
            )));
        }
        Ok(())
    }
}
