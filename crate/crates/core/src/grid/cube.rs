use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer cell coordinates. In one dimension the second component is always 0.
pub type Cell = [i64; 2];

/// Half-open axis-aligned box of cells, `lo[i] <= c[i] < hi[i]`.
///
/// One-dimensional boxes use the degenerate range `[0, 1)` on the second axis so
/// indexing is uniform across dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rect {
    pub lo: Cell,
    pub hi: Cell,
}

impl Rect {
    pub fn new(lo: Cell, hi: Cell) -> Self {
        Rect { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        self.hi[0] <= self.lo[0] || self.hi[1] <= self.lo[1]
    }

    pub fn width(&self, axis: usize) -> i64 {
        (self.hi[axis] - self.lo[axis]).max(0)
    }

    pub fn num_cells(&self) -> usize {
        (self.width(0) * self.width(1)) as usize
    }

    pub fn contains(&self, c: Cell) -> bool {
        c[0] >= self.lo[0] && c[0] < self.hi[0] && c[1] >= self.lo[1] && c[1] < self.hi[1]
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.is_empty()
            || (other.lo[0] >= self.lo[0]
                && other.hi[0] <= self.hi[0]
                && other.lo[1] >= self.lo[1]
                && other.hi[1] <= self.hi[1])
    }

    pub fn intersect(&self, other: &Rect) -> Rect {
        Rect {
            lo: [self.lo[0].max(other.lo[0]), self.lo[1].max(other.lo[1])],
            hi: [self.hi[0].min(other.hi[0]), self.hi[1].min(other.hi[1])],
        }
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &Rect) -> Rect {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        Rect {
            lo: [self.lo[0].min(other.lo[0]), self.lo[1].min(other.lo[1])],
            hi: [self.hi[0].max(other.hi[0]), self.hi[1].max(other.hi[1])],
        }
    }

    /// Grows the box by `margin` cells on every side of the first `dim` axes.
    pub fn expand(&self, dim: usize, margin: i64) -> Rect {
        let mut r = *self;
        for axis in 0..dim {
            r.lo[axis] -= margin;
            r.hi[axis] += margin;
        }
        r
    }

    /// Row-major position of `c` (axis 0 fastest). `c` must lie in the box.
    #[inline]
    pub fn index_of(&self, c: Cell) -> usize {
        debug_assert!(self.contains(c), "{c:?} outside {self:?}");
        ((c[1] - self.lo[1]) * self.width(0) + (c[0] - self.lo[0])) as usize
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> Cell {
        let w = self.width(0) as usize;
        [
            self.lo[0] + (index % w) as i64,
            self.lo[1] + (index / w) as i64,
        ]
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let (lo, hi) = (self.lo, self.hi);
        (lo[1]..hi[1]).flat_map(move |y| (lo[0]..hi[0]).map(move |x| [x, y]))
    }
}

/// Axis-aligned, grid-anchored cube with an integer side length in cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "CubeRepr", into = "CubeRepr")]
pub struct Cube {
    dim: u8,
    anchor: Cell,
    side: i64,
}

#[derive(Serialize, Deserialize)]
struct CubeRepr {
    anchor: Vec<i64>,
    side: i64,
}

impl TryFrom<CubeRepr> for Cube {
    type Error = Error;
    fn try_from(r: CubeRepr) -> Result<Self> {
        Cube::new(&r.anchor, r.side)
    }
}

impl From<Cube> for CubeRepr {
    fn from(c: Cube) -> Self {
        CubeRepr {
            anchor: c.anchor[..c.dim()].to_vec(),
            side: c.side,
        }
    }
}

impl Cube {
    /// The dimension is the length of `anchor` (1 or 2).
    pub fn new(anchor: &[i64], side: i64) -> Result<Self> {
        if !(1..=2).contains(&anchor.len()) {
            return Err(Error::param(format!(
                "cube dimension must be 1 or 2, got {}",
                anchor.len()
            )));
        }
        if side < 1 {
            return Err(Error::param(format!("cube side must be >= 1, got {side}")));
        }
        let mut a = [0; 2];
        a[..anchor.len()].copy_from_slice(anchor);
        Ok(Cube {
            dim: anchor.len() as u8,
            anchor: a,
            side,
        })
    }

    /// One-dimensional interval `[anchor, anchor + side)`.
    pub fn interval(anchor: i64, side: i64) -> Self {
        Self::new(&[anchor], side).expect("side must be positive")
    }

    pub fn square(ax: i64, ay: i64, side: i64) -> Self {
        Self::new(&[ax, ay], side).expect("side must be positive")
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn anchor(&self) -> Cell {
        self.anchor
    }

    pub fn side(&self) -> i64 {
        self.side
    }

    pub fn num_cells(&self) -> u64 {
        (self.side as u64).pow(self.dim as u32)
    }

    pub fn rect(&self) -> Rect {
        let mut hi = [self.anchor[0] + self.side, 1];
        if self.dim == 2 {
            hi[1] = self.anchor[1] + self.side;
        }
        Rect { lo: self.anchor, hi }
    }

    pub fn contains_cell(&self, c: Cell) -> bool {
        self.rect().contains(c)
    }

    pub fn contains_cube(&self, other: &Cube) -> bool {
        self.rect().contains_rect(&other.rect())
    }

    /// Concentric cube with `alpha` times the side. `alpha` must be a positive odd integer.
    pub fn dilate(&self, alpha: i64) -> Result<Cube> {
        if alpha < 1 || alpha % 2 == 0 {
            return Err(Error::Alignment(format!(
                "dilation factor must be a positive odd integer, got {alpha}"
            )));
        }
        let shift = (alpha - 1) / 2 * self.side;
        let mut anchor = self.anchor;
        for a in anchor.iter_mut().take(self.dim()) {
            *a -= shift;
        }
        Ok(Cube {
            dim: self.dim,
            anchor,
            side: self.side * alpha,
        })
    }

    /// The `2^dim` congruent halves of an even-sided cube, in row-major order.
    pub fn dyadic_children(&self) -> Result<Vec<Cube>> {
        if self.side == 1 {
            return Err(Error::Leaf(*self));
        }
        if self.side % 2 != 0 {
            return Err(Error::Alignment(format!(
                "cube {self} has odd side and no dyadic children"
            )));
        }
        let h = self.side / 2;
        let [ax, ay] = self.anchor;
        Ok(if self.dim == 1 {
            vec![Cube::interval(ax, h), Cube::interval(ax + h, h)]
        } else {
            vec![
                Cube::square(ax, ay, h),
                Cube::square(ax + h, ay, h),
                Cube::square(ax, ay + h, h),
                Cube::square(ax + h, ay + h, h),
            ]
        })
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> {
        let r = self.rect();
        (r.lo[1]..r.hi[1]).flat_map(move |y| (r.lo[0]..r.hi[0]).map(move |x| [x, y]))
    }

    pub fn is_power_of_two(&self) -> bool {
        (self.side as u64).is_power_of_two()
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [ax, ay] = self.anchor;
        let s = self.side;
        if self.dim == 1 {
            write!(f, "[{ax},{})", ax + s)
        } else {
            write!(f, "[{ax},{})x[{ay},{})", ax + s, ay + s)
        }
    }
}
