use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Cell, Cube, Grid, Rect};
use crate::error::{Error, Result};

/// Complex cell values on a frame of the lattice; reads as 0 outside the frame.
///
/// Input functions live on the grid window. Derived fields (for instance a
/// transform evaluated on cells of a cube that sticks out of the window) may use
/// any frame.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    frame: Rect,
    values: Vec<Complex64>,
}

impl GridFunction {
    /// Values in row-major order over the grid window.
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        Self::on_frame(grid, grid.window_rect(), values)
    }

    pub fn on_frame(grid: Grid, frame: Rect, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != frame.num_cells() {
            return Err(Error::param(format!(
                "expected {} values, got {}",
                frame.num_cells(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Validation(format!(
                "non-finite value at cell {:?}",
                frame.cell_at(i)
            )));
        }
        Ok(GridFunction {
            grid,
            frame,
            values,
        })
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(grid: Grid) -> Self {
        let frame = grid.window_rect();
        GridFunction {
            grid,
            frame,
            values: vec![Complex64::new(0.0, 0.0); frame.num_cells()],
        }
    }

    /// Evaluates `f` at every cell of the window.
    pub fn from_fn(grid: Grid, f: impl Fn(Cell) -> Complex64) -> Result<Self> {
        let frame = grid.window_rect();
        Self::new(grid, frame.cells().map(f).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn frame(&self) -> Rect {
        self.frame
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, c: Cell) -> Complex64 {
        if self.frame.contains(c) {
            self.values[self.frame.index_of(c)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn abs_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn abs_max(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.map(|_, v| v * c)
    }

    pub fn map(&self, f: impl Fn(Cell, Complex64) -> Complex64) -> Self {
        let values = self
            .frame
            .cells()
            .zip(&self.values)
            .map(|(c, &v)| f(c, v))
            .collect();
        GridFunction {
            grid: self.grid,
            frame: self.frame,
            values,
        }
    }

    /// Copy of `self` with every cell outside `keep` set to zero.
    pub fn restricted(&self, keep: &Rect) -> Self {
        self.map(|c, v| if keep.contains(c) { v } else { Complex64::new(0.0, 0.0) })
    }

    /// Bounding box of the nonzero cells, or `None` for the zero function.
    pub fn support_rect(&self) -> Option<Rect> {
        let mut out: Option<Rect> = None;
        for (i, v) in self.values.iter().enumerate() {
            if v.re != 0.0 || v.im != 0.0 {
                let c = self.frame.cell_at(i);
                let r = Rect::new(c, [c[0] + 1, c[1] + 1]);
                out = Some(match out {
                    Some(o) => o.hull(&r),
                    None => r,
                });
            }
        }
        out
    }

    pub fn to_record(&self) -> GridFunctionRecord {
        GridFunctionRecord {
            grid: self.grid,
            re: self.values.iter().map(|v| v.re).collect(),
            im: if self.is_real() {
                None
            } else {
                Some(self.values.iter().map(|v| v.im).collect())
            },
        }
    }
}

/// File form of a window function: real parts and optional imaginary parts in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFunctionRecord {
    pub grid: Grid,
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

impl TryFrom<GridFunctionRecord> for GridFunction {
    type Error = Error;
    fn try_from(r: GridFunctionRecord) -> Result<Self> {
        let values = match r.im {
            None => r.re.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            Some(im) => {
                if im.len() != r.re.len() {
                    return Err(Error::Parse("`re` and `im` lengths differ".into()));
                }
                r.re.iter()
                    .zip(&im)
                    .map(|(&a, &b)| Complex64::new(a, b))
                    .collect()
            }
        };
        GridFunction::new(r.grid, values)
    }
}

/// Set of lattice cells stored as a mask over a frame.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSet {
    grid: Grid,
    frame: Rect,
    mask: Vec<bool>,
}

impl CellSet {
    pub fn empty(grid: Grid, frame: Rect) -> Self {
        CellSet {
            grid,
            frame,
            mask: vec![false; frame.num_cells()],
        }
    }

    pub fn full(grid: Grid, frame: Rect) -> Self {
        CellSet {
            grid,
            frame,
            mask: vec![true; frame.num_cells()],
        }
    }

    pub fn window(grid: Grid) -> Self {
        Self::full(grid, grid.window_rect())
    }

    pub fn cube(grid: Grid, q: &Cube) -> Self {
        Self::full(grid, q.rect())
    }

    pub fn from_mask(grid: Grid, frame: Rect, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != frame.num_cells() {
            return Err(Error::param(format!(
                "mask has {} entries for a frame of {} cells",
                mask.len(),
                frame.num_cells()
            )));
        }
        Ok(CellSet { grid, frame, mask })
    }

    pub fn from_predicate(grid: Grid, frame: Rect, pred: impl Fn(Cell) -> bool) -> Self {
        CellSet {
            grid,
            frame,
            mask: frame.cells().map(pred).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn frame(&self) -> Rect {
        self.frame
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn contains(&self, c: Cell) -> bool {
        self.frame.contains(c) && self.mask[self.frame.index_of(c)]
    }

    /// Adds or removes a cell; cells outside the frame cannot be represented.
    pub fn set(&mut self, c: Cell, member: bool) -> Result<()> {
        if !self.frame.contains(c) {
            return Err(Error::param(format!("cell {c:?} outside frame {:?}", self.frame)));
        }
        let i = self.frame.index_of(c);
        self.mask[i] = member;
        Ok(())
    }

    /// Removes every cell of `r` that lies in the frame.
    pub fn remove_rect(&mut self, r: &Rect) {
        let clip = r.intersect(&self.frame);
        if clip.is_empty() {
            return;
        }
        for c in clip.cells() {
            let i = self.frame.index_of(c);
            self.mask[i] = false;
        }
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    /// `count * h^dim`.
    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.cell_measure()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.frame
            .cells()
            .zip(&self.mask)
            .filter_map(|(c, &m)| m.then_some(c))
    }

    pub fn is_subset_of(&self, other: &CellSet) -> bool {
        self.cells().all(|c| other.contains(c))
    }

    /// Number of members inside `r`.
    pub fn count_in(&self, r: &Rect) -> usize {
        let clip = r.intersect(&self.frame);
        if clip.is_empty() {
            return 0;
        }
        clip.cells()
            .filter(|&c| self.mask[self.frame.index_of(c)])
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize) -> Grid {
        Grid::new(1, n, n as f64).unwrap()
    }

    #[test]
    fn function_reads_zero_outside() {
        let g = grid1(4);
        let f = GridFunction::from_real(g, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(f.value([2, 0]).re, 3.0);
        assert_eq!(f.value([-1, 0]).re, 0.0);
        assert_eq!(f.value([4, 0]).re, 0.0);
        assert!(f.is_real());
        assert_eq!(f.support_rect(), Some(Rect::new([0, 0], [4, 1])));
        assert!(GridFunction::zeros(g).support_rect().is_none());
    }

    #[test]
    fn rejects_non_finite() {
        let g = grid1(2);
        assert!(GridFunction::from_real(g, &[1.0, f64::NAN]).is_err());
        assert!(GridFunction::from_real(g, &[1.0]).is_err());
    }

    #[test]
    fn cellset_measure_and_subset() {
        let g = Grid::new(2, 8, 2.0).unwrap();
        let q = Cube::square(0, 0, 4);
        let mut a = CellSet::empty(g, q.rect());
        a.set([1, 1], true).unwrap();
        a.set([2, 3], true).unwrap();
        assert!(a.set([5, 0], true).is_err());
        assert_eq!(a.count(), 2);
        assert_eq!(a.measure(), 2.0 * 0.0625);
        let full = CellSet::cube(g, &q);
        assert!(a.is_subset_of(&full));
        assert!(!full.is_subset_of(&a));
        assert_eq!(full.count_in(&Cube::square(2, 2, 4).rect()), 4);
    }

    #[test]
    fn record_roundtrip_complex() {
        let g = grid1(2);
        let f = GridFunction::new(g, vec![Complex64::new(1.0, -1.0), Complex64::new(0.5, 0.0)])
            .unwrap();
        let rec = f.to_record();
        let json = serde_json::to_string(&rec).unwrap();
        let back: GridFunctionRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(GridFunction::try_from(back).unwrap(), f);
    }
}
