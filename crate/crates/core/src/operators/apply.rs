use num_complex::Complex64;
use rayon::prelude::*;

use super::Kernel;
use crate::error::{Error, Result};
use crate::grid::{Cell, CellSet, Grid, GridFunction, Rect};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Linear phases `x -> ξ·x`; one frequency vector per member.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulationFamily {
    frequencies: Vec<[f64; 2]>,
}

impl ModulationFamily {
    pub fn new(frequencies: Vec<[f64; 2]>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::param("modulation family must be non-empty"));
        }
        if frequencies.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::param("modulation frequencies must be finite"));
        }
        Ok(ModulationFamily { frequencies })
    }

    pub fn frequencies(&self) -> &[[f64; 2]] {
        &self.frequencies
    }
}

fn nonzero_sources(f: &GridFunction, source: &CellSet) -> Vec<(Cell, [f64; 2], Complex64)> {
    let grid = f.grid();
    source
        .cells()
        .filter_map(|c| {
            let v = f.value(c);
            (v != ZERO).then(|| (c, grid.center(c), v))
        })
        .collect()
}

/// `T(f χ_source)` at the cells of `targets`, zero elsewhere on the target frame.
pub fn apply_restricted(
    kernel: &Kernel,
    f: &GridFunction,
    targets: &CellSet,
    source: &CellSet,
) -> Result<GridFunction> {
    let grid = *f.grid();
    kernel.check_dim(grid.dim())?;
    let sources = nonzero_sources(f, source);
    let h_n = grid.cell_measure();
    let frame = targets.frame();
    let values = (0..frame.num_cells())
        .into_par_iter()
        .map(|i| {
            let x = frame.cell_at(i);
            if !targets.contains(x) {
                return Ok(ZERO);
            }
            let xc = grid.center(x);
            let mut acc = ZERO;
            for &(y, yc, v) in &sources {
                if y == x {
                    continue;
                }
                let k = kernel.eval(xc, yc);
                if !k.is_finite() {
                    return Err(Error::Numeric {
                        kernel: kernel.name().to_string(),
                        x,
                        y,
                    });
                }
                acc += v * k;
            }
            Ok(acc * h_n)
        })
        .collect::<Result<Vec<_>>>()?;
    GridFunction::on_frame(grid, frame, values)
}

/// `sup_ξ |T(e^{2πi ξ·x} f χ_source)|` at the target cells.
pub fn maximally_modulated(
    kernel: &Kernel,
    family: &ModulationFamily,
    f: &GridFunction,
    targets: &CellSet,
    source: &CellSet,
) -> Result<GridFunction> {
    let grid = *f.grid();
    let mut best = vec![0.0f64; targets.frame().num_cells()];
    for xi in family.frequencies() {
        let g = modulate(f, xi);
        let tg = apply_restricted(kernel, &g, targets, source)?;
        for (b, v) in best.iter_mut().zip(tg.values()) {
            *b = b.max(v.norm());
        }
    }
    GridFunction::on_frame(
        grid,
        targets.frame(),
        best.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
    )
}

/// `e^{2πi ξ·x_c} f(x)`.
pub fn modulate(f: &GridFunction, xi: &[f64; 2]) -> GridFunction {
    let grid = *f.grid();
    f.map(|c, v| {
        let x = grid.center(c);
        let phase = 2.0 * std::f64::consts::PI * (xi[0] * x[0] + xi[1] * x[1]);
        v * Complex64::from_polar(1.0, phase)
    })
}

/// Default storage budget of a [`TransformTable`], in `f64` slots (128 MiB).
pub const DEFAULT_TABLE_BUDGET: usize = 1 << 24;

enum Rows {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// Box sums `Σ_{y in B, y != z} K(z_c, y_c) f(y) h^n` in O(1) per query.
///
/// For every target `z` of a precomputed box the table keeps a summed-area table
/// over the frame of `f`; other targets fall back to a direct sum.
pub struct TransformTable {
    grid: Grid,
    kernel: Kernel,
    f: GridFunction,
    zbox: Rect,
    rows: Rows,
    row_stride: usize,
    row_len: usize,
}

impl TransformTable {
    /// Precomputes rows for the largest box `zbox.expand(m)` (m ≤ `margin`) that fits `budget`.
    pub fn build(
        kernel: &Kernel,
        f: &GridFunction,
        core: Rect,
        margin: i64,
        budget: usize,
    ) -> Result<Self> {
        let grid = *f.grid();
        kernel.check_dim(grid.dim())?;
        let frame = f.frame();
        let real = f.is_real();
        let row_stride = frame.width(0) as usize + 1;
        let row_len = row_stride * (frame.width(1) as usize + 1);
        let slots = if real { row_len } else { 2 * row_len };
        let rows_allowed = budget / slots.max(1);

        let mut zbox = Rect::new(core.lo, core.lo);
        let mut lo = 0i64;
        let mut hi = margin.max(0);
        if core.num_cells() <= rows_allowed {
            while lo < hi {
                let mid = (lo + hi + 1) / 2;
                if core.expand(grid.dim(), mid).num_cells() <= rows_allowed {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            zbox = core.expand(grid.dim(), lo);
        }

        let h_n = grid.cell_measure();
        let fill = |z: Cell, y: Cell| -> Result<Complex64> {
            let v = f.value(y);
            if y == z || v == ZERO {
                return Ok(ZERO);
            }
            let k = kernel.eval(grid.center(z), grid.center(y));
            if !k.is_finite() {
                return Err(Error::Numeric {
                    kernel: kernel.name().to_string(),
                    x: z,
                    y,
                });
            }
            Ok(v * (k * h_n))
        };
        let w = frame.width(0) as usize;
        let h = frame.width(1) as usize;
        let rows = if real {
            let mut table = vec![0.0f64; zbox.num_cells() * row_len];
            table
                .par_chunks_mut(row_len.max(1))
                .enumerate()
                .take(zbox.num_cells())
                .try_for_each(|(zi, row)| -> Result<()> {
                    let z = zbox.cell_at(zi);
                    for j in 0..h {
                        let mut acc = 0.0;
                        for i in 0..w {
                            acc += fill(z, [frame.lo[0] + i as i64, frame.lo[1] + j as i64])?.re;
                            row[(j + 1) * row_stride + i + 1] = row[j * row_stride + i + 1] + acc;
                        }
                    }
                    Ok(())
                })?;
            Rows::Real(table)
        } else {
            let mut table = vec![ZERO; zbox.num_cells() * row_len];
            table
                .par_chunks_mut(row_len.max(1))
                .enumerate()
                .take(zbox.num_cells())
                .try_for_each(|(zi, row)| -> Result<()> {
                    let z = zbox.cell_at(zi);
                    for j in 0..h {
                        let mut acc = ZERO;
                        for i in 0..w {
                            acc += fill(z, [frame.lo[0] + i as i64, frame.lo[1] + j as i64])?;
                            row[(j + 1) * row_stride + i + 1] = row[j * row_stride + i + 1] + acc;
                        }
                    }
                    Ok(())
                })?;
            Rows::Complex(table)
        };
        Ok(TransformTable {
            grid,
            kernel: kernel.clone(),
            f: f.clone(),
            zbox,
            rows,
            row_stride,
            row_len,
        })
    }

    pub fn is_real(&self) -> bool {
        matches!(self.rows, Rows::Real(_))
    }

    /// Targets answered from precomputed rows.
    pub fn precomputed(&self) -> Rect {
        self.zbox
    }

    #[inline]
    fn corners(&self, b: &Rect) -> Option<[usize; 4]> {
        let frame = self.f.frame();
        let c = b.intersect(&frame);
        if c.is_empty() {
            return None;
        }
        let x0 = (c.lo[0] - frame.lo[0]) as usize;
        let x1 = (c.hi[0] - frame.lo[0]) as usize;
        let y0 = (c.lo[1] - frame.lo[1]) as usize;
        let y1 = (c.hi[1] - frame.lo[1]) as usize;
        let s = self.row_stride;
        Some([y1 * s + x1, y0 * s + x1, y1 * s + x0, y0 * s + x0])
    }

    fn direct(&self, z: Cell, b: &Rect) -> Complex64 {
        let c = b.intersect(&self.f.frame());
        if c.is_empty() {
            return ZERO;
        }
        let zc = self.grid.center(z);
        let mut acc = ZERO;
        for y in c.cells() {
            let v = self.f.value(y);
            if y != z && v != ZERO {
                acc += v * self.kernel.eval(zc, self.grid.center(y));
            }
        }
        acc * self.grid.cell_measure()
    }

    /// `T(f χ_b)(z)`.
    #[inline]
    pub fn box_sum(&self, z: Cell, b: &Rect) -> Complex64 {
        match &self.rows {
            Rows::Real(_) => Complex64::new(self.box_sum_re(z, b), 0.0),
            Rows::Complex(t) => {
                if !self.zbox.contains(z) {
                    return self.direct(z, b);
                }
                let Some([a, bb, c, d]) = self.corners(b) else {
                    return ZERO;
                };
                let o = self.zbox.index_of(z) * self.row_len;
                t[o + a] - t[o + bb] - t[o + c] + t[o + d]
            }
        }
    }

    /// Real part of [`box_sum`](Self::box_sum); exact when `f` is real.
    #[inline]
    pub fn box_sum_re(&self, z: Cell, b: &Rect) -> f64 {
        match &self.rows {
            Rows::Real(t) => {
                if !self.zbox.contains(z) {
                    return self.direct(z, b).re;
                }
                let Some([a, bb, c, d]) = self.corners(b) else {
                    return 0.0;
                };
                let o = self.zbox.index_of(z) * self.row_len;
                t[o + a] - t[o + bb] - t[o + c] + t[o + d]
            }
            Rows::Complex(_) => self.box_sum(z, b).re,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cube;

    fn line(n: usize) -> Grid {
        Grid::new(1, n, n as f64).unwrap()
    }

    #[test]
    fn single_term_quadrature() {
        let g = line(8);
        let mut v = vec![0.0; 8];
        v[0] = 1.0;
        let f = GridFunction::from_real(g, &v).unwrap();
        let all = CellSet::window(g);
        let tf = apply_restricted(&Kernel::hilbert(), &f, &all, &all).unwrap();
        assert_eq!(tf.value([3, 0]).re, 1.0 / 3.0);
        assert_eq!(tf.value([0, 0]).re, 0.0);
        let none = CellSet::empty(g, g.window_rect());
        let z = apply_restricted(&Kernel::hilbert(), &f, &all, &none).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn numeric_error_names_pair() {
        let g = line(4);
        let f = GridFunction::from_real(g, &[1.0; 4]).unwrap();
        let all = CellSet::window(g);
        let bad = Kernel::new("bad", Some(1), |x, _| if x[0] > 2.0 { f64::NAN } else { 1.0 });
        match apply_restricted(&bad, &f, &all, &all) {
            Err(Error::Numeric { x, .. }) => assert!(x[0] >= 2),
            other => panic!("{other:?}"),
        }
        let wrong = Kernel::riesz2d();
        assert!(matches!(apply_restricted(&wrong, &f, &all, &all), Err(Error::Parameter(_))));
    }

    #[test]
    fn table_matches_direct_application() {
        let g = line(16);
        let f = GridFunction::from_fn(g, |c| Complex64::new(((c[0] * 7) % 5) as f64 - 2.0, 0.0))
            .unwrap();
        let k = Kernel::hilbert();
        let core = g.window_rect();
        for budget in [DEFAULT_TABLE_BUDGET, 0] {
            let t = TransformTable::build(&k, &f, core, 6, budget).unwrap();
            for b in [Cube::interval(2, 5), Cube::interval(-3, 30), Cube::interval(12, 2)] {
                let src = CellSet::cube(g, &b);
                let targets = CellSet::full(g, core.expand(1, 8));
                let tf = apply_restricted(&k, &f, &targets, &src).unwrap();
                for z in targets.cells() {
                    let got = t.box_sum(z, &b.rect());
                    assert!((got - tf.value(z)).norm() < 1e-12, "{z:?} {got} {}", tf.value(z));
                }
            }
        }
    }

    #[test]
    fn complex_table_matches_direct_application() {
        let g = Grid::new(2, 4, 1.0).unwrap();
        let f = GridFunction::from_fn(g, |c| Complex64::new(c[0] as f64, 1.0 - c[1] as f64))
            .unwrap();
        let k = Kernel::riesz2d();
        let t = TransformTable::build(&k, &f, g.window_rect(), 2, DEFAULT_TABLE_BUDGET).unwrap();
        assert!(!t.is_real());
        let b = Cube::square(1, 0, 2);
        let targets = CellSet::full(g, g.window_rect().expand(2, 3));
        let tf = apply_restricted(&k, &f, &targets, &CellSet::cube(g, &b)).unwrap();
        for z in targets.cells() {
            assert!((t.box_sum(z, &b.rect()) - tf.value(z)).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_frequency_is_plain_transform() {
        let g = line(8);
        let f = GridFunction::from_real(g, &[1.0, -2.0, 0.5, 0.0, 3.0, 1.0, 0.0, 2.0]).unwrap();
        let all = CellSet::window(g);
        let k = Kernel::hilbert();
        let fam = ModulationFamily::new(vec![[0.0, 0.0]]).unwrap();
        let m = maximally_modulated(&k, &fam, &f, &all, &all).unwrap();
        let tf = apply_restricted(&k, &f, &all, &all).unwrap();
        for (a, b) in m.values().iter().zip(tf.values()) {
            assert!((a.re - b.norm()).abs() < 1e-15 && a.im == 0.0);
        }
        assert!(ModulationFamily::new(vec![]).is_err());
    }
}
