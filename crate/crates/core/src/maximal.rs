//! Maximal operators realized as sweeps over grid-anchored cubes: the
//! Hardy–Littlewood maximal function `M_r`, the grand maximal truncated operator
//! `M_T` and the sharp truncated operator `M^#_{T,α}`.
//!
//! "Sup over cubes containing x" runs over cubes with sides `1..=max_side` whose
//! anchors are multiples of `anchor_stride` (side-1 cubes are always swept). For each
//! side the per-anchor values are pushed to cells with a separable sliding-window max.

use std::collections::VecDeque;
use std::ops::RangeInclusive;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, Cube, Grid, GridFunction, Rect, SummedArea};
use crate::operators::{Kernel, TransformTable, DEFAULT_TABLE_BUDGET};

/// The finite family of cubes standing in for "all cubes containing x".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CubeSweepPolicy {
    /// Largest swept side in cells; `None` means the grid size `N`.
    pub max_side: Option<i64>,
    pub anchor_stride: i64,
    /// Whether cubes sticking out of the window are swept.
    pub include_outside: bool,
}

impl Default for CubeSweepPolicy {
    fn default() -> Self {
        CubeSweepPolicy {
            max_side: None,
            anchor_stride: 1,
            include_outside: true,
        }
    }
}

impl CubeSweepPolicy {
    pub fn validate(&self) -> Result<()> {
        if matches!(self.max_side, Some(m) if m < 1) {
            return Err(Error::param("sweep max_side must be at least 1"));
        }
        if self.anchor_stride < 1 {
            return Err(Error::param("sweep anchor_stride must be at least 1"));
        }
        Ok(())
    }

    pub fn max_side_for(&self, grid: &Grid) -> i64 {
        self.max_side.unwrap_or(grid.cells_per_side() as i64)
    }

    /// Every grid-anchored cube up to the side limit is swept.
    pub fn is_complete(&self) -> bool {
        self.anchor_stride == 1 && self.include_outside
    }

    fn sweeps(&self, dim: usize, window: &Rect, anchor: Cell, side: i64) -> bool {
        if side > 1 && (0..dim).any(|ax| anchor[ax].rem_euclid(self.anchor_stride) != 0) {
            return false;
        }
        self.include_outside || window.contains_rect(&cube_rect(dim, anchor, side))
    }
}

#[inline]
pub(crate) fn cube_rect(dim: usize, anchor: Cell, side: i64) -> Rect {
    if dim == 1 {
        Rect::new([anchor[0], 0], [anchor[0] + side, 1])
    } else {
        Rect::new(anchor, [anchor[0] + side, anchor[1] + side])
    }
}

/// `alpha * Q` for the cube with the given anchor and side.
#[inline]
pub(crate) fn dilated_rect(dim: usize, anchor: Cell, side: i64, alpha: i64) -> Rect {
    let shift = (alpha - 1) / 2 * side;
    let mut a = anchor;
    for v in a.iter_mut().take(dim) {
        *v -= shift;
    }
    cube_rect(dim, a, alpha * side)
}

fn sliding_max(input: &[f64], w: usize, out: &mut Vec<f64>) {
    out.clear();
    let mut dq: VecDeque<usize> = VecDeque::with_capacity(w);
    for (i, &v) in input.iter().enumerate() {
        while dq.back().is_some_and(|&j| input[j] <= v) {
            dq.pop_back();
        }
        dq.push_back(i);
        if dq[0] + w <= i {
            dq.pop_front();
        }
        if i + 1 >= w {
            out.push(input[dq[0]]);
        }
    }
}

/// `out(x) = max over swept cubes Q' ∋ x with side in `sides` of `value(Q')`, for x in `target`.
///
/// Values must be nonnegative; cubes outside the policy count as 0.
pub(crate) fn sweep_max<F>(
    dim: usize,
    target: Rect,
    window: Rect,
    policy: &CubeSweepPolicy,
    sides: RangeInclusive<i64>,
    value: F,
) -> Vec<f64>
where
    F: Fn(Cell, i64) -> f64 + Sync,
{
    let n = target.num_cells();
    if n == 0 || sides.is_empty() {
        return vec![0.0; n];
    }
    let w0 = target.width(0) as usize;
    let w1 = target.width(1) as usize;
    sides
        .into_par_iter()
        .fold(
            || vec![0.0f64; n],
            |mut acc, t| {
                let mut lo = target.lo;
                for v in lo.iter_mut().take(dim) {
                    *v -= t - 1;
                }
                let anchors = Rect::new(lo, target.hi);
                let a0 = anchors.width(0) as usize;
                let vals: Vec<f64> = anchors
                    .cells()
                    .map(|a| if policy.sweeps(dim, &window, a, t) { value(a, t) } else { 0.0 })
                    .collect();
                let tw = t as usize;
                let mut rowmax = Vec::with_capacity(w0 * anchors.width(1) as usize);
                let mut buf = Vec::with_capacity(w0);
                for row in vals.chunks(a0) {
                    sliding_max(row, tw, &mut buf);
                    rowmax.extend_from_slice(&buf);
                }
                if dim == 1 {
                    for (a, v) in acc.iter_mut().zip(&rowmax) {
                        *a = a.max(*v);
                    }
                } else {
                    let a1 = anchors.width(1) as usize;
                    let mut col = Vec::with_capacity(a1);
                    for i in 0..w0 {
                        col.clear();
                        col.extend((0..a1).map(|j| rowmax[j * w0 + i]));
                        sliding_max(&col, tw, &mut buf);
                        for j in 0..w1 {
                            let a = &mut acc[j * w0 + i];
                            *a = a.max(buf[j]);
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0.0f64; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x = x.max(y);
                }
                a
            },
        )
}

/// Diameter `max |z_i - z_j|` of a finite point set, via its convex hull.
pub fn complex_diameter(points: &[Complex64]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let mut p: Vec<(f64, f64)> = points.iter().map(|z| (z.re, z.im)).collect();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    p.dedup();
    if p.len() < 3 {
        let (a, b) = (p[0], p[p.len() - 1]);
        return (a.0 - b.0).hypot(a.1 - b.1);
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * p.len());
    for pass in [true, false] {
        let floor = hull.len() + 1;
        let pts: Box<dyn Iterator<Item = &(f64, f64)>> =
            if pass { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in pts {
            while hull.len() > floor && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    let mut best = 0.0f64;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            best = best.max((hull[i].0 - hull[j].0).hypot(hull[i].1 - hull[j].1));
        }
    }
    best
}

/// Smallest swept side beyond which `alpha * Q' ⊇ support` for every `Q'` meeting `target`.
pub(crate) fn truncation_side(dim: usize, target: &Rect, support: &Rect, alpha: i64) -> i64 {
    let mut d = 0;
    for ax in 0..dim {
        d = d.max(target.hi[ax] - 1 - support.lo[ax]);
        d = d.max(support.hi[ax] - 1 - target.lo[ax]);
    }
    2 * d.max(0) / (alpha - 1) + 1
}

/// Restricted-function context shared by the sweeps below: `g = f χ_support`.
pub(crate) struct Restricted<'a> {
    pub table: &'a TransformTable,
    pub support: Rect,
    pub dim: usize,
    pub window: Rect,
}

impl Restricted<'_> {
    #[inline]
    fn off(&self, z: Cell, near: &Rect) -> Complex64 {
        self.table.box_sum(z, &self.support) - self.table.box_sum(z, &self.support.intersect(near))
    }

    #[inline]
    fn off_re(&self, z: Cell, near: &Rect) -> f64 {
        self.table.box_sum_re(z, &self.support)
            - self.table.box_sum_re(z, &self.support.intersect(near))
    }

    /// `T g` on `target`.
    pub fn transform(&self, target: &Rect) -> Vec<Complex64> {
        target.cells().map(|z| self.table.box_sum(z, &self.support)).collect()
    }

    fn cube_oscillation(&self, anchor: Cell, side: i64, alpha: i64) -> f64 {
        let near = dilated_rect(self.dim, anchor, side, alpha);
        if near.contains_rect(&self.support) || side == 1 {
            return 0.0;
        }
        let q = cube_rect(self.dim, anchor, side);
        if self.table.is_real() {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for z in q.cells() {
                let v = self.off_re(z, &near);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            hi - lo
        } else {
            let pts: Vec<Complex64> = q.cells().map(|z| self.off(z, &near)).collect();
            complex_diameter(&pts)
        }
    }

    fn cube_sup(&self, anchor: Cell, side: i64) -> f64 {
        let near = dilated_rect(self.dim, anchor, side, 3);
        if near.contains_rect(&self.support) {
            return 0.0;
        }
        let q = cube_rect(self.dim, anchor, side);
        if self.table.is_real() {
            q.cells().map(|z| self.off_re(z, &near).abs()).fold(0.0, f64::max)
        } else {
            q.cells().map(|z| self.off(z, &near).norm()).fold(0.0, f64::max)
        }
    }

    /// `M^#_{T,α} g` on `target`.
    pub fn sharp(&self, target: Rect, alpha: i64, policy: &CubeSweepPolicy, max_side: i64) -> Vec<f64> {
        let t_cap = max_side.min(truncation_side(self.dim, &target, &self.support, alpha));
        sweep_max(self.dim, target, self.window, policy, 2..=t_cap, |a, t| {
            self.cube_oscillation(a, t, alpha)
        })
    }

    /// `M_T g` on `target`.
    pub fn grand(&self, target: Rect, policy: &CubeSweepPolicy, max_side: i64) -> Vec<f64> {
        let t_cap = max_side.min(truncation_side(self.dim, &target, &self.support, 3));
        sweep_max(self.dim, target, self.window, policy, 1..=t_cap, |a, t| self.cube_sup(a, t))
    }
}

/// `M_s (f χ_clip)` on `target` from a summed-area table of `|f|^s`.
pub(crate) fn maximal_restricted(
    power: &SummedArea<f64>,
    s: f64,
    clip: Rect,
    dim: usize,
    target: Rect,
    window: Rect,
    policy: &CubeSweepPolicy,
    max_side: i64,
) -> Vec<f64> {
    let mut out = sweep_max(dim, target, window, policy, 1..=max_side, |a, t| {
        let q = cube_rect(dim, a, t);
        power.sum(&q.intersect(&clip)).max(0.0) / q.num_cells() as f64
    });
    for v in &mut out {
        *v = crate::grid::integrate_root(*v, s);
    }
    out
}

fn real_function(grid: Grid, frame: Rect, values: Vec<f64>) -> Result<GridFunction> {
    GridFunction::on_frame(
        grid,
        frame,
        values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
    )
}

fn check_alpha(alpha: i64) -> Result<()> {
    if alpha < 3 {
        return Err(Error::param(format!("dilation must be an odd integer at least 3, got {alpha}")));
    }
    if alpha % 2 == 0 {
        return Err(Error::Alignment(format!("dilation factor {alpha} is even")));
    }
    Ok(())
}

/// `M_r f(x) = max over swept Q ∋ x of ⟨f⟩_{r,Q}` on the window.
pub fn hl_maximal(f: &GridFunction, r: f64, policy: &CubeSweepPolicy) -> Result<GridFunction> {
    policy.validate()?;
    if !(r >= 1.0) {
        return Err(Error::param(format!("maximal exponent must be at least 1, got {r}")));
    }
    let grid = *f.grid();
    let window = grid.window_rect();
    let power = SummedArea::of_power(f, r);
    let out = maximal_restricted(
        &power,
        r,
        f.frame(),
        grid.dim(),
        window,
        window,
        policy,
        policy.max_side_for(&grid),
    );
    real_function(grid, window, out)
}

fn restricted_sweep(
    kernel: &Kernel,
    f: &GridFunction,
    alpha: i64,
    policy: &CubeSweepPolicy,
    run: impl FnOnce(&Restricted, Rect, i64) -> Vec<f64>,
) -> Result<GridFunction> {
    policy.validate()?;
    let grid = *f.grid();
    kernel.check_dim(grid.dim())?;
    let window = grid.window_rect();
    let Some(support) = f.support_rect() else {
        return Ok(GridFunction::zeros(grid));
    };
    let max_side = policy.max_side_for(&grid);
    let t_cap = max_side.min(truncation_side(grid.dim(), &window, &support, alpha));
    let margin = if policy.include_outside { t_cap - 1 } else { 0 };
    let table = TransformTable::build(kernel, f, window, margin, DEFAULT_TABLE_BUDGET)?;
    let ctx = Restricted {
        table: &table,
        support,
        dim: grid.dim(),
        window,
    };
    real_function(grid, window, run(&ctx, window, max_side))
}

/// `M^#_{T,α} f(x)`: max over swept `Q ∋ x` of the oscillation of `T(f χ_{∁αQ})` over `Q`.
pub fn sharp_truncated(
    kernel: &Kernel,
    f: &GridFunction,
    alpha: i64,
    policy: &CubeSweepPolicy,
) -> Result<GridFunction> {
    check_alpha(alpha)?;
    restricted_sweep(kernel, f, alpha, policy, |ctx, target, m| ctx.sharp(target, alpha, policy, m))
}

/// `M_T f(x)`: max over swept `Q ∋ x` of `max_Q |T(f χ_{∁3Q})|`.
pub fn grand_truncated(kernel: &Kernel, f: &GridFunction, policy: &CubeSweepPolicy) -> Result<GridFunction> {
    restricted_sweep(kernel, f, 3, policy, |ctx, target, m| ctx.grand(target, policy, m))
}

/// Cube form of a swept anchor, for reporting.
pub fn swept_cube(grid: &Grid, anchor: Cell, side: i64) -> Cube {
    if grid.dim() == 1 {
        Cube::interval(anchor[0], side)
    } else {
        Cube::square(anchor[0], anchor[1], side)
    }
}
