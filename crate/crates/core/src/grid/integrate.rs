use std::ops::{Add, Sub};

use num_complex::Complex64;

use super::{Cell, Cube, GridFunction, Rect};

/// `|z|^p`, with the `p = 1` and `p = 2` cases computed without `powf`.
#[inline]
pub fn abs_pow(z: Complex64, p: f64) -> f64 {
    if p == 1.0 {
        z.norm()
    } else if p == 2.0 {
        z.norm_sqr()
    } else {
        z.norm().powf(p)
    }
}

/// `sum_{c in Q} |f(c)|^p h^dim`, cells outside the function's frame contributing 0.
pub fn cube_integral(f: &GridFunction, q: &Cube, p: f64) -> f64 {
    debug_assert!(p >= 1.0);
    let clip = q.rect().intersect(&f.frame());
    if clip.is_empty() {
        return 0.0;
    }
    let sum: f64 = clip.cells().map(|c| abs_pow(f.value(c), p)).sum();
    sum * f.grid().cell_measure()
}

/// `(|Q|^{-1} \int_Q |f|^p)^{1/p}`.
pub fn avg_p(f: &GridFunction, q: &Cube, p: f64) -> f64 {
    let mean = cube_integral(f, q, p) / f.grid().measure(q);
    root(mean, p)
}

#[inline]
pub(crate) fn root(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x.sqrt()
    } else {
        x.powf(1.0 / p)
    }
}

/// Summed-area table over a frame: box sums in O(1), cells outside the frame count as zero.
#[derive(Clone, Debug)]
pub struct SummedArea<T> {
    frame: Rect,
    stride: usize,
    table: Vec<T>,
}

impl<T> SummedArea<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T>,
{
    pub fn from_fn(frame: Rect, value: impl Fn(Cell) -> T) -> Self {
        let w = frame.width(0) as usize;
        let h = frame.width(1) as usize;
        let stride = w + 1;
        let mut table = vec![T::default(); stride * (h + 1)];
        for j in 0..h {
            let mut row = T::default();
            for i in 0..w {
                row = row + value([frame.lo[0] + i as i64, frame.lo[1] + j as i64]);
                table[(j + 1) * stride + i + 1] = table[j * stride + i + 1] + row;
            }
        }
        SummedArea {
            frame,
            stride,
            table,
        }
    }

    pub fn frame(&self) -> Rect {
        self.frame
    }

    /// Sum over `r` clipped to the frame.
    #[inline]
    pub fn sum(&self, r: &Rect) -> T {
        let c = r.intersect(&self.frame);
        if c.is_empty() {
            return T::default();
        }
        let x0 = (c.lo[0] - self.frame.lo[0]) as usize;
        let x1 = (c.hi[0] - self.frame.lo[0]) as usize;
        let y0 = (c.lo[1] - self.frame.lo[1]) as usize;
        let y1 = (c.hi[1] - self.frame.lo[1]) as usize;
        let s = self.stride;
        self.table[y1 * s + x1] - self.table[y0 * s + x1] - self.table[y1 * s + x0]
            + self.table[y0 * s + x0]
    }
}

impl SummedArea<f64> {
    /// Table of `|f|^p` over the frame of `f`.
    pub fn of_power(f: &GridFunction, p: f64) -> Self {
        Self::from_fn(f.frame(), |c| abs_pow(f.value(c), p))
    }
}
