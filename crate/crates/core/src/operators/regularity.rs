use rayon::prelude::*;
use serde::Serialize;

use super::Kernel;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Quadrature nodes used by [`dini_constant`].
pub const DINI_NODES: usize = 1 << 12;
const DINI_LOG2_CUTOFF: f64 = -40.0;
/// Share of the integral allowed on the lower half of the log range before the
/// estimate is declared divergent.
const DINI_TAIL_SHARE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiniEstimate {
    /// `+inf` when divergence is detected.
    pub value: f64,
    /// Integral over `[2^-40, 1]` regardless of the divergence verdict.
    pub truncated: f64,
    /// Contribution of `[2^-40, 2^-20]`.
    pub tail: f64,
    pub nodes: usize,
    pub lower_cutoff: f64,
    pub divergent: bool,
}

/// `∫_0^1 ω(t) dt/t` by the trapezoid rule in `u = ln t`.
pub fn dini_constant(omega: impl Fn(f64) -> f64) -> Result<DiniEstimate> {
    let a = DINI_LOG2_CUTOFF * std::f64::consts::LN_2;
    let n = DINI_NODES;
    let du = -a / (n - 1) as f64;
    let mut vals = Vec::with_capacity(n);
    for i in 0..n {
        let t = (a + i as f64 * du).exp().min(1.0);
        let w = omega(t);
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Validation(format!("modulus is {w} at t={t}")));
        }
        vals.push(w);
    }
    let half = (n - 1) / 2;
    let trap = |r: std::ops::Range<usize>| -> f64 {
        r.map(|i| 0.5 * (vals[i] + vals[i + 1]) * du).sum()
    };
    let tail = trap(0..half);
    let truncated = tail + trap(half..n - 1);
    let divergent = truncated > 0.0 && tail > DINI_TAIL_SHARE * truncated;
    Ok(DiniEstimate {
        value: if divergent { f64::INFINITY } else { truncated },
        truncated,
        tail,
        nodes: n,
        lower_cutoff: DINI_LOG2_CUTOFF.exp2(),
        divergent,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HormanderEstimate {
    pub value: f64,
    /// Last annulus term of the maximizing pair.
    pub tail: f64,
    pub k_max: u32,
    pub cubes: usize,
    pub pairs: usize,
    /// Whether every half-cube was sampled exhaustively.
    pub exact_pairs: bool,
}

/// Empirical `L^r`-Hörmander constant over centered test cubes and annuli `2^k Q \ 2^{k-1} Q`.
///
/// Cubes have dyadic sides `2..=N/4` and centers on the lattice `(2j+1)N/8`. Far annuli
/// are integrated on blocks of at most 512 (1D) or 32x32 (2D) samples.
pub fn hormander_constant(kernel: &Kernel, r: f64, grid: &Grid, k_max: u32) -> Result<HormanderEstimate> {
    kernel.check_dim(grid.dim())?;
    if k_max < 1 {
        return Err(Error::param("k_max must be at least 1"));
    }
    if !(r >= 1.0) {
        return Err(Error::param(format!("Hörmander exponent must be at least 1, got {r}")));
    }
    let n = grid.cells_per_side() as i64;
    if n < 8 {
        return Err(Error::param("Hörmander sampling needs at least 8 cells per side"));
    }
    if k_max > 40 {
        return Err(Error::param("k_max above 40 overflows the sampled annuli"));
    }
    let dim = grid.dim();
    let h = grid.cell_width();
    let (per_axis_pts, per_axis_blocks) = if dim == 1 { (64usize, 512i64) } else { (8, 32) };

    let mut sides = vec![2i64];
    while sides.last().unwrap() * 2 <= n / 4 {
        let s = sides.last().unwrap() * 2;
        sides.push(s);
    }
    let centers: Vec<i64> = (0..4).map(|j| (2 * j + 1) * n / 8).collect();
    let mut cubes: Vec<(i64, [i64; 2])> = Vec::new();
    for &s in &sides {
        for &cx in &centers {
            if dim == 1 {
                cubes.push((s, [cx, 0]));
            } else {
                for &cy in &centers {
                    cubes.push((s, [cx, cy]));
                }
            }
        }
    }

    let rp_inv = if r.is_infinite() { 1.0 } else { 1.0 - 1.0 / r };
    let results: Vec<(f64, f64, usize, bool)> = cubes
        .par_iter()
        .map(|&(s, c)| {
            // Cells with centers within s/4 of the cube center, per axis.
            let mut axis_pts: Vec<Vec<i64>> = Vec::new();
            let mut exact = true;
            for ax in 0..dim {
                let lo = (4 * c[ax] - 2 - s + 3).div_euclid(4);
                let hi = (4 * c[ax] - 2 + s).div_euclid(4);
                let m = (hi - lo + 1) as usize;
                let pts: Vec<i64> = if m > per_axis_pts {
                    exact = false;
                    (0..per_axis_pts)
                        .map(|k| lo + (k * (m - 1) / (per_axis_pts - 1)) as i64)
                        .collect()
                } else {
                    (lo..=hi).collect()
                };
                axis_pts.push(pts);
            }
            let xs: Vec<[f64; 2]> = if dim == 1 {
                axis_pts[0].iter().map(|&i| grid.center([i, 0])).collect()
            } else {
                let mut v = Vec::new();
                for &j in &axis_pts[1] {
                    for &i in &axis_pts[0] {
                        v.push(grid.center([i, j]));
                    }
                }
                v
            };

            // Annulus block centers and weights.
            let mut annuli: Vec<(Vec<[f64; 2]>, f64, f64)> = Vec::new();
            for k in 1..=k_max {
                let outer = s << k;
                let inner = outer / 2;
                let sigma = (outer / per_axis_blocks).max(1);
                let o_lo = [c[0] - outer / 2, c[1] - outer / 2];
                let i_lo = [c[0] - inner / 2, c[1] - inner / 2];
                let steps = outer / sigma;
                let mut pts = Vec::new();
                let in_inner = |b: i64, ax: usize| b >= i_lo[ax] && b < i_lo[ax] + inner;
                if dim == 1 {
                    for bi in 0..steps {
                        let b = o_lo[0] + bi * sigma;
                        if !in_inner(b, 0) {
                            pts.push([(b as f64 + sigma as f64 / 2.0) * h, 0.0]);
                        }
                    }
                } else {
                    for bj in 0..steps {
                        let y = o_lo[1] + bj * sigma;
                        for bi in 0..steps {
                            let x = o_lo[0] + bi * sigma;
                            if !(in_inner(x, 0) && in_inner(y, 1)) {
                                pts.push([
                                    (x as f64 + sigma as f64 / 2.0) * h,
                                    (y as f64 + sigma as f64 / 2.0) * h,
                                ]);
                            }
                        }
                    }
                }
                let weight = (sigma as f64 * h).powi(dim as i32);
                let measure = (outer as f64 * h).powi(dim as i32);
                annuli.push((pts, weight, measure.powf(rp_inv)));
            }

            let vals: Vec<Vec<Vec<f64>>> = xs
                .iter()
                .map(|&x| {
                    annuli
                        .iter()
                        .map(|(pts, _, _)| pts.iter().map(|&y| kernel.eval(x, y)).collect())
                        .collect()
                })
                .collect();

            let mut best = (0.0f64, 0.0f64);
            let mut pairs = 0usize;
            for a in 0..xs.len() {
                for b in a + 1..xs.len() {
                    pairs += 1;
                    let mut total = 0.0;
                    let mut last = 0.0;
                    for (k, (_, w, scale)) in annuli.iter().enumerate() {
                        let (va, vb) = (&vals[a][k], &vals[b][k]);
                        let norm = if r.is_infinite() {
                            va.iter().zip(vb).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
                        } else {
                            let sum: f64 = va.iter().zip(vb).map(|(p, q)| (p - q).abs().powf(r)).sum();
                            (sum * w).powf(1.0 / r)
                        };
                        last = scale * norm;
                        total += last;
                    }
                    if total > best.0 {
                        best = (total, last);
                    }
                }
            }
            (best.0, best.1, pairs, exact)
        })
        .collect();

    let mut value = 0.0;
    let mut tail = 0.0;
    let mut pairs = 0;
    let mut exact_pairs = true;
    for (v, t, p, e) in results {
        pairs += p;
        exact_pairs &= e;
        if v > value {
            value = v;
            tail = t;
        }
    }
    if !value.is_finite() {
        return Err(Error::Validation(format!(
            "kernel `{}` produced a non-finite Hörmander sum",
            kernel.name()
        )));
    }
    Ok(HormanderEstimate {
        value,
        tail,
        k_max,
        cubes: cubes.len(),
        pairs,
        exact_pairs,
    })
}
