use super::{Cube, GridFunction};
use crate::error::{Error, Result};

/// Convex increasing `Φ` with `Φ(0) = 0`, given as an evaluation rule.
pub trait YoungFunction {
    fn eval(&self, t: f64) -> f64;
}

/// `Φ(t) = t^p`.
#[derive(Clone, Copy, Debug)]
pub struct PowerYoung(pub f64);

impl YoungFunction for PowerYoung {
    fn eval(&self, t: f64) -> f64 {
        if self.0 == 1.0 {
            t
        } else if self.0 == 2.0 {
            t * t
        } else {
            t.powf(self.0)
        }
    }
}

/// `Φ(t) = t log(e + t)`.
#[derive(Clone, Copy, Debug)]
pub struct LogYoung;

impl YoungFunction for LogYoung {
    fn eval(&self, t: f64) -> f64 {
        t * (std::f64::consts::E + t).ln()
    }
}

/// Wraps a closure.
pub struct FnYoung<F>(pub F);

impl<F: Fn(f64) -> f64> YoungFunction for FnYoung<F> {
    fn eval(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

const SAMPLE_POINTS: usize = 64;
const SAMPLE_RANGE: f64 = 16.0;

/// Samples `Φ` on `[0, t_max]` and rejects it unless it vanishes at 0, is finite,
/// non-decreasing and midpoint convex at every sample.
pub fn validate_young(phi: &dyn YoungFunction, t_max: f64) -> Result<()> {
    let ts: Vec<f64> = (0..=SAMPLE_POINTS)
        .map(|k| t_max * k as f64 / SAMPLE_POINTS as f64)
        .collect();
    let vs: Vec<f64> = ts.iter().map(|&t| phi.eval(t)).collect();
    if let Some(k) = vs.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("Young function not finite at t={}", ts[k])));
    }
    if vs[0].abs() > 1e-12 {
        return Err(Error::Validation(format!("Young function has Φ(0) = {}", vs[0])));
    }
    if vs[SAMPLE_POINTS] <= 0.0 {
        return Err(Error::Validation("Young function vanishes on the sample range".into()));
    }
    for k in 1..=SAMPLE_POINTS {
        let tol = 1e-12 * (1.0 + vs[k].abs());
        if vs[k] < vs[k - 1] - tol {
            return Err(Error::Validation(format!(
                "Young function decreases near t={}",
                ts[k]
            )));
        }
        if k < SAMPLE_POINTS && vs[k] > 0.5 * (vs[k - 1] + vs[k + 1]) + tol {
            return Err(Error::Validation(format!(
                "Young function is not convex near t={}",
                ts[k]
            )));
        }
    }
    Ok(())
}

/// Luxemburg average `inf{λ > 0 : |Q|^{-1} \int_Q Φ(|f|/λ) <= 1}` by bisection to
/// relative tolerance `1e-12`.
pub fn orlicz_avg(f: &GridFunction, q: &Cube, phi: &dyn YoungFunction) -> Result<f64> {
    validate_young(phi, SAMPLE_RANGE)?;
    let clip = q.rect().intersect(&f.frame());
    let abs: Vec<f64> = if clip.is_empty() {
        Vec::new()
    } else {
        clip.cells().map(|c| f.value(c).norm()).filter(|&a| a > 0.0).collect()
    };
    if abs.is_empty() {
        return Ok(0.0);
    }
    let cells = q.num_cells() as f64;
    let mean = |lambda: f64| abs.iter().map(|&a| phi.eval(a / lambda)).sum::<f64>() / cells;

    let max = abs.iter().copied().fold(0.0, f64::max);
    let mut hi = max.max(1.0);
    let mut guard = 0;
    while mean(hi) > 1.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 1100 {
            return Err(Error::Validation(
                "Young function too flat to bracket the Orlicz average".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..400 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mean(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
