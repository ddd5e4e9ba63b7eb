use anyhow::{Context, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsedom::grid::{Cell, GridFunction, GridFunctionRecord};

use crate::config::{ExperimentConfig, FunctionKind};
use crate::ConfigError;

/// Half-open cell range `[lo, hi)` of the support on each axis.
pub fn support_cells(cfg: &ExperimentConfig) -> (i64, i64) {
    let n = cfg.grid.cells_per_side() as f64;
    let [lo, hi] = cfg.function.support;
    let a = (lo * n).floor() as i64;
    let b = ((hi * n).ceil() as i64).max(a + 1);
    (a, b.min(n as i64))
}

/// Deterministic input function for a configuration.
pub fn generate(cfg: &ExperimentConfig) -> Result<GridFunction> {
    let grid = cfg.grid;
    let dim = grid.dim();
    let (lo, hi) = support_cells(cfg);
    let width = hi - lo;
    let inside = move |c: Cell| (0..dim).all(|ax| c[ax] >= lo && c[ax] < hi);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.function_seed());
    let f = match cfg.function.kind {
        FunctionKind::Random if cfg.function.blocks == 0 => {
            let w = grid.window_rect();
            let values = w
                .cells()
                .map(|c| {
                    let v = if inside(c) { rng.gen_range(-1.0..1.0) } else { 0.0 };
                    Complex64::new(v, 0.0)
                })
                .collect();
            GridFunction::new(grid, values)?
        }
        FunctionKind::Random => {
            let k = cfg.function.blocks as i64;
            let amps: Vec<f64> = (0..k.pow(dim as u32)).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let block = move |x: i64| ((x - lo) * k / width).min(k - 1);
            GridFunction::from_fn(grid, |c| {
                if !inside(c) {
                    return Complex64::new(0.0, 0.0);
                }
                let idx = if dim == 1 { block(c[0]) } else { block(c[0]) + k * block(c[1]) };
                Complex64::new(amps[idx as usize], 0.0)
            })?
        }
        FunctionKind::Bump => {
            let h = grid.phys_side();
            let [a, b] = cfg.function.support;
            let (mid, half) = (0.5 * (a + b) * h, 0.5 * (b - a) * h);
            GridFunction::from_fn(grid, |c| {
                let x = grid.center(c);
                let u2: f64 = (0..dim).map(|ax| ((x[ax] - mid) / half).powi(2)).sum();
                let v = if u2 < 1.0 { (1.0 - 1.0 / (1.0 - u2)).exp() } else { 0.0 };
                Complex64::new(v, 0.0)
            })?
        }
        FunctionKind::SpikeTrain => {
            let k = cfg.function.blocks as i64;
            let spikes: Vec<(i64, f64)> = (0..k)
                .map(|j| {
                    let at = lo + ((2 * j + 1) * width) / (2 * k);
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    (at, sign)
                })
                .collect();
            GridFunction::from_fn(grid, |c| {
                let v = spikes
                    .iter()
                    .find(|(at, _)| (0..dim).all(|ax| c[ax] == *at))
                    .map_or(0.0, |s| s.1);
                Complex64::new(v, 0.0)
            })?
        }
        FunctionKind::File => {
            let path = cfg.function.path.as_ref().expect("validated");
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading function file {}", path.display()))?;
            read_function(&text, cfg)?
        }
    };
    Ok(f)
}

/// Parses a function record and checks it lives on the configured grid.
pub fn read_function(text: &str, cfg: &ExperimentConfig) -> Result<GridFunction> {
    let rec: GridFunctionRecord =
        serde_json::from_str(text).map_err(|e| ConfigError(format!("bad function record: {e}")))?;
    if rec.grid != cfg.grid {
        return Err(ConfigError(format!("function grid {:?} differs from the configured grid", rec.grid)).into());
    }
    Ok(GridFunction::try_from(rec)?)
}
