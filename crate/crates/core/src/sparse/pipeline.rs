use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{local_cz_decomposition, SparseEntry, SparseFamily};
use crate::error::{Error, Result};
use crate::grid::{avg_p, CellSet, Cube, Grid, GridFunction, Rect, SummedArea};
use crate::maximal::{maximal_restricted, truncation_side, CubeSweepPolicy, Restricted};
use crate::operators::{Kernel, TransformTable, DEFAULT_TABLE_BUDGET};

/// How the thresholds `(c, A)` of each exceptional set are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Exact order statistics of the normalized statistics on each cube.
    #[default]
    Quantile,
    /// User thresholds: `a` for `|T|` and `M^#`, `c` for `M_s`.
    Fixed { a: f64, c: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub alpha: i64,
    pub s: f64,
    pub q: f64,
    pub r: f64,
    pub mode: ThresholdMode,
    /// Recursion levels below each cover cube; `None` means `1 + log2(N)`.
    pub max_depth: Option<u32>,
    pub sweep: CubeSweepPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            alpha: 3,
            s: 1.0,
            q: 1.0,
            r: 1.0,
            mode: ThresholdMode::Quantile,
            max_depth: None,
            sweep: CubeSweepPolicy::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 3 || self.alpha % 2 == 0 {
            return Err(Error::param(format!(
                "alpha must be an odd integer at least 3, got {}",
                self.alpha
            )));
        }
        for (name, v) in [("s", self.s), ("q", self.q), ("r", self.r)] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be a finite real at least 1, got {v}")));
            }
        }
        if let ThresholdMode::Fixed { a, c } = self.mode {
            if !(a > 0.0 && c > 0.0) {
                return Err(Error::param("fixed thresholds must be positive"));
            }
            if self.s != self.q.max(self.r) {
                return Err(Error::param(format!(
                    "fixed mode requires s = max(q, r) = {}, got {}",
                    self.q.max(self.r),
                    self.s
                )));
            }
        }
        if self.max_depth == Some(0) {
            return Err(Error::param("max_depth must be at least 1"));
        }
        self.sweep.validate()
    }

    pub fn depth_limit(&self, grid: &Grid) -> u32 {
        self.max_depth
            .unwrap_or(1 + grid.cells_per_side().trailing_zeros())
    }
}

/// Telemetry for one processed cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeRecord {
    pub cube: Cube,
    pub level: u32,
    /// `⟨f⟩_{s,αQ}`.
    pub average: f64,
    pub a: f64,
    pub c: f64,
    pub omega_cells: u64,
    pub cells: u64,
    pub children: usize,
    /// Threshold choice broke the measure bound, or the recursion was cut off here.
    pub flagged: bool,
    pub terminal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStat {
    pub level: u32,
    pub cube_count: usize,
    pub total_measure: f64,
    pub cells: u64,
}

/// Realized constants of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantLedger {
    /// Largest `A` over all processed cubes.
    pub a: f64,
    /// Largest `c` over all processed cubes.
    pub c: f64,
    pub mode: ThresholdMode,
    pub per_level: Vec<LevelStat>,
    /// `1 / (12 (2α)^n)`.
    pub psi_eval_point: f64,
    pub globalization_factor: f64,
    /// `(3 + c) A` times the globalization factor.
    pub final_c: f64,
    pub flagged: usize,
    pub cover: Vec<Cube>,
    pub cubes: Vec<CubeRecord>,
}

impl ConstantLedger {
    fn from_records(cfg: &PipelineConfig, grid: &Grid, cover: Vec<Cube>, cubes: Vec<CubeRecord>) -> Self {
        let a = cubes.iter().map(|r| r.a).fold(0.0, f64::max);
        let c = cubes.iter().map(|r| r.c).fold(0.0, f64::max);
        let depth = cubes.iter().map(|r| r.level).max().map_or(0, |d| d + 1);
        let mut per_level: Vec<LevelStat> = (0..depth)
            .map(|level| LevelStat { level, cube_count: 0, total_measure: 0.0, cells: 0 })
            .collect();
        for r in &cubes {
            let s = &mut per_level[r.level as usize];
            s.cube_count += 1;
            s.cells += r.cells;
        }
        for s in &mut per_level {
            s.total_measure = s.cells as f64 * grid.cell_measure();
        }
        let n = grid.dim() as i32;
        ConstantLedger {
            a,
            c,
            mode: cfg.mode,
            per_level,
            psi_eval_point: 1.0 / (12.0 * (2.0 * cfg.alpha as f64).powi(n)),
            globalization_factor: 1.0,
            final_c: (3.0 + c) * a,
            flagged: cubes.iter().filter(|r| r.flagged).count(),
            cover,
            cubes,
        }
    }
}

/// Shared state for every cube of one construction: `f`, its transform table and
/// the summed-area table of `|f|^s`.
struct Engine<'a> {
    f: &'a GridFunction,
    grid: Grid,
    frame: Rect,
    cfg: &'a PipelineConfig,
    table: TransformTable,
    power: SummedArea<f64>,
    max_side: i64,
    depth_limit: u32,
}

struct Stats {
    omega: CellSet,
    record: CubeRecord,
}

/// `(k+1)`-th largest value, `k = floor(len / (3 * 2^{n+2}))`; at most `k` values exceed it.
fn order_threshold(values: &[f64], dim: usize) -> f64 {
    let k = values.len() / (3 << (dim + 2));
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.get(k).copied().unwrap_or(0.0)
}

impl<'a> Engine<'a> {
    fn new(kernel: &Kernel, f: &'a GridFunction, cfg: &'a PipelineConfig, cubes: &[Cube]) -> Result<Self> {
        cfg.validate()?;
        let grid = *f.grid();
        kernel.check_dim(grid.dim())?;
        for q in cubes {
            grid.check_cube(q)?;
        }
        let frame = f.frame();
        let max_side = cfg.sweep.max_side_for(&grid);
        let mut core: Option<Rect> = None;
        let mut margin = 0;
        for q in cubes {
            let r = q.rect();
            core = Some(core.map_or(r, |c| c.hull(&r)));
            let b = q.dilate(cfg.alpha)?.rect().intersect(&frame);
            if !b.is_empty() && cfg.sweep.include_outside {
                margin = margin.max(max_side.min(truncation_side(grid.dim(), &r, &b, cfg.alpha)) - 1);
            }
        }
        let core = core.unwrap_or(Rect::new([0, 0], [0, 0]));
        let table = TransformTable::build(kernel, f, core, margin, DEFAULT_TABLE_BUDGET)?;
        Ok(Engine {
            f,
            grid,
            frame,
            cfg,
            table,
            power: SummedArea::of_power(f, cfg.s),
            max_side,
            depth_limit: cfg.depth_limit(&grid),
        })
    }

    fn ctx(&self, support: Rect) -> Restricted<'_> {
        Restricted {
            table: &self.table,
            support,
            dim: self.grid.dim(),
            window: self.grid.window_rect(),
        }
    }

    /// `Ω ⊆ Q` and the thresholds realized on `Q`. At the depth limit the thresholds are the
    /// maxima of the statistics, so `Ω = ∅`.
    fn exceptional(&self, q: &Cube, level: u32) -> Result<Stats> {
        let dim = self.grid.dim();
        let qstar = q.dilate(self.cfg.alpha)?;
        let support = qstar.rect().intersect(&self.frame);
        let target = q.rect();
        let cells = q.num_cells();
        let average = avg_p(self.f, &qstar, self.cfg.s);
        let at_limit = level >= self.depth_limit;
        let mut record = CubeRecord {
            cube: *q,
            level,
            average,
            a: 0.0,
            c: 0.0,
            omega_cells: 0,
            cells,
            children: 0,
            flagged: at_limit,
            terminal: at_limit,
        };
        let mut omega = CellSet::empty(self.grid, target);
        if average == 0.0 || support.is_empty() {
            return Ok(Stats { omega, record });
        }
        let ctx = self.ctx(support);
        let tq: Vec<f64> = ctx.transform(&target).iter().map(|v| v.norm() / average).collect();
        if at_limit {
            record.a = tq.iter().copied().fold(0.0, f64::max);
            return Ok(Stats { omega, record });
        }
        let ms_side = if self.cfg.sweep.is_complete() {
            self.max_side.min(qstar.side())
        } else {
            self.max_side
        };
        let ms: Vec<f64> = maximal_restricted(
            &self.power,
            self.cfg.s,
            support,
            dim,
            target,
            self.grid.window_rect(),
            &self.cfg.sweep,
            ms_side,
        )
        .into_iter()
        .map(|v| v / average)
        .collect();
        let sh: Vec<f64> = ctx
            .sharp(target, self.cfg.alpha, &self.cfg.sweep, self.max_side)
            .into_iter()
            .map(|v| v / average)
            .collect();

        let (a, c) = match self.cfg.mode {
            ThresholdMode::Quantile => (
                order_threshold(&tq, dim).max(order_threshold(&sh, dim)),
                order_threshold(&ms, dim),
            ),
            ThresholdMode::Fixed { a, c } => (a, c),
        };
        record.a = a;
        record.c = c;
        let mut count = 0u64;
        for (i, cell) in target.cells().enumerate() {
            if ms[i] > c || tq[i] > a || sh[i] > a {
                omega.set(cell, true)?;
                count += 1;
            }
        }
        record.omega_cells = count;
        if count > cells >> (dim + 2) {
            record.flagged = true;
        }
        Ok(Stats { omega, record })
    }

    /// Pre-order list of `(entry, record)` for the local family of `q`.
    fn local(&self, q: &Cube, level: u32) -> Result<Vec<(SparseEntry, CubeRecord)>> {
        let Stats { omega, mut record } = self.exceptional(q, level)?;
        let lambda = 1.0 / (1u64 << (self.grid.dim() + 1)) as f64;
        let children = if omega.count() as f64 > lambda * q.num_cells() as f64 {
            // Fixed thresholds too small for the stopping time: stop here.
            record.flagged = true;
            record.terminal = true;
            Vec::new()
        } else {
            local_cz_decomposition(&omega, q, lambda)?
        };
        record.children = children.len();
        let mut witness = CellSet::cube(self.grid, q);
        for p in &children {
            witness.remove_rect(&p.rect());
        }
        let entry = SparseEntry {
            cube: *q,
            witness,
            coefficient: record.average,
            terminal: record.terminal,
        };
        let below = children
            .par_iter()
            .map(|p| self.local(p, level + 1))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(1 + below.iter().map(Vec::len).sum::<usize>());
        out.push((entry, record));
        out.extend(below.into_iter().flatten());
        Ok(out)
    }
}

/// The exceptional set `Ω ⊆ Q` of the local step, with the thresholds realized on `Q`.
pub fn exceptional_set(
    f: &GridFunction,
    q: &Cube,
    kernel: &Kernel,
    cfg: &PipelineConfig,
) -> Result<(CellSet, CubeRecord)> {
    let engine = Engine::new(kernel, f, cfg, std::slice::from_ref(q))?;
    let s = engine.exceptional(q, 0)?;
    Ok((s.omega, s.record))
}

/// The `1/2`-sparse family of subcubes of `q` dominating `T(f χ_{αQ})` on `q`.
pub fn local_sparse_family(
    f: &GridFunction,
    q: &Cube,
    kernel: &Kernel,
    cfg: &PipelineConfig,
) -> Result<(SparseFamily, ConstantLedger)> {
    if !q.is_power_of_two() {
        return Err(Error::Alignment(format!("cube {q} does not have a power-of-two side")));
    }
    let engine = Engine::new(kernel, f, cfg, std::slice::from_ref(q))?;
    let (entries, records): (Vec<_>, Vec<_>) = engine.local(q, 0)?.into_iter().unzip();
    let ledger = ConstantLedger::from_records(cfg, &engine.grid, vec![*q], records);
    let family = SparseFamily {
        grid: engine.grid,
        eta: 0.5,
        constant: Some(ledger.final_c),
        entries,
    };
    Ok((family, ledger))
}

/// `Q_0 = support_box` followed by the rings `3^k Q_0 \ 3^{k-1} Q_0`, each split into
/// `3^n - 1` congruent cubes, until `3^k Q_0` covers `window`. Only cubes meeting the
/// window are returned.
pub fn partition_cover(support_box: &Cube, alpha: i64, window: &Cube) -> Result<Vec<Cube>> {
    if alpha < 3 {
        return Err(Error::param(format!("cover needs alpha at least 3, got {alpha}")));
    }
    if alpha % 2 == 0 {
        return Err(Error::Alignment(format!("dilation factor {alpha} is even")));
    }
    if support_box.dim() != window.dim() {
        return Err(Error::param("support box and window have different dimensions"));
    }
    let dim = window.dim();
    let w = window.rect();
    let mut out = vec![*support_box];
    let mut inner = *support_box;
    while !inner.rect().contains_rect(&w) {
        let outer = inner.dilate(3)?;
        let b = inner.side();
        let a = outer.anchor();
        let offsets: Vec<[i64; 2]> = if dim == 1 {
            (0..3).filter(|&i| i != 1).map(|i| [i, 0]).collect()
        } else {
            (0..3)
                .flat_map(|j| (0..3).map(move |i| [i, j]))
                .filter(|&o| o != [1, 1])
                .collect()
        };
        for o in offsets {
            let cube = Cube::new(&[a[0] + o[0] * b, a[1] + o[1] * b][..dim], b)?;
            out.push(cube);
        }
        inner = outer;
    }
    out.retain(|c| !c.rect().intersect(&w).is_empty());
    Ok(out)
}

/// Result of the global construction.
#[derive(Clone, Debug)]
pub struct SparseDomination {
    pub family: SparseFamily,
    pub c_emp: f64,
    pub ledger: ConstantLedger,
}

/// Smallest power-of-two cube containing the support of `f` and lying in `window`; a single
/// cell at the window anchor for `f ≡ 0`.
pub fn support_box(f: &GridFunction, window: &Cube) -> Result<Cube> {
    let dim = window.dim();
    let w = window.rect();
    let Some(s) = f.support_rect() else {
        return Cube::new(&window.anchor()[..dim], 1);
    };
    if !w.contains_rect(&s) {
        return Err(Error::param(format!("support of f is not inside the window {window}")));
    }
    let width = (0..dim).map(|ax| s.width(ax)).max().unwrap_or(1);
    let side = (width as u64).next_power_of_two() as i64;
    let mut anchor = [0; 2];
    for ax in 0..dim {
        anchor[ax] = s.lo[ax].min(w.hi[ax] - side).max(w.lo[ax]);
    }
    Cube::new(&anchor[..dim], side)
}

/// Sparse domination of `T f` on `window`: cover, local families, then dilation by `α`.
pub fn build_sparse_domination(
    f: &GridFunction,
    kernel: &Kernel,
    cfg: &PipelineConfig,
    window: &Cube,
) -> Result<SparseDomination> {
    cfg.validate()?;
    let grid = *f.grid();
    grid.check_cube(window)?;
    if !window.is_power_of_two() {
        return Err(Error::Alignment(format!("window {window} does not have a power-of-two side")));
    }
    let dim = grid.dim();
    let mut q0 = support_box(f, window)?;
    // Grow Q_0 until a single ring covers the window, so every cover cube has a
    // power-of-two side.
    while !q0.dilate(3)?.rect().contains_rect(&window.rect()) {
        let m = q0.side();
        let mut a = q0.anchor();
        for v in a.iter_mut().take(dim) {
            *v -= m / 2;
        }
        q0 = Cube::new(&a[..dim], 2 * m)?;
    }
    let cover = partition_cover(&q0, cfg.alpha, window)?;
    let engine = Engine::new(kernel, f, cfg, &cover)?;
    let parts = cover
        .par_iter()
        .map(|q| engine.local(q, 0))
        .collect::<Result<Vec<_>>>()?;

    let mut entries = Vec::new();
    let mut records = Vec::new();
    for (e, r) in parts.into_iter().flatten() {
        entries.push(SparseEntry {
            cube: e.cube.dilate(cfg.alpha)?,
            witness: e.witness,
            coefficient: e.coefficient,
            terminal: e.terminal,
        });
        records.push(r);
    }
    let ledger = ConstantLedger::from_records(cfg, &grid, cover, records);
    let c_emp = ledger.final_c * ledger.globalization_factor;
    let family = SparseFamily {
        grid,
        eta: 1.0 / (2 * cfg.alpha.pow(dim as u32)) as f64,
        constant: Some(c_emp),
        entries,
    };
    Ok(SparseDomination { family, c_emp, ledger })
}

/// `T f` on the window with the diagonal skipped.
pub fn transform_on_window(kernel: &Kernel, f: &GridFunction) -> Result<GridFunction> {
    let grid = *f.grid();
    let all = CellSet::window(grid);
    let src = CellSet::full(grid, f.frame());
    crate::operators::apply_restricted(kernel, f, &all, &src)
}
