//! Independent checkers: sparsity and domination audits, the sparse operator and its
//! `L^p` ratio, the weak-type profile, the testing-condition probe and the pointwise
//! comparison of the sharp truncated operator with a maximal function.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{abs_pow, avg_p, Cell, CellSet, Cube, Grid, GridFunction};
use crate::maximal::{hl_maximal, sharp_truncated, CubeSweepPolicy};
use crate::operators::{apply_restricted, Kernel};
use crate::sparse::{SparseEntry, SparseFamily};

pub const ABS_TOL: f64 = 1e-10;
pub const REL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub passed: bool,
    pub worst_ratio: f64,
    pub worst_location: Option<String>,
    pub samples: u64,
    pub metadata: BTreeMap<String, String>,
}

impl VerificationReport {
    pub fn new(name: impl Into<String>) -> Self {
        VerificationReport {
            name: name.into(),
            passed: true,
            worst_ratio: 0.0,
            worst_location: None,
            samples: 0,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }
}

fn cell_name(c: Cell, dim: usize) -> String {
    if dim == 1 {
        format!("[{}]", c[0])
    } else {
        format!("[{},{}]", c[0], c[1])
    }
}

/// Exact audit of witness containment, pairwise disjointness and the `eta` measure ratio.
pub fn check_sparsity(family: &SparseFamily, eta: f64) -> VerificationReport {
    let dim = family.grid.dim();
    let mut report = VerificationReport::new("sparsity")
        .with_meta("eta", eta)
        .with_meta("entries", family.len());
    report.samples = family.len() as u64;
    report.worst_ratio = 1.0;
    let mut owner: HashMap<Cell, usize> = HashMap::new();
    let mut conflict: Option<String> = None;
    for (i, e) in family.entries.iter().enumerate() {
        let mut count = 0u64;
        for c in e.witness.cells() {
            if !e.cube.contains_cell(c) {
                conflict.get_or_insert_with(|| {
                    format!("entry {i} {}: witness cell {} outside its cube", e.cube, cell_name(c, dim))
                });
                continue;
            }
            count += 1;
            if let Some(&j) = owner.get(&c) {
                conflict.get_or_insert_with(|| {
                    format!(
                        "entries {j} {} and {i} {} share witness cell {}",
                        family.entries[j].cube,
                        e.cube,
                        cell_name(c, dim)
                    )
                });
            } else {
                owner.insert(c, i);
            }
        }
        let ratio = count as f64 / e.cube.num_cells() as f64;
        if ratio < report.worst_ratio {
            report.worst_ratio = ratio;
            if conflict.is_none() {
                report.worst_location = Some(format!("entry {i} {}", e.cube));
            }
        }
    }
    if let Some(c) = conflict {
        report.passed = false;
        report.worst_location = Some(c);
    } else if report.worst_ratio < eta {
        report.passed = false;
    }
    report
}

/// Window values of `Σ_Q ⟨f⟩_{s,Q} χ_Q` with averages recomputed from `f`.
pub fn sparse_operator(family: &SparseFamily, f: &GridFunction, s: f64) -> Result<GridFunction> {
    if !(s >= 1.0) {
        return Err(Error::param(format!("sparse operator exponent must be at least 1, got {s}")));
    }
    let grid = family.grid;
    let window = grid.window_rect();
    let coeffs: Vec<f64> = family.entries.par_iter().map(|e| avg_p(f, &e.cube, s)).collect();
    let mut out = vec![0.0f64; window.num_cells()];
    for (e, &a) in family.entries.iter().zip(&coeffs) {
        let clip = e.cube.rect().intersect(&window);
        if clip.is_empty() || a == 0.0 {
            continue;
        }
        for c in clip.cells() {
            out[window.index_of(c)] += a;
        }
    }
    GridFunction::new(grid, out.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
}

/// Largest relative gap between stored coefficients and recomputed averages.
pub fn coefficient_audit(family: &SparseFamily, f: &GridFunction, s: f64) -> VerificationReport {
    let mut report = VerificationReport::new("coefficients").with_meta("rel_tol", REL_TOL).with_meta("s", s);
    report.samples = family.len() as u64;
    for (i, e) in family.entries.iter().enumerate() {
        let direct = avg_p(f, &e.cube, s);
        let gap = (e.coefficient - direct).abs();
        let rel = if direct == 0.0 { gap } else { gap / direct };
        if rel > report.worst_ratio {
            report.worst_ratio = rel;
            report.worst_location = Some(format!("entry {i} {}", e.cube));
        }
    }
    report.passed = report.worst_ratio <= REL_TOL;
    report
}

/// `|Tf| <= C·AS + tol` at every cell of `tf`'s frame.
pub fn check_domination(tf: &GridFunction, as_: &GridFunction, c: f64) -> VerificationReport {
    check_domination_with(tf, as_, c, ABS_TOL)
}

pub fn check_domination_with(tf: &GridFunction, as_: &GridFunction, c: f64, tol: f64) -> VerificationReport {
    let dim = tf.grid().dim();
    let mut report = VerificationReport::new("domination")
        .with_meta("constant", c)
        .with_meta("abs_tol", tol);
    let frame = tf.frame();
    report.samples = frame.num_cells() as u64;
    let mut violations = 0u64;
    let mut first_bad: Option<String> = None;
    for (cell, v) in frame.cells().zip(tf.values()) {
        let t = v.norm();
        let a = as_.value(cell).re;
        if a > 0.0 {
            let ratio = t / a;
            if ratio > report.worst_ratio {
                report.worst_ratio = ratio;
                report.worst_location = Some(cell_name(cell, dim));
            }
        }
        if t > c * a + tol {
            violations += 1;
            first_bad.get_or_insert_with(|| cell_name(cell, dim));
        }
    }
    if violations > 0 {
        report.passed = false;
        report.worst_location = first_bad;
    }
    report.with_meta("violations", violations)
}

fn lp_norm(values: impl Iterator<Item = f64>, p: f64, h_n: f64) -> f64 {
    let s: f64 = values.map(|v| abs_pow(Complex64::new(v, 0.0), p)).sum();
    (s * h_n).powf(1.0 / p)
}

/// `‖Σ_Q ⟨f⟩_{r,Q} χ_Q‖_p / ‖f‖_p` over the window.
pub fn sparse_lp_ratio(family: &SparseFamily, f: &GridFunction, r: f64, p: f64) -> Result<f64> {
    if !(r >= 1.0 && p > r) {
        return Err(Error::param(format!("need 1 <= r < p, got r={r}, p={p}")));
    }
    let h_n = f.grid().cell_measure();
    let window = f.grid().window_rect();
    let fp = lp_norm(window.cells().map(|c| f.value(c).norm()), p, h_n);
    if fp == 0.0 {
        return Err(Error::Degenerate("the L^p ratio is undefined for f = 0".into()));
    }
    let a = sparse_operator(family, f, r)?;
    Ok(lp_norm(a.values().iter().map(|v| v.re), p, h_n) / fp)
}

/// `ψ(λ)`: smallest `t` with `#{x ∈ Q : |T(fχ_Q)(x)| > t ⟨f⟩_{q,Q}} <= λ·#Q`.
pub fn wq_profile(
    kernel: &Kernel,
    f: &GridFunction,
    q: &Cube,
    qexp: f64,
    lambdas: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
        return Err(Error::param(format!("profile levels must lie in (0, 1], got {l}")));
    }
    let avg = avg_p(f, q, qexp);
    if avg == 0.0 {
        return Err(Error::Degenerate(format!("average of f over {q} vanishes")));
    }
    let grid = *f.grid();
    let cube = CellSet::cube(grid, q);
    let tf = apply_restricted(kernel, f, &cube, &cube)?;
    let mut v: Vec<f64> = tf.values().iter().map(|z| z.norm()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    let cells = v.len();
    Ok(lambdas
        .iter()
        .map(|&l| {
            let idx = (l * cells as f64).floor() as usize;
            (l, v.get(idx).copied().unwrap_or(0.0) / avg)
        })
        .collect())
}

const T1_PROBABILITIES: [f64; 4] = [0.125, 0.25, 0.5, 0.75];

/// `(1/|Q|) Σ_{x∈Q} |T* χ_E(x)| h^n` for a subset `E ⊆ Q` given as a mask over `Q`.
fn t1_functional(adjoint: &Kernel, grid: Grid, q: &Cube, mask: &[bool]) -> Result<f64> {
    let g = GridFunction::on_frame(
        grid,
        q.rect(),
        mask.iter().map(|&m| Complex64::new(f64::from(u8::from(m)), 0.0)).collect(),
    )?;
    let cube = CellSet::cube(grid, q);
    let t = apply_restricted(adjoint, &g, &cube, &cube)?;
    Ok(t.values().iter().map(|v| v.norm()).sum::<f64>() / q.num_cells() as f64)
}

/// Random falsifier for `∫_Q |T* χ_E| <= C |Q|`; `E = Q` and `E = ∅` are always included.
pub fn t1_testing_probe(
    kernel: &Kernel,
    grid: &Grid,
    q: &Cube,
    trials: u32,
    seed: u64,
) -> Result<VerificationReport> {
    if trials < 1 {
        return Err(Error::param("the probe needs at least one trial"));
    }
    grid.check_cube(q)?;
    let adjoint = kernel.transpose();
    let n = q.num_cells() as usize;
    let full = t1_functional(&adjoint, *grid, q, &vec![true; n])?;
    let values = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::from(k) + 1);
            let p = T1_PROBABILITIES[rng.gen_range(0..T1_PROBABILITIES.len())];
            let mask: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < p).collect();
            t1_functional(&adjoint, *grid, q, &mask)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = VerificationReport::new("t1-probe")
        .with_meta("kernel", kernel.name())
        .with_meta("cube", q)
        .with_meta("trials", trials)
        .with_meta("seed", seed)
        .with_meta("full_set_value", full)
        .with_meta("kind", "falsifier");
    report.samples = u64::from(trials) + 2;
    report.worst_ratio = full;
    report.worst_location = Some("E=Q".into());
    for (k, v) in values.into_iter().enumerate() {
        if v > report.worst_ratio {
            report.worst_ratio = v;
            report.worst_location = Some(format!("trial {k}"));
        }
    }
    report.passed = report.worst_ratio.is_finite();
    Ok(report)
}

/// `max_x M^#_{T,α} f(x) / M_{rp} f(x)` over cells with a positive denominator.
pub fn sharp_vs_maximal(
    kernel: &Kernel,
    f: &GridFunction,
    alpha: i64,
    rp: f64,
    policy: &CubeSweepPolicy,
) -> Result<VerificationReport> {
    let dim = f.grid().dim();
    let sharp = sharp_truncated(kernel, f, alpha, policy)?;
    let m = hl_maximal(f, rp, policy)?;
    let mut report = VerificationReport::new("sharp-vs-maximal")
        .with_meta("alpha", alpha)
        .with_meta("rp", rp)
        .with_meta("max_side", policy.max_side.map_or("N".to_string(), |s| s.to_string()))
        .with_meta("anchor_stride", policy.anchor_stride)
        .with_meta("include_outside", policy.include_outside);
    let frame = sharp.frame();
    report.samples = frame.num_cells() as u64;
    for (c, v) in frame.cells().zip(sharp.values()) {
        let num = v.re;
        let den = m.value(c).re;
        if den > 0.0 {
            let ratio = num / den;
            if ratio > report.worst_ratio {
                report.worst_ratio = ratio;
                report.worst_location = Some(cell_name(c, dim));
            }
        } else if num > ABS_TOL && report.passed {
            report.passed = false;
            report.worst_location = Some(cell_name(c, dim));
        }
    }
    report.passed &= report.worst_ratio.is_finite();
    Ok(report)
}

/// Random `1/2`-sparse family of dyadic subcubes of `root` from a random stopping process:
/// each cube selects fewer than half of its children, each child independently with
/// probability `p`, and recursion continues into selected children.
pub fn random_sparse_family(grid: Grid, root: &Cube, p: f64, rng: &mut impl Rng) -> Result<SparseFamily> {
    grid.check_cube(root)?;
    if !root.is_power_of_two() {
        return Err(Error::Alignment(format!("cube {root} does not have a power-of-two side")));
    }
    let mut family = SparseFamily::new(grid, 0.5);
    let mut stack = vec![*root];
    while let Some(q) = stack.pop() {
        let mut witness = CellSet::cube(grid, &q);
        if q.side() > 1 {
            let children = q.dyadic_children()?;
            let limit = children.len() / 2;
            let mut chosen = Vec::new();
            for c in children {
                if chosen.len() < limit && rng.gen::<f64>() < p {
                    chosen.push(c);
                }
            }
            for c in &chosen {
                witness.remove_rect(&c.rect());
            }
            stack.extend(chosen.into_iter().rev());
        }
        family.entries.push(SparseEntry {
            cube: q,
            witness,
            coefficient: 0.0,
            terminal: false,
        });
    }
    Ok(family)
}
