use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsedom::grid::{avg_p, orlicz_avg, CellSet, Cube, Grid, GridFunction, PowerYoung};
use sparsedom::maximal::CubeSweepPolicy;
use sparsedom::operators::{dini_constant, Kernel};
use sparsedom::sparse::{
    build_sparse_domination, local_cz_decomposition, partition_cover, transform_on_window, PipelineConfig,
};
use sparsedom::verify::{
    check_domination, check_sparsity, random_sparse_family, sharp_vs_maximal, sparse_lp_ratio, sparse_operator,
    wq_profile,
};
use sparsedom_cli::config::ExperimentConfig;
use sparsedom_cli::input;

const E2E_SEEDS: u64 = 20;
const E2E_BUDGET_SECS: f64 = 60.0;
const DINI_REL_TOL: f64 = 0.01;
const STOPPING_PAIRS: usize = 1000;
const COVER_TRIALS: usize = 200;
const REFINEMENT_FACTOR: f64 = 2.0;
const SHARP_STABILITY: f64 = 0.20;
const LP_FAMILIES: u64 = 100;
const LP_STABILITY: f64 = 0.25;
const WQ_STABILITY: f64 = 0.30;
const ORLICZ_TRIPLES: usize = 1000;
const ORLICZ_REL_TOL: f64 = 1e-9;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn rel_change(reference: f64, value: f64) -> f64 {
    (value - reference).abs() / reference.abs()
}

fn random_config(kernel: &str, n: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{"seed": {seed}, "grid": {{"dim": 1, "cells_per_side": {n}}}, "kernel": {kernel},
            "function": {{"kind": "random", "support": [0.25, 0.75]}}}}"#
    ))
    .expect("valid config")
}

/// Sparsity at `1/(2α^n)` and full-window domination with the ledger constant.
fn pipeline_passes(kernel: &Kernel, f: &GridFunction, cfg: &PipelineConfig) -> Result<f64, String> {
    let grid = *f.grid();
    let out = build_sparse_domination(f, kernel, cfg, &grid.window()).map_err(|e| e.to_string())?;
    let eta = 1.0 / (2 * cfg.alpha.pow(grid.dim() as u32)) as f64;
    let sp = check_sparsity(&out.family, eta);
    if !sp.passed || out.family.eta != eta {
        return Err(format!("sparsity failed: worst {} at {:?}", sp.worst_ratio, sp.worst_location));
    }
    let tf = transform_on_window(kernel, f).map_err(|e| e.to_string())?;
    let a = sparse_operator(&out.family, f, cfg.s).map_err(|e| e.to_string())?;
    let dom = check_domination(&tf, &a, out.c_emp);
    if !dom.passed || dom.samples != grid.num_cells() as u64 {
        return Err(format!("domination failed at {:?}", dom.worst_location));
    }
    Ok(out.c_emp)
}

fn end_to_end_hilbert() -> Outcome {
    let start = Instant::now();
    let k = Kernel::hilbert();
    let cfg = PipelineConfig::default();
    let mut worst_c: f64 = 0.0;
    for seed in 0..E2E_SEEDS {
        let f = input::generate(&random_config(r#"{"name": "hilbert"}"#, 256, seed)).expect("input");
        match pipeline_passes(&k, &f, &cfg) {
            Ok(c) => worst_c = worst_c.max(c),
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        secs < E2E_BUDGET_SECS,
        format!("{E2E_SEEDS} seeds, eta=1/6, max C_emp={worst_c:.3}, {secs:.2}s (budget {E2E_BUDGET_SECS}s)"),
    )
}

fn rough_kernels() -> Outcome {
    let kernels = [
        (Kernel::holder(0.5).expect("kernel"), r#"{"name": "holder", "delta": 0.5}"#),
        (Kernel::dini_stress(), r#"{"name": "dini-stress"}"#),
    ];
    let cfg = PipelineConfig::default();
    let mut notes = Vec::new();
    for (k, spec) in &kernels {
        let mut worst_c: f64 = 0.0;
        for seed in 0..E2E_SEEDS {
            let f = input::generate(&random_config(spec, 256, seed)).expect("input");
            match pipeline_passes(k, &f, &cfg) {
                Ok(c) => worst_c = worst_c.max(c),
                Err(e) => return outcome(false, format!("{} seed {seed}: {e}", k.name())),
            }
        }
        notes.push(format!("{} max C_emp={worst_c:.3}", k.name()));
    }
    let lin = dini_constant(|t: f64| t).expect("dini");
    let root = dini_constant(|t: f64| t.sqrt()).expect("dini");
    let ok = rel_change(1.0, lin.value) <= DINI_REL_TOL && rel_change(2.0, root.value) <= DINI_REL_TOL;
    outcome(
        ok,
        format!("{}; Dini(t)={:.6}, Dini(sqrt t)={:.6}", notes.join(", "), lin.value, root.value),
    )
}

fn stopping_time() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5707);
    let mut selected = 0usize;
    for trial in 0..STOPPING_PAIRS {
        let dim = 1 + trial % 2;
        let n: usize = if dim == 1 { 1 << rng.gen_range(2..=8) } else { 1 << rng.gen_range(2..=5) };
        let grid = Grid::new(dim, n, 1.0).expect("grid");
        let q = grid.window();
        let cells = q.num_cells();
        let budget = cells >> (dim + 2);
        let target = rng.gen_range(0..=budget);
        let mut omega = CellSet::empty(grid, q.rect());
        while (omega.count() as u64) < target {
            let x = rng.gen_range(0..n as i64);
            let y = if dim == 2 { rng.gen_range(0..n as i64) } else { 0 };
            omega.set([x, y], true).expect("cell");
        }
        let lambda = 1.0 / (1u64 << (dim + 1)) as f64;
        let ps = match local_cz_decomposition(&omega, &q, lambda) {
            Ok(ps) => ps,
            Err(e) => return outcome(false, format!("trial {trial}: {e}")),
        };
        let mut covered = CellSet::empty(grid, q.rect());
        let mut total = 0u64;
        for p in &ps {
            let m = omega.count_in(&p.rect()) as u64;
            let size = p.num_cells();
            if m << (dim + 1) < size || 2 * m > size {
                return outcome(false, format!("trial {trial}: sandwich broken on {p}: {m}/{size}"));
            }
            for c in p.cells() {
                covered.set(c, true).expect("cell");
            }
            total += size;
        }
        if !omega.is_subset_of(&covered) {
            return outcome(false, format!("trial {trial}: omega not covered"));
        }
        if 2 * total > cells {
            return outcome(false, format!("trial {trial}: selected measure {total} > {cells}/2"));
        }
        selected += ps.len();
    }
    outcome(true, format!("{STOPPING_PAIRS} pairs, {selected} selected cubes, exact counts"))
}

fn cover_partition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC04E);
    let mut emitted = 0usize;
    for trial in 0..COVER_TRIALS {
        for alpha in [3i64, 5] {
            let dim = 1 + trial % 2;
            let wexp: u32 = rng.gen_range(2..=7);
            let side: i64 = 1 << rng.gen_range(0..=wexp);
            let w = 1i64 << wexp;
            let wa: Vec<i64> = (0..dim).map(|_| rng.gen_range(-64..64)).collect();
            let qa: Vec<i64> = (0..dim).map(|ax| wa[ax] + rng.gen_range(0..=w - side)).collect();
            let window = Cube::new(&wa, w).expect("window");
            let support = Cube::new(&qa, side).expect("support");
            let cover = match partition_cover(&support, alpha, &window) {
                Ok(c) => c,
                Err(e) => return outcome(false, format!("trial {trial}: {e}")),
            };
            let mut tiled = 0usize;
            for (i, c) in cover.iter().enumerate() {
                if !c.dilate(alpha).expect("dilate").contains_cube(&support) {
                    return outcome(false, format!("trial {trial}: support not inside {alpha}{c}"));
                }
                if cover[i + 1..].iter().any(|d| !c.rect().intersect(&d.rect()).is_empty()) {
                    return outcome(false, format!("trial {trial}: overlapping cover cubes"));
                }
                tiled += c.rect().intersect(&window.rect()).num_cells();
            }
            if tiled as u64 != window.num_cells() {
                return outcome(false, format!("trial {trial}: cover misses window cells"));
            }
            emitted += cover.len();
        }
    }
    outcome(true, format!("{} covers, {emitted} cubes, alpha in {{3,5}}", 2 * COVER_TRIALS))
}

/// Fixed physical profile: `1` on `[1/4,1/2)`, `-2` on `[1/2,5/8)`, `1/2` on `[5/8,3/4)`.
fn block_profile(n: usize) -> GridFunction {
    let grid = Grid::new(1, n, 1.0).expect("grid");
    GridFunction::from_fn(grid, |c| {
        let x = grid.center(c)[0];
        let v = if (0.25..0.5).contains(&x) {
            1.0
        } else if (0.5..0.625).contains(&x) {
            -2.0
        } else if (0.625..0.75).contains(&x) {
            0.5
        } else {
            0.0
        };
        Complex64::new(v, 0.0)
    })
    .expect("profile")
}

fn refinement() -> Outcome {
    let k = Kernel::hilbert();
    let cfg = PipelineConfig::default();
    let mut cs = Vec::new();
    for n in [128, 512] {
        match pipeline_passes(&k, &block_profile(n), &cfg) {
            Ok(c) => cs.push(c),
            Err(e) => return outcome(false, format!("N={n}: {e}")),
        }
    }
    let ratio = cs[1].max(cs[0]) / cs[1].min(cs[0]);
    outcome(
        ratio <= REFINEMENT_FACTOR,
        format!("C_emp N=128 {:.3}, N=512 {:.3}, ratio {ratio:.3} (limit {REFINEMENT_FACTOR})", cs[0], cs[1]),
    )
}

fn sharp_surrogate() -> Outcome {
    let k = Kernel::hilbert();
    let policy = CubeSweepPolicy::default();
    let mut ratios = Vec::new();
    for n in [128usize, 256] {
        let grid = Grid::new(1, n, 1.0).expect("grid");
        let f = GridFunction::from_fn(grid, |c| Complex64::new(if c[0] == 0 { 1.0 } else { 0.0 }, 0.0)).expect("f");
        let r = sharp_vs_maximal(&k, &f, 3, 1.0, &policy).expect("sharp");
        if !r.passed {
            return outcome(false, format!("N={n}: report failed at {:?}", r.worst_location));
        }
        ratios.push(r.worst_ratio);
    }
    let change = rel_change(ratios[0], ratios[1]);
    outcome(
        ratios.iter().all(|r| r.is_finite()) && change <= SHARP_STABILITY,
        format!("ratio N=128 {:.4}, N=256 {:.4}, change {:.1}%", ratios[0], ratios[1], 100.0 * change),
    )
}

fn lp_max(base: u64) -> f64 {
    let grid = Grid::new(1, 256, 1.0).expect("grid");
    (0..LP_FAMILIES)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(base);
            rng.set_stream(k);
            let p = rng.gen_range(0.2..0.8);
            let fam = random_sparse_family(grid, &grid.window(), p, &mut rng).expect("family");
            let values: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = GridFunction::from_real(grid, &values).expect("f");
            sparse_lp_ratio(&fam, &f, 1.0, 2.0).expect("ratio")
        })
        .fold(0.0, f64::max)
}

fn lp_surrogate() -> Outcome {
    let a = lp_max(1);
    let b = lp_max(2);
    let change = rel_change(a, b);
    outcome(
        a.is_finite() && b.is_finite() && change <= LP_STABILITY,
        format!("max ratio seed set 1 {a:.4}, seed set 2 {b:.4}, change {:.1}%", 100.0 * change),
    )
}

fn wq_surrogate() -> Outcome {
    let lambdas: Vec<f64> = (1..=8).map(|k| 0.5f64.powi(k)).collect();
    let k = Kernel::hilbert();
    let mut profiles = Vec::new();
    for n in [128, 512] {
        let f = block_profile(n);
        let p = wq_profile(&k, &f, &f.grid().window(), 1.0, &lambdas).expect("profile");
        profiles.push(p.iter().map(|(l, psi)| l * psi).collect::<Vec<f64>>());
    }
    let worst = profiles[0]
        .iter()
        .zip(&profiles[1])
        .map(|(a, b)| rel_change(*a, *b))
        .fold(0.0, f64::max);
    let bound = profiles.iter().flatten().copied().fold(0.0, f64::max);
    outcome(
        bound.is_finite() && worst <= WQ_STABILITY,
        format!("max lambda*psi {bound:.4}, worst per-level change {:.1}%", 100.0 * worst),
    )
}

fn orlicz_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A11C2);
    let mut worst: f64 = 0.0;
    for trial in 0..ORLICZ_TRIPLES {
        let dim = 1 + trial % 2;
        let n = if dim == 1 { 64 } else { 16 };
        let grid = Grid::new(dim, n, rng.gen_range(0.5..4.0)).expect("grid");
        let values: Vec<Complex64> = (0..grid.num_cells())
            .map(|_| Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let f = GridFunction::new(grid, values).expect("f");
        let side = rng.gen_range(1..=n as i64);
        let anchor: Vec<i64> = (0..dim).map(|_| rng.gen_range(0..=n as i64 - side)).collect();
        let q = Cube::new(&anchor, side).expect("cube");
        let p = rng.gen_range(1.0..6.0);
        let want = avg_p(&f, &q, p);
        let got = match orlicz_avg(&f, &q, &PowerYoung(p)) {
            Ok(v) => v,
            Err(e) => return outcome(false, format!("trial {trial}: {e}")),
        };
        worst = worst.max(rel_change(want, got));
    }
    outcome(worst <= ORLICZ_REL_TOL, format!("{ORLICZ_TRIPLES} triples, worst relative error {worst:.2e}"))
}

fn determinism() -> Outcome {
    let cfg = ExperimentConfig::from_json(
        r#"{"seed": 11, "grid": {"dim": 1, "cells_per_side": 128}, "kernel": {"name": "hilbert"},
            "function": {"kind": "random"},
            "verify": {"checks": ["sparsity", "coefficients", "domination", "lp-ratio", "wq-profile", "t1-probe", "sharp-vs-maximal"]}}"#,
    )
    .expect("config");
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut digests = Vec::new();
    for (name, threads) in [("a", 1), ("b", 4)] {
        let dir = tmp.path().join(name);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("pool");
        let run = match pool.install(|| sparsedom_cli::run(&cfg, &dir)) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("run failed: {e:#}")),
        };
        let mut files: Vec<(String, String)> = run
            .manifest
            .files
            .iter()
            .filter(|f| f.deterministic)
            .map(|f| {
                let bytes = std::fs::read(dir.join(&f.path)).expect("file");
                (f.path.clone(), sparsedom_cli::run::digest(&bytes))
            })
            .collect();
        files.sort();
        digests.push(files);
    }
    let same = digests[0] == digests[1] && !digests[0].is_empty();
    outcome(same, format!("{} data files compared by sha256 across 1 and 4 threads", digests[0].len()))
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 10] = [
        ("end-to-end", "Hilbert N=256 sparsity and domination over 20 seeds", end_to_end_hilbert),
        ("rough-kernels", "Holder-1/2 and Dini stress kernels, Dini integral closed forms", rough_kernels),
        ("stopping-time", "sandwich, coverage and measure bound, exact", stopping_time),
        ("cover", "support inside alpha-dilates, tiling of the window", cover_partition),
        ("refinement", "C_emp at N=128 vs N=512 within factor 2", refinement),
        ("sharp-maximal", "sharp vs maximal ratio stable under N 128->256", sharp_surrogate),
        ("lp-ratio", "sparse L^2 ratio over 100 random families stable under reseeding", lp_surrogate),
        ("wq-profile", "lambda*psi(lambda) stable under N 128->512", wq_surrogate),
        ("orlicz", "Orlicz power averages match avg_p", orlicz_consistency),
        ("determinism", "byte-identical data files for identical config and seed", determinism),
    ];
    let mut failed = 0;
    for (id, what, check) in criteria {
        let t = Instant::now();
        let o = check();
        if !o.passed {
            failed += 1;
        }
        println!(
            "{} {id:<14} {what} :: {} [{:.2}s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
