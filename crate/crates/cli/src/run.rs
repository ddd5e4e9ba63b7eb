use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sparsedom::grid::{Cube, Grid, GridFunction};
use sparsedom::operators::{dini_constant, hormander_constant, Kernel};
use sparsedom::sparse::{build_sparse_domination, transform_on_window, SparseFamily};
use sparsedom::verify::{
    check_domination_with, check_sparsity, coefficient_audit, sharp_vs_maximal, sparse_lp_ratio,
    sparse_operator, t1_testing_probe, wq_profile, VerificationReport,
};

use crate::config::{Check, ExperimentConfig, Format};
use crate::input;
use crate::ConfigError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    /// Byte-identical across reruns of the same configuration.
    pub deterministic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub stages: Vec<StageTiming>,
    pub files: Vec<FileEntry>,
    pub passed: bool,
    pub c_emp: Option<f64>,
}

/// Result of one run: its manifest and every report it produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub reports: Vec<VerificationReport>,
}

impl RunOutcome {
    pub fn failed_reports(&self) -> impl Iterator<Item = &VerificationReport> {
        self.reports.iter().filter(|r| !r.passed)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

struct Sink {
    root: PathBuf,
    prefix: String,
    files: Vec<FileEntry>,
}

impl Sink {
    fn new(root: &Path, prefix: &str) -> Result<Self> {
        std::fs::create_dir_all(root.join(prefix))
            .with_context(|| format!("creating output directory {}", root.join(prefix).display()))?;
        Ok(Sink { root: root.to_path_buf(), prefix: prefix.to_string(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8], deterministic: bool) -> Result<()> {
        let rel = if self.prefix.is_empty() { name.to_string() } else { format!("{}/{name}", self.prefix) };
        let path = self.root.join(&rel);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(FileEntry { path: rel, sha256: digest(bytes), deterministic });
        Ok(())
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable");
    out.push(b'\n');
    out
}

struct Timer {
    stages: Vec<StageTiming>,
}

impl Timer {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f()?;
        self.stages.push(StageTiming { stage: stage.into(), seconds: t.elapsed().as_secs_f64() });
        Ok(out)
    }
}

fn tag(report: VerificationReport, cfg: &ExperimentConfig) -> VerificationReport {
    let p = &cfg.pipeline;
    let w = &cfg.sweep;
    report
        .with_meta("N", cfg.grid.cells_per_side())
        .with_meta("dim", cfg.grid.dim())
        .with_meta("alpha", p.alpha)
        .with_meta("s", p.s)
        .with_meta("q", p.q)
        .with_meta("r", p.r)
        .with_meta("seed", cfg.seed)
        .with_meta("function_seed", cfg.function_seed())
        .with_meta("kernel", serde_json::to_string(&cfg.kernel).expect("serializable"))
        .with_meta("cfg_abs_tol", cfg.verify.abs_tol)
        .with_meta("cfg_rel_tol", cfg.verify.rel_tol)
        .with_meta("sweep_max_side", w.max_side.map_or("N".to_string(), |m| m.to_string()))
        .with_meta("sweep_anchor_stride", w.anchor_stride)
        .with_meta("sweep_include_outside", w.include_outside)
}

fn finite_report(name: &str, value: f64) -> VerificationReport {
    let mut r = VerificationReport::new(name);
    r.worst_ratio = value;
    r.samples = 1;
    r.passed = value.is_finite();
    r
}

/// Kernel regularity reports for the requested statistics.
pub fn kernel_stats(cfg: &ExperimentConfig, kernel: &Kernel, checks: &[Check]) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for &c in checks.iter().filter(|c| c.is_kernel_stat()) {
        let report = match c {
            Check::Dini => {
                let Some(omega) = kernel.modulus() else {
                    bail!(ConfigError(format!("kernel `{}` has no modulus of continuity", kernel.name())));
                };
                let d = dini_constant(omega)?;
                let mut r = finite_report("dini", d.value)
                    .with_meta("truncated", d.truncated)
                    .with_meta("tail", d.tail)
                    .with_meta("nodes", d.nodes)
                    .with_meta("lower_cutoff", d.lower_cutoff)
                    .with_meta("divergent", d.divergent);
                r.passed &= !d.divergent;
                r.samples = d.nodes as u64;
                r
            }
            Check::Hormander => {
                let v = &cfg.verify;
                let h = hormander_constant(kernel, v.hormander_r, &cfg.grid, v.hormander_k_max)?;
                let mut r = finite_report("hormander", h.value)
                    .with_meta("r", v.hormander_r)
                    .with_meta("k_max", h.k_max)
                    .with_meta("tail", h.tail)
                    .with_meta("cubes", h.cubes)
                    .with_meta("exact_pairs", h.exact_pairs);
                r.samples = h.pairs as u64;
                r
            }
            _ => unreachable!("filtered"),
        };
        out.push(tag(report, cfg));
    }
    Ok(out)
}

fn t1_cube(cfg: &ExperimentConfig) -> Result<Cube> {
    let n = cfg.grid.cells_per_side() as i64;
    let side = cfg.verify.t1_side.unwrap_or((n / 2).max(1));
    let a = (n - side) / 2;
    Ok(Cube::new(&[a, a][..cfg.grid.dim()], side)?)
}

/// The testing-condition probe on the configured cube.
pub fn t1_report(cfg: &ExperimentConfig, kernel: &Kernel) -> Result<VerificationReport> {
    let q = t1_cube(cfg)?;
    let r = t1_testing_probe(kernel, &cfg.grid, &q, cfg.verify.t1_trials, cfg.seed)?;
    Ok(tag(r, cfg))
}

/// Checks that need only the family, the function and the configuration.
pub fn family_checks(
    cfg: &ExperimentConfig,
    family: &SparseFamily,
    f: &GridFunction,
    kernel: &Kernel,
    checks: &[Check],
) -> Result<(Vec<VerificationReport>, Vec<(f64, f64)>)> {
    let v = &cfg.verify;
    let s = cfg.pipeline.s;
    let mut reports = Vec::new();
    let mut profile = Vec::new();
    for &c in checks.iter().filter(|c| !c.is_kernel_stat()) {
        let report = match c {
            Check::Sparsity => check_sparsity(family, family.eta),
            Check::Coefficients => {
                let mut r = coefficient_audit(family, f, s).with_meta("rel_tol", v.rel_tol);
                r.passed = r.worst_ratio <= v.rel_tol;
                r
            }
            Check::Domination => {
                let Some(c) = family.constant else {
                    bail!(ConfigError("the sparse family carries no domination constant".into()));
                };
                let tf = transform_on_window(kernel, f)?;
                let a = sparse_operator(family, f, s)?;
                check_domination_with(&tf, &a, c, v.abs_tol)
            }
            Check::LpRatio => {
                let ratio = sparse_lp_ratio(family, f, s, v.lp_p)?;
                finite_report("lp-ratio", ratio).with_meta("p", v.lp_p)
            }
            Check::WqProfile => {
                profile = wq_profile(kernel, f, &cfg.grid.window(), cfg.pipeline.q, &v.lambdas)?;
                let mut r = VerificationReport::new("wq-profile");
                r.samples = profile.len() as u64;
                for &(l, psi) in &profile {
                    if l * psi > r.worst_ratio {
                        r.worst_ratio = l * psi;
                        r.worst_location = Some(format!("lambda={l}"));
                    }
                }
                r.passed = r.worst_ratio.is_finite();
                r
            }
            Check::T1Probe => t1_testing_probe(kernel, &cfg.grid, &t1_cube(cfg)?, v.t1_trials, cfg.seed)?,
            Check::SharpVsMaximal => sharp_vs_maximal(kernel, f, cfg.pipeline.alpha, v.rp, &cfg.sweep)?,
            Check::Dini | Check::Hormander => unreachable!("filtered"),
        };
        reports.push(tag(report, cfg));
    }
    Ok((reports, profile))
}

fn reports_csv(reports: &[VerificationReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "passed", "worst_ratio", "location", "N", "alpha", "s", "q", "r", "seed"])?;
    for r in reports {
        let m = |k: &str| r.metadata.get(k).cloned().unwrap_or_default();
        w.write_record([
            r.name.clone(),
            r.passed.to_string(),
            r.worst_ratio.to_string(),
            r.worst_location.clone().unwrap_or_default(),
            m("N"),
            m("alpha"),
            m("s"),
            m("q"),
            m("r"),
            m("seed"),
        ])?;
    }
    Ok(w.into_inner()?)
}

fn write_reports(sink: &mut Sink, cfg: &ExperimentConfig, reports: &[VerificationReport]) -> Result<()> {
    if cfg.output.formats.contains(&Format::Json) || !cfg.output.formats.contains(&Format::Csv) {
        sink.write("reports.json", &json(&reports), true)?;
    }
    if cfg.output.formats.contains(&Format::Csv) {
        sink.write("reports.csv", &reports_csv(reports)?, true)?;
    }
    Ok(())
}

fn manifest(cfg: &ExperimentConfig, timer: Timer, sink: Sink, reports: &[VerificationReport], c_emp: Option<f64>) -> RunManifest {
    RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        stages: timer.stages,
        files: sink.files,
        passed: reports.iter().all(|r| r.passed),
        c_emp,
    }
}

fn write_manifest(root: &Path, prefix: &str, m: &RunManifest) -> Result<()> {
    let path = root.join(prefix).join(MANIFEST_FILE);
    std::fs::write(&path, json(m)).with_context(|| format!("writing {}", path.display()))
}

/// Kernel statistics, construction and verification, writing every artifact under `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    run_in(cfg, out, "")
}

fn run_in(cfg: &ExperimentConfig, root: &Path, prefix: &str) -> Result<RunOutcome> {
    cfg.validate()?;
    let kernel = cfg.kernel()?;
    let mut sink = Sink::new(root, prefix)?;
    let mut timer = Timer { stages: Vec::new() };
    let checks = &cfg.verify.checks;
    let mut reports = Vec::new();

    if checks.iter().any(|c| c.is_kernel_stat()) {
        let stats = timer.time("kernel-stats", || kernel_stats(cfg, &kernel, checks))?;
        sink.write("kernel_stats.json", &json(&stats), true)?;
        reports.extend(stats);
    }

    let f = input::generate(cfg)?;
    let out = timer.time("construction", || {
        Ok(build_sparse_domination(&f, &kernel, &cfg.pipeline_config(), &cfg.grid.window())?)
    })?;
    sink.write("function.json", &json(&f.to_record()), true)?;
    let formats = &cfg.output.formats;
    if formats.contains(&Format::Text) {
        sink.write("family.txt", out.family.to_text().as_bytes(), true)?;
    }
    if formats.contains(&Format::Json) || !formats.contains(&Format::Text) {
        sink.write("family.json", out.family.to_json().as_bytes(), true)?;
    }
    sink.write("ledger.json", &json(&out.ledger), true)?;

    let (verified, profile) = timer.time("verification", || family_checks(cfg, &out.family, &f, &kernel, checks))?;
    reports.extend(verified);
    if !profile.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["lambda", "psi", "lambda_psi"])?;
        for (l, p) in &profile {
            w.write_record([l.to_string(), p.to_string(), (l * p).to_string()])?;
        }
        sink.write("wq_profile.csv", &w.into_inner()?, true)?;
    }
    write_reports(&mut sink, cfg, &reports)?;

    let m = manifest(cfg, timer, sink, &reports, Some(out.c_emp));
    write_manifest(root, prefix, &m)?;
    Ok(RunOutcome { manifest: m, reports })
}

/// Only the kernel statistics stage.
pub fn run_kernel_stats(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let kernel = cfg.kernel()?;
    let mut sink = Sink::new(out, "")?;
    let mut timer = Timer { stages: Vec::new() };
    let mut checks: Vec<Check> = cfg.verify.checks.iter().copied().filter(|c| c.is_kernel_stat()).collect();
    if checks.is_empty() {
        if kernel.modulus().is_some() {
            checks.push(Check::Dini);
        }
        if cfg.grid.cells_per_side() >= 8 {
            checks.push(Check::Hormander);
        }
    }
    let reports = timer.time("kernel-stats", || kernel_stats(cfg, &kernel, &checks))?;
    sink.write("kernel_stats.json", &json(&reports), true)?;
    write_reports(&mut sink, cfg, &reports)?;
    let m = manifest(cfg, timer, sink, &reports, None);
    write_manifest(out, "", &m)?;
    Ok(RunOutcome { manifest: m, reports })
}

/// Only the testing-condition probe.
pub fn run_t1_probe(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let kernel = cfg.kernel()?;
    let mut sink = Sink::new(out, "")?;
    let mut timer = Timer { stages: Vec::new() };
    let report = timer.time("t1-probe", || t1_report(cfg, &kernel))?;
    let reports = vec![report];
    write_reports(&mut sink, cfg, &reports)?;
    let m = manifest(cfg, timer, sink, &reports, None);
    write_manifest(out, "", &m)?;
    Ok(RunOutcome { manifest: m, reports })
}

/// Re-checks a stored family against a stored function.
pub fn run_verify(cfg: &ExperimentConfig, family_path: &Path, function_path: &Path, out: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let kernel = cfg.kernel()?;
    let text = std::fs::read_to_string(family_path)
        .with_context(|| format!("reading family {}", family_path.display()))?;
    let family = if text.trim_start().starts_with('{') {
        SparseFamily::from_json(&text)?
    } else {
        SparseFamily::from_text(&text)?
    };
    let ftext = std::fs::read_to_string(function_path)
        .with_context(|| format!("reading function {}", function_path.display()))?;
    let f = input::read_function(&ftext, cfg)?;
    if family.grid != cfg.grid {
        bail!(ConfigError("the family grid differs from the configured grid".into()));
    }
    let mut sink = Sink::new(out, "")?;
    let mut timer = Timer { stages: Vec::new() };
    let checks: Vec<Check> = if cfg.verify.checks.is_empty() {
        vec![Check::Sparsity, Check::Coefficients, Check::Domination]
    } else {
        cfg.verify.checks.clone()
    };
    let (reports, _) = timer.time("verification", || family_checks(cfg, &family, &f, &kernel, &checks))?;
    write_reports(&mut sink, cfg, &reports)?;
    let m = manifest(cfg, timer, sink, &reports, family.constant);
    write_manifest(out, "", &m)?;
    Ok(RunOutcome { manifest: m, reports })
}

/// Parameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    N,
    Alpha,
    S,
    MaxDepth,
    Seed,
}

impl std::str::FromStr for Axis {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Ok(match s {
            "N" | "n" => Axis::N,
            "alpha" => Axis::Alpha,
            "s" => Axis::S,
            "max_depth" | "max-depth" => Axis::MaxDepth,
            "seed" => Axis::Seed,
            other => {
                return Err(ConfigError(format!(
                    "unknown sweep axis `{other}` (expected N, alpha, s, max_depth or seed)"
                )))
            }
        })
    }
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::N => "N",
            Axis::Alpha => "alpha",
            Axis::S => "s",
            Axis::MaxDepth => "max_depth",
            Axis::Seed => "seed",
        }
    }

    /// Configuration with this axis set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: &str) -> Result<ExperimentConfig, ConfigError> {
        let bad = |e: &dyn std::fmt::Display| ConfigError(format!("bad {} value `{value}`: {e}", self.name()));
        let mut c = cfg.clone();
        match self {
            Axis::N => {
                let n: usize = value.parse().map_err(|e| bad(&e))?;
                c.grid = Grid::new(cfg.grid.dim(), n, cfg.grid.phys_side()).map_err(|e| bad(&e))?;
            }
            Axis::Alpha => c.pipeline.alpha = value.parse().map_err(|e| bad(&e))?,
            Axis::S => c.pipeline.s = value.parse().map_err(|e| bad(&e))?,
            Axis::MaxDepth => c.pipeline.max_depth = Some(value.parse().map_err(|e| bad(&e))?),
            Axis::Seed => c.seed = value.parse().map_err(|e| bad(&e))?,
        }
        c.validate()?;
        Ok(c)
    }
}

pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_RUNTIME_FILE: &str = "sweep_runtime.csv";

/// One sub-run per value, each under `<axis>-<value>/`, plus the combined tables.
pub fn sweep(cfg: &ExperimentConfig, axis: Axis, values: &[String], out: &Path) -> Result<RunOutcome> {
    if values.is_empty() {
        bail!(ConfigError("sweep needs at least one value".into()));
    }
    cfg.validate()?;
    let subs = values
        .iter()
        .map(|v| axis.apply(cfg, v))
        .collect::<Result<Vec<_>, _>>()?;
    let outcomes = values
        .par_iter()
        .zip(&subs)
        .map(|(v, c)| run_in(c, out, &format!("{}-{v}", axis.name())))
        .collect::<Result<Vec<_>>>()?;

    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["axis", "value", "check", "passed", "c_emp", "worst_ratio"])?;
    let mut runtime = csv::Writer::from_writer(Vec::new());
    runtime.write_record(["axis", "value", "stage", "seconds"])?;
    let mut sink = Sink::new(out, "")?;
    let mut reports = Vec::new();
    for (v, o) in values.iter().zip(&outcomes) {
        let c_emp = o.manifest.c_emp.map_or(String::new(), |c| c.to_string());
        for r in &o.reports {
            table.write_record([
                axis.name(),
                v,
                &r.name,
                &r.passed.to_string(),
                &c_emp,
                &r.worst_ratio.to_string(),
            ])?;
        }
        for s in &o.manifest.stages {
            runtime.write_record([axis.name(), v, &s.stage, &s.seconds.to_string()])?;
        }
        let sub = format!("{}-{v}", axis.name());
        sink.files.extend(o.manifest.files.iter().cloned());
        let mbytes = std::fs::read(out.join(&sub).join(MANIFEST_FILE))?;
        sink.files.push(FileEntry { path: format!("{sub}/{MANIFEST_FILE}"), sha256: digest(&mbytes), deterministic: false });
        reports.extend(o.reports.iter().cloned());
    }
    sink.write(SWEEP_FILE, &table.into_inner()?, true)?;
    sink.write(SWEEP_RUNTIME_FILE, &runtime.into_inner()?, false)?;
    let stages = outcomes
        .iter()
        .zip(values)
        .flat_map(|(o, v)| {
            o.manifest.stages.iter().map(move |s| StageTiming {
                stage: format!("{}={v}/{}", axis.name(), s.stage),
                seconds: s.seconds,
            })
        })
        .collect();
    let m = manifest(cfg, Timer { stages }, sink, &reports, None);
    write_manifest(out, "", &m)?;
    Ok(RunOutcome { manifest: m, reports })
}
