use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellSet, Cube, Grid};

/// One cube of a sparse family with its witness set `E ⊆ cube` and coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseEntry {
    pub cube: Cube,
    pub witness: CellSet,
    pub coefficient: f64,
    /// Emitted because the recursion stopped early rather than by the stopping time.
    pub terminal: bool,
}

/// Cubes with pairwise disjoint witnesses, each owning at least an `eta` fraction of its cube.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseFamily {
    pub grid: Grid,
    pub eta: f64,
    /// Domination constant the family was built for, when known.
    pub constant: Option<f64>,
    pub entries: Vec<SparseEntry>,
}

/// Alternating run lengths of the witness over the cube's cells in row-major order,
/// starting with a run of non-members (possibly empty).
fn witness_runs(e: &SparseEntry) -> Vec<u64> {
    let mut runs = Vec::new();
    let mut state = false;
    let mut len = 0u64;
    for c in e.cube.cells() {
        let m = e.witness.contains(c);
        if m != state {
            runs.push(len);
            state = m;
            len = 0;
        }
        len += 1;
    }
    runs.push(len);
    runs
}

fn witness_from_runs(grid: Grid, cube: &Cube, runs: &[u64]) -> Result<CellSet> {
    let total: u64 = runs.iter().sum();
    if total != cube.num_cells() {
        return Err(Error::Parse(format!(
            "witness runs cover {total} cells of a {}-cell cube {cube}",
            cube.num_cells()
        )));
    }
    let mut mask = Vec::with_capacity(total as usize);
    for (k, &r) in runs.iter().enumerate() {
        mask.extend(std::iter::repeat(k % 2 == 1).take(r as usize));
    }
    CellSet::from_mask(grid, cube.rect(), mask)
}

/// JSON form of a [`SparseFamily`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseFamilyRecord {
    pub grid: Grid,
    pub eta: f64,
    #[serde(default)]
    pub constant: Option<f64>,
    pub entries: Vec<SparseEntryRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseEntryRecord {
    pub cube: Cube,
    pub coefficient: f64,
    #[serde(default)]
    pub terminal: bool,
    pub witness_count: u64,
    pub witness_runs: Vec<u64>,
}

impl SparseFamily {
    pub fn new(grid: Grid, eta: f64) -> Self {
        SparseFamily {
            grid,
            eta,
            constant: None,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_record(&self) -> SparseFamilyRecord {
        SparseFamilyRecord {
            grid: self.grid,
            eta: self.eta,
            constant: self.constant,
            entries: self
                .entries
                .iter()
                .map(|e| SparseEntryRecord {
                    cube: e.cube,
                    coefficient: e.coefficient,
                    terminal: e.terminal,
                    witness_count: e.cube.cells().filter(|&c| e.witness.contains(c)).count() as u64,
                    witness_runs: witness_runs(e),
                })
                .collect(),
        }
    }

    pub fn from_record(r: SparseFamilyRecord) -> Result<Self> {
        let mut entries = Vec::with_capacity(r.entries.len());
        for e in r.entries {
            r.grid.check_cube(&e.cube)?;
            let witness = witness_from_runs(r.grid, &e.cube, &e.witness_runs)?;
            if witness.count() as u64 != e.witness_count {
                return Err(Error::Parse(format!(
                    "witness of {} declares {} cells but its runs hold {}",
                    e.cube,
                    e.witness_count,
                    witness.count()
                )));
            }
            entries.push(SparseEntry {
                cube: e.cube,
                witness,
                coefficient: e.coefficient,
                terminal: e.terminal,
            });
        }
        Ok(SparseFamily {
            grid: r.grid,
            eta: r.eta,
            constant: r.constant,
            entries,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("family records always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: SparseFamilyRecord =
            serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_record(r)
    }

    /// Line-oriented text form:
    ///
    /// ```text
    /// sparse-family 1
    /// grid <dim> <N> <L>
    /// eta <eta>
    /// constant <C | none>
    /// entries <count>
    /// <anchor...> <side> <coefficient> <terminal 0|1> <witness count> <runs...>
    /// ```
    pub fn to_text(&self) -> String {
        let rec = self.to_record();
        let mut out = String::new();
        let g = &self.grid;
        let _ = writeln!(out, "sparse-family 1");
        let _ = writeln!(out, "grid {} {} {:e}", g.dim(), g.cells_per_side(), g.phys_side());
        let _ = writeln!(out, "eta {:e}", self.eta);
        match self.constant {
            Some(c) => {
                let _ = writeln!(out, "constant {c:e}");
            }
            None => {
                let _ = writeln!(out, "constant none");
            }
        }
        let _ = writeln!(out, "entries {}", rec.entries.len());
        for e in &rec.entries {
            let a = e.cube.anchor();
            for v in &a[..g.dim()] {
                let _ = write!(out, "{v} ");
            }
            let _ = write!(
                out,
                "{} {:e} {} {}",
                e.cube.side(),
                e.coefficient,
                u8::from(e.terminal),
                e.witness_count
            );
            for r in &e.witness_runs {
                let _ = write!(out, " {r}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(s: &str) -> Result<Self> {
        fn bad(msg: impl Into<String>) -> Error {
            Error::Parse(msg.into())
        }
        fn num<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
            tok.ok_or_else(|| bad(format!("missing {what}")))?
                .parse()
                .map_err(|_| bad(format!("malformed {what}")))
        }
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let mut header = |key: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| bad(format!("missing `{key}` line")))?;
            let mut toks = line.split_whitespace();
            if toks.next() != Some(key) {
                return Err(bad(format!("expected `{key}` line, got `{line}`")));
            }
            Ok(toks.map(str::to_string).collect())
        };
        let v = header("sparse-family")?;
        if v.first().map(String::as_str) != Some("1") {
            return Err(bad("unsupported sparse-family version"));
        }
        let g = header("grid")?;
        let mut gi = g.iter().map(String::as_str);
        let grid = Grid::new(num(gi.next(), "dim")?, num(gi.next(), "N")?, num(gi.next(), "L")?)?;
        let eta: f64 = num(header("eta")?.first().map(String::as_str), "eta")?;
        let c = header("constant")?;
        let constant = match c.first().map(String::as_str) {
            Some("none") => None,
            other => Some(num(other, "constant")?),
        };
        let count: usize = num(header("entries")?.first().map(String::as_str), "entry count")?;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines.next().ok_or_else(|| bad("fewer entries than declared"))?;
            let mut t = line.split_whitespace();
            let mut anchor = Vec::with_capacity(grid.dim());
            for _ in 0..grid.dim() {
                anchor.push(num::<i64>(t.next(), "anchor")?);
            }
            let side: i64 = num(t.next(), "side")?;
            let coefficient: f64 = num(t.next(), "coefficient")?;
            let terminal = match t.next() {
                Some("0") => false,
                Some("1") => true,
                _ => return Err(bad("terminal flag must be 0 or 1")),
            };
            let witness_count: u64 = num(t.next(), "witness count")?;
            let witness_runs = t
                .map(|x| x.parse::<u64>().map_err(|_| bad("malformed run length")))
                .collect::<Result<Vec<_>>>()?;
            entries.push(SparseEntryRecord {
                cube: Cube::new(&anchor, side)?,
                coefficient,
                terminal,
                witness_count,
                witness_runs,
            });
        }
        if lines.next().is_some() {
            return Err(bad("more entries than declared"));
        }
        Self::from_record(SparseFamilyRecord {
            grid,
            eta,
            constant,
            entries,
        })
    }
}
