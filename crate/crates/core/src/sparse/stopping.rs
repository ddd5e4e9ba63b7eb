use crate::error::{Error, Result};
use crate::grid::{CellSet, Cube, SummedArea};

/// Maximal dyadic subcubes `P` of `q` with `|P ∩ Ω| > λ|P|`, in depth-first order.
///
/// Every selected cube has density in `(λ, 2^dim λ]`, they are pairwise disjoint and
/// cover `Ω ∩ q` exactly.
pub fn local_cz_decomposition(omega: &CellSet, q: &Cube, lambda: f64) -> Result<Vec<Cube>> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::param(format!("stopping height must be in (0, 1), got {lambda}")));
    }
    if !q.is_power_of_two() {
        return Err(Error::Alignment(format!("cube {q} does not have a power-of-two side")));
    }
    let frame = q.rect();
    let counts = SummedArea::<i64>::from_fn(frame, |c| i64::from(omega.contains(c)));
    let count = |p: &Cube| counts.sum(&p.rect());
    let density = count(q) as f64 / q.num_cells() as f64;
    if density > lambda {
        return Err(Error::Density {
            cube: *q,
            density,
            lambda,
        });
    }
    let mut out = Vec::new();
    let mut stack = vec![*q];
    while let Some(p) = stack.pop() {
        if p.side() == 1 {
            continue;
        }
        let children = p.dyadic_children()?;
        for child in children.into_iter().rev() {
            let m = count(&child);
            if m == 0 {
                continue;
            }
            if m as f64 > lambda * child.num_cells() as f64 {
                out.push(child);
            } else {
                stack.push(child);
            }
        }
    }
    // Depth-first order with children visited in row-major order.
    out.sort_by_key(|c| dfs_key(q, c));
    Ok(out)
}

/// Position of a dyadic subcube in a depth-first walk of `root`, children in row-major order.
fn dfs_key(root: &Cube, c: &Cube) -> Vec<u8> {
    let mut key = Vec::new();
    let mut side = root.side();
    let ra = root.anchor();
    let ca = c.anchor();
    while side > c.side() {
        side /= 2;
        let bx = ((ca[0] - ra[0]) / side) & 1;
        let by = if root.dim() == 2 { ((ca[1] - ra[1]) / side) & 1 } else { 0 };
        key.push((bx + 2 * by) as u8);
    }
    key
}
