//! Minimum-cost rectangular assignment.
//!
//! The matrix is padded to square with zero-cost dummy rows or columns and
//! solved with the shortest-augmenting-path Hungarian method, which also yields
//! optimal dual potentials. Every optimal assignment uses only tight edges
//! (zero reduced cost) under those potentials, so the lexicographically
//! smallest optimal assignment is found by fixing rows in order to their
//! smallest tight column that still admits a perfect tight matching.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row; `min(n, m)` of them.
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

/// Solves the assignment problem for an `n × m` matrix of finite nonnegative
/// costs. An empty matrix yields an empty assignment with cost 0.
pub fn hungarian_assign(cost: &[Vec<f64>]) -> Result<Assignment> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    for (i, row) in cost.iter().enumerate() {
        if row.len() != m {
            return Err(Error::Validation(format!(
                "cost[{i}]: expected {m} columns, found {}",
                row.len()
            )));
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Validation(format!(
                "cost[{i}]: entries must be finite and nonnegative, found {v}"
            )));
        }
    }
    if n == 0 || m == 0 {
        return Ok(Assignment {
            pairs: Vec::new(),
            total_cost: 0.0,
        });
    }

    let size = n.max(m);
    let at = |i: usize, j: usize| if i < n && j < m { cost[i][j] } else { 0.0 };
    let (u, v, mut row_of_col) = solve_square(size, at);
    let mut col_of_row = vec![usize::MAX; size];
    for (j, &i) in row_of_col.iter().enumerate() {
        col_of_row[i] = j;
    }

    let scale = cost.iter().flatten().fold(1.0f64, |a, &b| a.max(b));
    let eps = 1e-9 * scale * size as f64;
    let tight = |i: usize, j: usize| at(i, j) - u[i] - v[j] <= eps;

    let mut fixed_row = vec![false; size];
    let mut fixed_col = vec![false; size];
    for r in 0..n {
        for c in 0..size {
            if fixed_col[c] || !tight(r, c) {
                continue;
            }
            if col_of_row[r] == c {
                break;
            }
            // Give c to r; the row holding c must reach r's old column through an
            // alternating path over unfixed tight edges.
            let displaced = row_of_col[c];
            let target = col_of_row[r];
            fixed_row[r] = true;
            fixed_col[c] = true;
            let mut seen = vec![false; size];
            let mut path = Vec::new();
            if find_alternating(
                displaced,
                target,
                &tight,
                &fixed_col,
                &row_of_col,
                &mut seen,
                &mut path,
            ) {
                // path holds the columns visited from `displaced`, ending at target
                let mut row = displaced;
                for &col in &path {
                    let next = row_of_col[col];
                    row_of_col[col] = row;
                    col_of_row[row] = col;
                    row = next;
                }
                row_of_col[c] = r;
                col_of_row[r] = c;
                fixed_row[r] = false;
                fixed_col[c] = false;
                break;
            }
            fixed_row[r] = false;
            fixed_col[c] = false;
        }
        fixed_row[r] = true;
        fixed_col[col_of_row[r]] = true;
    }

    let pairs: Vec<(usize, usize)> = (0..n)
        .filter(|&r| col_of_row[r] < m)
        .map(|r| (r, col_of_row[r]))
        .collect();
    let total_cost = pairs.iter().map(|&(r, c)| cost[r][c]).sum();
    Ok(Assignment { pairs, total_cost })
}

/// DFS for an alternating path from `row` to the free column `target` using
/// tight edges into unfixed columns; records the columns along the path.
fn find_alternating(
    row: usize,
    target: usize,
    tight: &impl Fn(usize, usize) -> bool,
    fixed_col: &[bool],
    row_of_col: &[usize],
    seen: &mut [bool],
    path: &mut Vec<usize>,
) -> bool {
    for col in 0..seen.len() {
        if seen[col] || fixed_col[col] || !tight(row, col) {
            continue;
        }
        seen[col] = true;
        path.push(col);
        if col == target
            || find_alternating(
                row_of_col[col],
                target,
                tight,
                fixed_col,
                row_of_col,
                seen,
                path,
            )
        {
            return true;
        }
        path.pop();
    }
    false
}

/// Square Hungarian method. Returns row potentials, column potentials and the
/// row assigned to each column.
fn solve_square(size: usize, at: impl Fn(usize, usize) -> f64) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    // 1-based arrays with index 0 as the virtual source
    let mut u = vec![0.0; size + 1];
    let mut v = vec![0.0; size + 1];
    let mut p = vec![0usize; size + 1];
    let mut way = vec![0usize; size + 1];
    for i in 1..=size {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; size + 1];
        let mut used = vec![false; size + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=size {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=size {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let row_of_col = (1..=size).map(|j| p[j] - 1).collect();
    (u[1..].to_vec(), v[1..].to_vec(), row_of_col)
}
