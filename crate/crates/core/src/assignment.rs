//! Exact minimum-cost assignment on dense rectangular matrices.
//!
//! The solver is the shortest-augmenting-path form of the Hungarian method
//! (O(n²m) with n ≤ m), run on the transpose when there are more rows than
//! columns. Among all optimal matchings the one with the lexicographically
//! smallest sorted pair list is returned: the optimal dual potentials restrict
//! the search to tight edges, and each candidate improvement is confirmed by a
//! constrained re-solve.

use crate::error::{Error, Result};

/// Dense `rows × cols` matrix of finite costs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: entries.len(),
            });
        }
        if let Some(idx) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteCost {
                row: idx / cols,
                col: idx % cols,
                value: entries[idx],
            });
        }
        Ok(CostMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: bad.len(),
            });
        }
        CostMatrix::new(n, m, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    pub fn transpose(&self) -> CostMatrix {
        let mut entries = Vec::with_capacity(self.entries.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                entries.push(self.get(r, c));
            }
        }
        CostMatrix {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// A matching of size `min(rows, cols)`, pairs sorted by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl Assignment {
    /// Column assigned to `row`, if any.
    pub fn col_for(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }
}

pub fn solve_min_assignment(m: &CostMatrix) -> Result<Assignment> {
    if m.rows == 0 || m.cols == 0 {
        return Err(Error::EmptyMatrix {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let base = solve_raw(m);
    let k = m.rows.min(m.cols);
    let tol = 1e-9 * (1.0 + m.max_abs() * k as f64);

    let mut current: Vec<Option<usize>> = vec![None; m.rows];
    for &(r, c) in &base.pairs {
        current[r] = Some(c);
    }

    let mut fixed: Vec<(usize, usize)> = Vec::with_capacity(k);
    let mut row_done = vec![false; m.rows];
    let mut col_used = vec![false; m.cols];

    for r in 0..m.rows {
        if fixed.len() == k {
            break;
        }
        let limit = current[r].unwrap_or(m.cols);
        for c in 0..limit {
            if col_used[c] || base.reduced(m, r, c) > tol {
                continue;
            }
            let mut trial = fixed.clone();
            trial.push((r, c));
            let mut done = row_done.clone();
            done[r] = true;
            let mut used = col_used.clone();
            used[c] = true;
            if let Some((pairs, total)) = constrained_solve(m, &trial, &done, &used, k) {
                if (total - base.total).abs() <= tol {
                    current.iter_mut().for_each(|x| *x = None);
                    for (pr, pc) in pairs {
                        current[pr] = Some(pc);
                    }
                    break;
                }
            }
        }
        row_done[r] = true;
        if let Some(c) = current[r] {
            fixed.push((r, c));
            col_used[c] = true;
        }
    }

    fixed.sort_unstable();
    let total_cost = fixed.iter().map(|&(r, c)| m.get(r, c)).sum();
    Ok(Assignment {
        pairs: fixed,
        total_cost,
    })
}

/// Optimum over matchings that contain `fixed`, leave rows marked in
/// `row_done` (but not in `fixed`) unmatched and have `k` pairs in total.
fn constrained_solve(
    m: &CostMatrix,
    fixed: &[(usize, usize)],
    row_done: &[bool],
    col_used: &[bool],
    k: usize,
) -> Option<(Vec<(usize, usize)>, f64)> {
    let fixed_cost: f64 = fixed.iter().map(|&(r, c)| m.get(r, c)).sum();
    let needed = k - fixed.len();
    let free_rows: Vec<usize> = (0..m.rows).filter(|&r| !row_done[r]).collect();
    let free_cols: Vec<usize> = (0..m.cols).filter(|&c| !col_used[c]).collect();
    if needed == 0 {
        return Some((fixed.to_vec(), fixed_cost));
    }
    if free_rows.len().min(free_cols.len()) != needed {
        return None;
    }
    let mut entries = Vec::with_capacity(free_rows.len() * free_cols.len());
    for &r in &free_rows {
        for &c in &free_cols {
            entries.push(m.get(r, c));
        }
    }
    let sub = CostMatrix {
        rows: free_rows.len(),
        cols: free_cols.len(),
        entries,
    };
    let raw = solve_raw(&sub);
    let mut pairs = fixed.to_vec();
    pairs.extend(raw.pairs.iter().map(|&(r, c)| (free_rows[r], free_cols[c])));
    Some((pairs, fixed_cost + raw.total))
}

struct RawSolution {
    pairs: Vec<(usize, usize)>,
    total: f64,
    /// Potentials of the solved orientation, 1-based as in the solver.
    u: Vec<f64>,
    v: Vec<f64>,
    transposed: bool,
}

impl RawSolution {
    /// Reduced cost of `(row, col)` in the caller's orientation.
    fn reduced(&self, m: &CostMatrix, row: usize, col: usize) -> f64 {
        let (i, j) = if self.transposed {
            (col, row)
        } else {
            (row, col)
        };
        m.get(row, col) - self.u[i + 1] - self.v[j + 1]
    }
}

fn solve_raw(m: &CostMatrix) -> RawSolution {
    if m.rows <= m.cols {
        let (row_to_col, u, v) = hungarian_wide(m);
        let pairs: Vec<_> = row_to_col.into_iter().enumerate().collect();
        let total = pairs.iter().map(|&(r, c)| m.get(r, c)).sum();
        RawSolution {
            pairs,
            total,
            u,
            v,
            transposed: false,
        }
    } else {
        let t = m.transpose();
        let (col_to_row, u, v) = hungarian_wide(&t);
        let mut pairs: Vec<_> = col_to_row
            .into_iter()
            .enumerate()
            .map(|(c, r)| (r, c))
            .collect();
        pairs.sort_unstable();
        let total = pairs.iter().map(|&(r, c)| m.get(r, c)).sum();
        RawSolution {
            pairs,
            total,
            u,
            v,
            transposed: true,
        }
    }
}

/// Hungarian method for `rows ≤ cols`. Returns the column of every row and
/// the 1-based dual potentials (u over rows, v over columns).
fn hungarian_wide(m: &CostMatrix) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = m.rows;
    let w = m.cols;
    debug_assert!(n <= w);

    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; w + 1];
    // p[j]: row matched to column j (1-based, 0 = free); way: augmenting path.
    let mut p = vec![0usize; w + 1];
    let mut way = vec![0usize; w + 1];
    let mut minv = vec![0.0f64; w + 1];
    let mut used = vec![false; w + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);

        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=w {
                if used[j] {
                    continue;
                }
                let cur = m.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=w {
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

    let mut row_to_col = vec![0usize; n];
    for j in 1..=w {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    (row_to_col, u, v)
}
