//! Sparse LU factorization of a simplex basis.
//!
//! Left-looking column factorization with partial pivoting. Basis matrices
//! here are staircase-shaped (storage chains plus a few coupling rows), so
//! with columns processed in min-row order the fill-in stays small.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LuError {
    #[error("basis is singular at elimination step {step} (max pivot {max_abs:.3e})")]
    Singular { step: usize, max_abs: f64 },
}

const PIVOT_ABS_TOL: f64 = 1e-12;

/// LU factors of one basis. `solve` computes `B x = b`; `solve_transpose`
/// computes `B' y = c` (duals).
pub struct LuFactors {
    m: usize,
    /// Elimination step -> original row chosen as pivot.
    pivot_row: Vec<usize>,
    /// Original row -> elimination step.
    step_of_row: Vec<usize>,
    /// Elimination step -> basis position of the column factored there.
    col_at_step: Vec<usize>,
    /// L column per step: (original row, multiplier), unit diagonal implicit.
    l_cols: Vec<Vec<(usize, f64)>>,
    /// U column per step: (earlier step, value); diagonal kept separately.
    u_cols: Vec<Vec<(usize, f64)>>,
    u_diag: Vec<f64>,
}

impl LuFactors {
    /// Factor the basis given as `m` sparse columns (row, value).
    pub fn factor(m: usize, columns: &[&[(usize, f64)]]) -> Result<Self, LuError> {
        assert_eq!(columns.len(), m, "basis must be square");

        // Near-triangular orderings come from processing columns by their
        // topmost row.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&j| {
            let min_row = columns[j].iter().map(|&(r, _)| r).min().unwrap_or(usize::MAX);
            (min_row, j)
        });

        let mut lu = LuFactors {
            m,
            pivot_row: Vec::with_capacity(m),
            step_of_row: vec![usize::MAX; m],
            col_at_step: Vec::with_capacity(m),
            l_cols: Vec::with_capacity(m),
            u_cols: Vec::with_capacity(m),
            u_diag: Vec::with_capacity(m),
        };

        let mut work = vec![0.0f64; m];
        let mut touched: Vec<usize> = Vec::with_capacity(64);

        for (step, &j) in order.iter().enumerate() {
            // Scatter column j.
            for &(row, val) in columns[j] {
                if work[row] == 0.0 {
                    touched.push(row);
                }
                work[row] += val;
            }

            // Eliminate against earlier pivots in increasing step order.
            // Updates can hit rows that are pivots of later steps, so the
            // worklist grows as we go.
            let mut pending: std::collections::BTreeSet<usize> = touched
                .iter()
                .filter_map(|&r| {
                    let s = lu.step_of_row[r];
                    (s != usize::MAX).then_some(s)
                })
                .collect();
            let mut u_col: Vec<(usize, f64)> = Vec::new();
            while let Some(s) = pending.pop_first() {
                let val = work[lu.pivot_row[s]];
                if val == 0.0 {
                    continue;
                }
                u_col.push((s, val));
                for &(row, l) in &lu.l_cols[s] {
                    if work[row] == 0.0 {
                        touched.push(row);
                        let s2 = lu.step_of_row[row];
                        if s2 != usize::MAX && s2 > s {
                            pending.insert(s2);
                        }
                    }
                    work[row] -= val * l;
                }
            }

            // Partial pivot among rows not yet pivotal.
            let mut pivot = usize::MAX;
            let mut max_abs = 0.0f64;
            for &r in &touched {
                if lu.step_of_row[r] == usize::MAX {
                    let a = work[r].abs();
                    if a > max_abs || (a == max_abs && pivot != usize::MAX && r < pivot) {
                        max_abs = a;
                        pivot = r;
                    }
                }
            }
            if pivot == usize::MAX || max_abs <= PIVOT_ABS_TOL {
                // Clean up the work vector before bailing out.
                for &r in &touched {
                    work[r] = 0.0;
                }
                return Err(LuError::Singular { step, max_abs });
            }

            let diag = work[pivot];
            let mut l_col: Vec<(usize, f64)> = Vec::new();
            for &r in &touched {
                if r != pivot && lu.step_of_row[r] == usize::MAX && work[r] != 0.0 {
                    l_col.push((r, work[r] / diag));
                }
            }
            l_col.sort_unstable_by_key(|&(r, _)| r);
            u_col.sort_unstable_by_key(|&(s, _)| s);

            for &r in &touched {
                work[r] = 0.0;
            }
            touched.clear();

            lu.pivot_row.push(pivot);
            lu.step_of_row[pivot] = step;
            lu.col_at_step.push(j);
            lu.l_cols.push(l_col);
            lu.u_cols.push(u_col);
            lu.u_diag.push(diag);
        }

        Ok(lu)
    }

    /// Solve `B x = b`. `b` is dense of length m; the result is indexed by
    /// basis position.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = b.to_vec();
        // L y' = b (forward, step order).
        for s in 0..self.m {
            let val = y[self.pivot_row[s]];
            if val != 0.0 {
                for &(row, l) in &self.l_cols[s] {
                    y[row] -= val * l;
                }
            }
        }
        // U z = y' (backward over steps).
        let mut x = vec![0.0; self.m];
        for t in (0..self.m).rev() {
            let z = y[self.pivot_row[t]] / self.u_diag[t];
            x[self.col_at_step[t]] = z;
            if z != 0.0 {
                for &(s, u) in &self.u_cols[t] {
                    y[self.pivot_row[s]] -= z * u;
                }
            }
        }
        x
    }

    /// Solve `B' y = c`. `c` is indexed by basis position; the result is a
    /// dense row-dual vector indexed by original row.
    pub fn solve_transpose(&self, c: &[f64]) -> Vec<f64> {
        // U' w = c~ (forward over steps).
        let mut w = vec![0.0; self.m];
        for t in 0..self.m {
            let mut acc = c[self.col_at_step[t]];
            for &(s, u) in &self.u_cols[t] {
                acc -= u * w[s];
            }
            w[t] = acc / self.u_diag[t];
        }
        // L' y = w (backward over steps); result lands on original rows.
        let mut y = vec![0.0; self.m];
        for s in (0..self.m).rev() {
            let mut acc = w[s];
            for &(row, l) in &self.l_cols[s] {
                acc -= l * y[row];
            }
            y[self.pivot_row[s]] = acc;
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense_mul(cols: &[Vec<(usize, f64)>], x: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (j, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                out[r] += v * x[j];
            }
        }
        out
    }

    fn dense_mul_t(cols: &[Vec<(usize, f64)>], y: &[f64]) -> Vec<f64> {
        cols.iter()
            .map(|col| col.iter().map(|&(r, v)| v * y[r]).sum())
            .collect()
    }

    fn random_invertible(m: usize, seed: u64) -> Vec<Vec<(usize, f64)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        for j in 0..m {
            let mut col = vec![(j, 2.0 + rng.gen_range(0.0..2.0))]; // strong diagonal
            for _ in 0..rng.gen_range(0..4usize) {
                let r = rng.gen_range(0..m);
                if col.iter().all(|&(rr, _)| rr != r) {
                    col.push((r, rng.gen_range(-1.0..1.0)));
                }
            }
            col.sort_unstable_by_key(|&(r, _)| r);
            cols.push(col);
        }
        cols
    }

    #[test]
    fn solves_identity() {
        let cols: Vec<Vec<(usize, f64)>> = (0..4).map(|j| vec![(j, 1.0)]).collect();
        let refs: Vec<&[(usize, f64)]> = cols.iter().map(|c| c.as_slice()).collect();
        let lu = LuFactors::factor(4, &refs).unwrap();
        let b = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(lu.solve(&b), b);
        assert_eq!(lu.solve_transpose(&b), b);
    }

    #[test]
    fn random_solve_and_transpose_roundtrip() {
        for seed in 0..20 {
            let m = 3 + (seed as usize % 40);
            let cols = random_invertible(m, seed);
            let refs: Vec<&[(usize, f64)]> = cols.iter().map(|c| c.as_slice()).collect();
            let lu = LuFactors::factor(m, &refs).unwrap();

            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead);
            let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect();

            let x = lu.solve(&b);
            let back = dense_mul(&cols, &x, m);
            for i in 0..m {
                assert!((back[i] - b[i]).abs() < 1e-9, "seed {seed} row {i}");
            }

            let y = lu.solve_transpose(&b);
            let back_t = dense_mul_t(&cols, &y);
            for j in 0..m {
                assert!((back_t[j] - b[j]).abs() < 1e-9, "seed {seed} col {j}");
            }
        }
    }

    #[test]
    fn detects_singular() {
        // Two identical columns.
        let cols = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, 1.0)]];
        let refs: Vec<&[(usize, f64)]> = cols.iter().map(|c| c.as_slice()).collect();
        assert!(matches!(
            LuFactors::factor(2, &refs),
            Err(LuError::Singular { .. })
        ));
    }

    #[test]
    fn staircase_basis_factors() {
        // Bidiagonal storage-chain shape: s_h appears in rows h and h+1.
        let m = 50;
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
        for h in 0..m {
            let mut col = vec![(h, 1.0)];
            if h + 1 < m {
                col.push((h + 1, -1.0));
            }
            cols.push(col);
        }
        let refs: Vec<&[(usize, f64)]> = cols.iter().map(|c| c.as_slice()).collect();
        let lu = LuFactors::factor(m, &refs).unwrap();
        let b: Vec<f64> = (0..m).map(|i| (i % 7) as f64 - 3.0).collect();
        let x = lu.solve(&b);
        let back = dense_mul(&cols, &x, m);
        for i in 0..m {
            assert!((back[i] - b[i]).abs() < 1e-10);
        }
    }
}
