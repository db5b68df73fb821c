//! Dense two-phase simplex for small equality-form programs
//! `maximize c.x  s.t.  A x = b, x >= 0`, using Bland's rule.

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Infeasible,
    Unbounded,
    Optimal { x: Vec<f64>, value: f64 },
}

pub(crate) struct LinearProgram {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    objective: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.width
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let scale = self.rows[r][c];
        for x in self.rows[r].iter_mut() {
            *x /= scale;
        }
        let pivot_row = self.rows[r].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k != r {
                eliminate(row, &pivot_row, c);
            }
        }
        eliminate(&mut self.objective, &pivot_row, c);
        self.basis[r] = c;
    }

    /// Runs Bland-rule pivots over columns `< limit`. Returns false when
    /// unbounded.
    fn optimize(&mut self, limit: usize, tol: f64) -> bool {
        // Bland's rule cannot cycle, the cap only guards against numerics.
        let cap = 50 * (self.rows.len() + limit) + 1000;
        for _ in 0..cap {
            let Some(enter) = (0..limit).find(|&j| self.objective[j] < -tol) else {
                return true;
            };
            let rhs = self.rhs();
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[enter];
                if a > tol {
                    let ratio = row[rhs] / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((l, best)) => {
                            if ratio < best - tol
                                || (ratio <= best + tol && self.basis[i] < self.basis[l])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            match leave {
                None => return false,
                Some((r, _)) => self.pivot(r, enter),
            }
        }
        true
    }
}

fn eliminate(row: &mut [f64], pivot_row: &[f64], c: usize) {
    let factor = row[c];
    if factor != 0.0 {
        for (x, p) in row.iter_mut().zip(pivot_row) {
            *x -= factor * p;
        }
        row[c] = 0.0;
    }
}

pub(crate) fn solve(lp: &LinearProgram, tol: f64) -> LpOutcome {
    let m = lp.a.len();
    let n = lp.c.len();
    let width = n + m;

    // Phase 1: artificial basis, maximize -(sum of artificials).
    let mut rows = Vec::with_capacity(m);
    for (row, &b) in lp.a.iter().zip(&lp.b) {
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        let mut r: Vec<f64> = row.iter().map(|x| sign * x).collect();
        r.resize(width + 1, 0.0);
        r[width] = sign * b;
        rows.push(r);
    }
    for (i, r) in rows.iter_mut().enumerate() {
        r[n + i] = 1.0;
    }
    let mut objective = vec![0.0; width + 1];
    for r in &rows {
        for j in 0..n {
            objective[j] -= r[j];
        }
        objective[width] -= r[width];
    }
    let mut tab = Tableau {
        rows,
        objective,
        basis: (n..n + m).collect(),
        width,
    };
    tab.optimize(width, tol);
    let scale = 1.0 + lp.b.iter().map(|x| x.abs()).sum::<f64>();
    if tab.objective[width] < -tol * scale {
        return LpOutcome::Infeasible;
    }

    // Drive remaining artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < tab.rows.len() {
        if tab.basis[i] >= n {
            match (0..n).find(|&j| tab.rows[i][j].abs() > tol) {
                Some(j) => tab.pivot(i, j),
                None => {
                    tab.rows.remove(i);
                    tab.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    // Phase 2 over the original columns.
    let mut objective = vec![0.0; width + 1];
    for (o, c) in objective.iter_mut().zip(&lp.c) {
        *o = -c;
    }
    for (row, &bj) in tab.rows.iter().zip(&tab.basis) {
        let cb = lp.c[bj];
        if cb != 0.0 {
            for j in 0..n {
                objective[j] += cb * row[j];
            }
            objective[width] += cb * row[width];
        }
    }
    tab.objective = objective;
    if !tab.optimize(n, tol) {
        return LpOutcome::Unbounded;
    }

    let mut x = vec![0.0; n];
    for (row, &bj) in tab.rows.iter().zip(&tab.basis) {
        x[bj] = row[width].max(0.0);
    }
    let value = lp.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    LpOutcome::Optimal { x, value }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimum(out: LpOutcome) -> (Vec<f64>, f64) {
        match out {
            LpOutcome::Optimal { x, value } => (x, value),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn textbook_max() {
        // max 3x + 2y, x + y + s1 = 4, x + 3y + s2 = 6
        let lp = LinearProgram {
            a: vec![vec![1.0, 1.0, 1.0, 0.0], vec![1.0, 3.0, 0.0, 1.0]],
            b: vec![4.0, 6.0],
            c: vec![3.0, 2.0, 0.0, 0.0],
        };
        let (x, v) = optimum(solve(&lp, 1e-12));
        assert!((v - 12.0).abs() < 1e-12);
        assert!((x[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_system() {
        // x + y = 1 and x + y = 2
        let lp = LinearProgram {
            a: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            b: vec![1.0, 2.0],
            c: vec![0.0, 0.0],
        };
        assert_eq!(solve(&lp, 1e-12), LpOutcome::Infeasible);
    }

    #[test]
    fn redundant_rows_and_negative_rhs() {
        // -x - y = -1 twice, maximize x
        let lp = LinearProgram {
            a: vec![vec![-1.0, -1.0], vec![-1.0, -1.0]],
            b: vec![-1.0, -1.0],
            c: vec![1.0, 0.0],
        };
        let (x, v) = optimum(solve(&lp, 1e-12));
        assert!((v - 1.0).abs() < 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded() {
        // x - y = 0, maximize x
        let lp = LinearProgram {
            a: vec![vec![1.0, -1.0]],
            b: vec![0.0],
            c: vec![1.0, 0.0],
        };
        assert_eq!(solve(&lp, 1e-12), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's classic cycling instance (in equality form with slacks).
        let lp = LinearProgram {
            a: vec![
                vec![0.25, -60.0, -0.04, 9.0, 1.0, 0.0, 0.0],
                vec![0.5, -90.0, -0.02, 3.0, 0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            ],
            b: vec![0.0, 0.0, 1.0],
            c: vec![0.75, -150.0, 0.02, -6.0, 0.0, 0.0, 0.0],
        };
        let (_, v) = optimum(solve(&lp, 1e-12));
        assert!((v - 0.05).abs() < 1e-9);
    }
}
