//! Dense two-phase simplex for the small linear programs in this crate.
//!
//! Problems are stated as `max/min c.x` subject to rows `a.x {<=,>=,=} b`
//! and `x >= 0`. Pricing is Dantzig's rule, switching to Bland's rule after a
//! run of degenerate pivots so that cycling cannot occur.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Relation, f64)>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        Self { sense, objective, rows: Vec::new() }
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.objective.len());
        self.rows.push((coeffs, rel, rhs));
    }

    pub fn solve(&self) -> Result<LpSolution> {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    /// rows `0..m` are constraints, row `m` is the objective row
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_orig: usize,
    /// first artificial column; columns `art_start..n_cols` are artificial
    art_start: usize,
    n_cols: usize,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.objective.len();
        let m = lp.rows.len();
        // normalize to non-negative right-hand sides
        let rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .rows
            .iter()
            .map(|(a, rel, b)| {
                if *b < 0.0 {
                    let flipped = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (a.iter().map(|v| -v).collect(), flipped, -b)
                } else {
                    (a.clone(), *rel, *b)
                }
            })
            .collect();
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let art_start = n + n_slack;
        let n_cols = art_start + n_art;
        let mut t = vec![vec![0.0; n_cols + 1]; m + 1];
        let mut basis = vec![0; m];
        let (mut slack, mut art) = (n, art_start);
        for (i, (a, rel, b)) in rows.iter().enumerate() {
            t[i][..n].copy_from_slice(a);
            t[i][n_cols] = *b;
            match rel {
                Relation::Le => {
                    t[i][slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    t[i][slack] = -1.0;
                    slack += 1;
                    t[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    t[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Self { t, basis, n_orig: n, art_start, n_cols, pivots: 0 }
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.n_cols + 1;
        let inv = 1.0 / self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v *= inv;
        }
        self.t[row][col] = 1.0;
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for j in 0..w {
                    r[j] -= f * pivot_row[j];
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Loads `cost` (minimization, over all columns) into the objective row in
    /// reduced form.
    fn set_objective(&mut self, cost: &[f64]) {
        let m = self.m();
        let w = self.n_cols + 1;
        let mut obj = vec![0.0; w];
        obj[..cost.len()].copy_from_slice(cost);
        for i in 0..m {
            let cb = obj[self.basis[i]];
            if cb != 0.0 {
                for j in 0..w {
                    obj[j] -= cb * self.t[i][j];
                }
            }
        }
        self.t[m] = obj;
    }

    /// Minimizes the loaded objective over columns `< allowed`.
    fn optimize(&mut self, allowed: usize) -> Result<()> {
        let m = self.m();
        let rhs = self.n_cols;
        let mut degenerate_run = 0usize;
        let limit = 50_000 + 100 * (m + self.n_cols);
        loop {
            if self.pivots > limit {
                return Err(Error::Lp("not converging (pivot limit)"));
            }
            let bland = degenerate_run > 50;
            let obj = &self.t[m];
            let entering = if bland {
                (0..allowed).find(|&j| obj[j] < -PIVOT_TOL)
            } else {
                (0..allowed)
                    .filter(|&j| obj[j] < -PIVOT_TOL)
                    .min_by(|&a, &b| obj[a].total_cmp(&obj[b]))
            };
            let Some(col) = entering else { return Ok(()) };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.t[i][rhs].max(0.0) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-14 || (ratio <= br + 1e-14 && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((row, ratio)) = best else { return Err(Error::Lp("unbounded")) };
            degenerate_run = if ratio <= 1e-14 { degenerate_run + 1 } else { 0 };
            self.pivot(row, col);
        }
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let m = self.m();
        let rhs = self.n_cols;
        if self.art_start < self.n_cols {
            let mut cost = vec![0.0; self.n_cols];
            for c in cost.iter_mut().skip(self.art_start) {
                *c = 1.0;
            }
            self.set_objective(&cost);
            self.optimize(self.n_cols)?;
            if -self.t[m][rhs] > FEAS_TOL {
                return Err(Error::Lp("infeasible"));
            }
            // drive zero-level artificials out of the basis, drop redundant rows
            let mut i = 0;
            while i < self.m() {
                if self.basis[i] >= self.art_start {
                    match (0..self.art_start).find(|&j| self.t[i][j].abs() > PIVOT_TOL) {
                        Some(j) => {
                            self.pivot(i, j);
                            i += 1;
                        }
                        None => {
                            self.t.remove(i);
                            self.basis.remove(i);
                        }
                    }
                } else {
                    i += 1;
                }
            }
        }
        let sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let cost: Vec<f64> = lp.objective.iter().map(|c| sign * c).collect();
        self.set_objective(&cost);
        self.optimize(self.art_start)?;

        let mut x = vec![0.0; self.n_orig];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_orig {
                x[b] = self.t[i][rhs].max(0.0);
            }
        }
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution { x, objective, pivots: self.pivots })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_max() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(Sense::Maximize, vec![3.0, 5.0]);
        lp.constrain(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.constrain(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.constrain(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y + 3z, x + y + z = 1, y + z >= 0.5, z >= 0.1
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, 2.0, 3.0]);
        lp.constrain(vec![1.0, 1.0, 1.0], Relation::Eq, 1.0);
        lp.constrain(vec![0.0, 1.0, 1.0], Relation::Ge, 0.5);
        lp.constrain(vec![0.0, 0.0, 1.0], Relation::Ge, 0.1);
        let s = lp.solve().unwrap();
        assert!((s.objective - (0.5 + 0.8 + 0.3)).abs() < 1e-12, "{}", s.objective);
    }

    #[test]
    fn redundant_equalities() {
        // 2x2 transportation with both marginal sets (one row redundant)
        let cost = [0.0, 1.0, 1.0, 0.0];
        let mut lp = LinearProgram::new(Sense::Minimize, cost.to_vec());
        lp.constrain(vec![1.0, 1.0, 0.0, 0.0], Relation::Eq, 0.7);
        lp.constrain(vec![0.0, 0.0, 1.0, 1.0], Relation::Eq, 0.3);
        lp.constrain(vec![1.0, 0.0, 1.0, 0.0], Relation::Eq, 0.4);
        lp.constrain(vec![0.0, 1.0, 0.0, 1.0], Relation::Eq, 0.6);
        let s = lp.solve().unwrap();
        assert!((s.objective - 0.3).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0]);
        lp.constrain(vec![1.0], Relation::Le, 1.0);
        lp.constrain(vec![1.0], Relation::Ge, 2.0);
        assert!(matches!(lp.solve(), Err(Error::Lp("infeasible"))));
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 0.0]);
        lp.constrain(vec![-1.0, 1.0], Relation::Le, 1.0);
        assert!(matches!(lp.solve(), Err(Error::Lp("unbounded"))));
    }

    #[test]
    fn negative_rhs_is_normalized() {
        // max -x s.t. -x <= -3  (x >= 3)
        let mut lp = LinearProgram::new(Sense::Maximize, vec![-1.0]);
        lp.constrain(vec![-1.0], Relation::Le, -3.0);
        let s = lp.solve().unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-12);
    }
}
