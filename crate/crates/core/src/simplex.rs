//! Dense two-phase primal simplex over exact rationals.
//!
//! Solves `min cᵀx  s.t.  Ax = b, x ≥ 0`. Pivoting follows Bland's rule
//! (lowest-index entering column, lowest-index leaving basic variable on
//! ratio ties), so the run terminates and is deterministic. The solution
//! returned is always basic, i.e. a vertex of the feasible polyhedron.

use num_traits::{Signed, Zero};

use crate::rational::Rational;

#[derive(Debug, Clone)]
pub struct StandardLp {
    pub constraints: Vec<Vec<Rational>>,
    pub rhs: Vec<Rational>,
    pub cost: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub values: Vec<Rational>,
    pub objective: Rational,
    /// Basic column per remaining row (redundant rows are dropped).
    pub basis: Vec<usize>,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    /// Reduced costs per column.
    reduced: Vec<Rational>,
    /// Negated objective value.
    neg_obj: Rational,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col].clone();
        if p != Rational::from_integer(1.into()) {
            for v in self.rows[row].iter_mut() {
                if !v.is_zero() {
                    *v /= &p;
                }
            }
            self.rhs[row] /= &p;
        }
        let nz: Vec<usize> = self.rows[row]
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(j, _)| j)
            .collect();
        let pivot_row = self.rows[row].clone();
        let pivot_rhs = self.rhs[row].clone();
        for i in 0..self.rows.len() {
            if i == row || self.rows[i][col].is_zero() {
                continue;
            }
            let f = self.rows[i][col].clone();
            for &j in &nz {
                let delta = &f * &pivot_row[j];
                self.rows[i][j] -= delta;
            }
            self.rhs[i] -= &f * &pivot_rhs;
        }
        if !self.reduced[col].is_zero() {
            let f = self.reduced[col].clone();
            for &j in &nz {
                let delta = &f * &pivot_row[j];
                self.reduced[j] -= delta;
            }
            self.neg_obj -= &f * &pivot_rhs;
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Runs Bland pivots restricted to columns `< limit`. Returns false when unbounded.
    fn optimize(&mut self, limit: usize) -> bool {
        loop {
            let Some(col) = (0..limit).find(|&j| self.reduced[j].is_negative()) else {
                return true;
            };
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][col];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / a;
                let better = match &best {
                    None => true,
                    Some((r, br)) => {
                        ratio < *br || (ratio == *br && self.basis[i] < self.basis[*r])
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                Some((row, _)) => self.pivot(row, col),
                None => return false,
            }
        }
    }

    fn set_objective(&mut self, cost: &[Rational]) {
        let width = self.reduced.len();
        let mut reduced: Vec<Rational> = (0..width)
            .map(|j| cost.get(j).cloned().unwrap_or_else(Rational::zero))
            .collect();
        let mut neg_obj = Rational::zero();
        for (i, &bcol) in self.basis.iter().enumerate() {
            let cb = cost.get(bcol).cloned().unwrap_or_else(Rational::zero);
            if cb.is_zero() {
                continue;
            }
            for (j, v) in self.rows[i].iter().enumerate() {
                if !v.is_zero() {
                    reduced[j] -= &cb * v;
                }
            }
            neg_obj -= &cb * &self.rhs[i];
        }
        self.reduced = reduced;
        self.neg_obj = neg_obj;
    }
}

impl StandardLp {
    pub fn variable_count(&self) -> usize {
        self.cost.len()
    }

    pub fn solve(&self) -> LpOutcome {
        let rows = self.constraints.len();
        let vars = self.cost.len();
        let width = vars + rows;

        let mut t = Tableau {
            rows: Vec::with_capacity(rows),
            rhs: Vec::with_capacity(rows),
            reduced: vec![Rational::zero(); width],
            neg_obj: Rational::zero(),
            basis: (vars..vars + rows).collect(),
            pivots: 0,
        };
        for (i, (row, b)) in self.constraints.iter().zip(&self.rhs).enumerate() {
            assert_eq!(row.len(), vars, "constraint row width");
            let flip = b.is_negative();
            let mut full: Vec<Rational> = row
                .iter()
                .map(|v| if flip { -v } else { v.clone() })
                .collect();
            full.extend((0..rows).map(|k| {
                if k == i {
                    Rational::from_integer(1.into())
                } else {
                    Rational::zero()
                }
            }));
            t.rows.push(full);
            t.rhs.push(if flip { -b } else { b.clone() });
        }

        // Phase 1: minimize the sum of artificials.
        let phase1: Vec<Rational> = (0..width)
            .map(|j| {
                if j >= vars {
                    Rational::from_integer(1.into())
                } else {
                    Rational::zero()
                }
            })
            .collect();
        t.set_objective(&phase1);
        t.optimize(width);
        if !t.neg_obj.is_zero() {
            return LpOutcome::Infeasible;
        }

        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= vars {
                match (0..vars).find(|&j| !t.rows[i][j].is_zero()) {
                    Some(j) => t.pivot(i, j),
                    None => {
                        t.rows.remove(i);
                        t.rhs.remove(i);
                        t.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        for row in t.rows.iter_mut() {
            row.truncate(vars);
        }
        t.reduced.truncate(vars);

        t.set_objective(&self.cost);
        if !t.optimize(vars) {
            return LpOutcome::Unbounded;
        }

        let mut values = vec![Rational::zero(); vars];
        for (i, &b) in t.basis.iter().enumerate() {
            values[b] = t.rhs[i].clone();
        }
        let objective = values
            .iter()
            .zip(&self.cost)
            .fold(Rational::zero(), |acc, (x, c)| acc + x * c);
        LpOutcome::Optimal(LpSolution {
            values,
            objective,
            basis: t.basis,
            pivots: t.pivots,
        })
    }
}
