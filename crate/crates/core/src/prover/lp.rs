//! Exact rational linear programming: two-phase tableau simplex, Bland's rule.
//!
//! Problems have the shape `min c·x` s.t. `A x <= b`, `l <= x <= u`. The box
//! is always bounded, so the only outcomes are an optimum or infeasibility.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

type Q = BigRational;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<Q>,
    /// Rows `(a, b)` meaning `a·x <= b`.
    pub rows: Vec<(Vec<Q>, Q)>,
    pub lower: Vec<Q>,
    pub upper: Vec<Q>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal { x: Vec<Q>, value: Q },
    Infeasible,
}

struct Tableau {
    /// `rows × (cols + 1)`; the last column is the right-hand side.
    t: Vec<Vec<Q>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> &Q {
        &self.t[r][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c].clone();
        for v in self.t[r].iter_mut() {
            *v = &*v / &p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimize `cost` over the current basic feasible solution. Columns with
    /// `allowed[j] == false` never enter. Returns false when unbounded.
    fn run(&mut self, cost: &[Q], allowed: &[bool]) -> bool {
        loop {
            let entering = (0..self.cols).find(|&j| {
                if !allowed[j] || self.basis.contains(&j) {
                    return false;
                }
                let mut reduced = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !cost[b].is_zero() && !self.t[i][j].is_zero() {
                        reduced -= &cost[b] * &self.t[i][j];
                    }
                }
                reduced.is_negative()
            });
            let Some(j) = entering else { return true };
            let mut leave: Option<(usize, Q)> = None;
            for i in 0..self.t.len() {
                if !self.t[i][j].is_positive() {
                    continue;
                }
                let ratio = self.rhs(i) / &self.t[i][j];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            match leave {
                Some((i, _)) => self.pivot(i, j),
                None => return false,
            }
        }
    }
}

pub fn solve(lp: &LinearProgram) -> LpSolution {
    let n = lp.objective.len();
    if lp.lower.iter().zip(&lp.upper).any(|(l, u)| l > u) {
        return LpSolution::Infeasible;
    }
    // Shift to y = x - l >= 0; box tops become rows y_i <= u_i - l_i.
    let mut rows: Vec<(Vec<Q>, Q)> = Vec::with_capacity(lp.rows.len() + n);
    for (a, b) in &lp.rows {
        let shift: Q = a.iter().zip(&lp.lower).map(|(ai, li)| ai * li).sum();
        rows.push((a.clone(), b - shift));
    }
    for i in 0..n {
        let mut a = vec![Q::zero(); n];
        a[i] = Q::one();
        rows.push((a, &lp.upper[i] - &lp.lower[i]));
    }
    let m = rows.len();
    let negative: Vec<usize> = (0..m).filter(|&r| rows[r].1.is_negative()).collect();
    let cols = n + m + negative.len();
    let mut t = vec![vec![Q::zero(); cols + 1]; m];
    let mut basis = vec![0; m];
    for (r, (a, b)) in rows.iter().enumerate() {
        let sign = if b.is_negative() { -Q::one() } else { Q::one() };
        for j in 0..n {
            t[r][j] = &sign * &a[j];
        }
        t[r][n + r] = sign.clone();
        t[r][cols] = &sign * b;
        basis[r] = n + r;
    }
    for (k, &r) in negative.iter().enumerate() {
        t[r][n + m + k] = Q::one();
        basis[r] = n + m + k;
    }
    let mut tab = Tableau { t, basis, cols };

    if !negative.is_empty() {
        let mut cost = vec![Q::zero(); cols];
        for c in cost.iter_mut().skip(n + m) {
            *c = Q::one();
        }
        tab.run(&cost, &vec![true; cols]);
        let infeasibility: Q = (0..m)
            .filter(|&r| tab.basis[r] >= n + m)
            .map(|r| tab.rhs(r).clone())
            .sum();
        if infeasibility.is_positive() {
            return LpSolution::Infeasible;
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] >= n + m {
                if let Some(c) = (0..n + m).find(|&c| !tab.t[r][c].is_zero() && !tab.basis.contains(&c)) {
                    tab.pivot(r, c);
                }
            }
        }
    }

    let mut cost = vec![Q::zero(); cols];
    cost[..n].clone_from_slice(&lp.objective);
    let allowed: Vec<bool> = (0..cols).map(|j| j < n + m).collect();
    let bounded = tab.run(&cost, &allowed);
    debug_assert!(bounded, "bounded box cannot give an unbounded program");

    let mut y = vec![Q::zero(); n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            y[b] = tab.rhs(r).clone();
        }
    }
    let x: Vec<Q> = y.iter().zip(&lp.lower).map(|(yi, li)| yi + li).collect();
    let value = x.iter().zip(&lp.objective).map(|(xi, ci)| xi * ci).sum();
    LpSolution::Optimal { x, value }
}

/// Whether the box cut by the rows is non-empty.
pub fn feasible(rows: &[(Vec<Q>, Q)], lower: &[Q], upper: &[Q]) -> bool {
    let lp = LinearProgram {
        objective: vec![Q::zero(); lower.len()],
        rows: rows.to_vec(),
        lower: lower.to_vec(),
        upper: upper.to_vec(),
    };
    matches!(solve(&lp), LpSolution::Optimal { .. })
}
