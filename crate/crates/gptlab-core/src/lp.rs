//! Dense two-phase primal simplex for small equality-form programs.
//!
//! Solves `min c'x  s.t.  Ax = b, x >= 0` with Bland's anti-cycling rule.
//! Problems in this crate are short and wide (a handful of equality rows,
//! up to a few ten thousand columns), so a dense tableau is the right tool:
//! no external solver, bit-reproducible pivots.

use thiserror::Error;

#[derive(Debug, Clone)]
pub struct Problem {
    /// Objective coefficients, length `n`.
    pub objective: Vec<f64>,
    /// Equality rows of `A`, each of length `n`.
    pub rows: Vec<Vec<f64>>,
    /// Right-hand side `b`, length `m`.
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    /// Residual threshold below which phase 1 declares feasibility.
    pub feas_tol: f64,
    /// Entries smaller than this are unusable as pivots.
    pub pivot_tol: f64,
    /// Reduced costs above `-cost_tol` count as optimal.
    pub cost_tol: f64,
    pub max_pivots: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            feas_tol: 1e-8,
            pivot_tol: 1e-9,
            cost_tol: 1e-10,
            max_pivots: 0, // 0 means "derive from problem size"
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Column indices of the final basis (row order).
    pub basis: Vec<usize>,
}

/// Infeasibility witness: `y . b > 0` while `y . A_j <= 0` for every column.
#[derive(Debug, Clone)]
pub struct Farkas {
    pub y: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Optimal(Solution),
    Infeasible(Farkas),
    Unbounded,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("empty problem: {0}")]
    Shape(String),
    #[error("pivot limit reached after {0} pivots")]
    PivotLimit(usize),
    #[error("numerical trouble: {0}")]
    Numerical(String),
}

struct Tableau {
    /// Flat row-major storage, `m + 1` rows by `width` columns.
    /// Layout per row: n structural | m artificial | rhs.
    /// The last row is the reduced-cost row.
    data: Vec<f64>,
    m: usize,
    n: usize,
    width: usize,
    basis: Vec<usize>,
    /// Row signs applied to reach b >= 0 (needed to map duals back).
    row_sign: Vec<f64>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.width..(r + 1) * self.width]
    }

    fn pivot(&mut self, prow: usize, pcol: usize) {
        let w = self.width;
        let pval = self.data[prow * w + pcol];
        let inv = 1.0 / pval;
        for c in 0..w {
            self.data[prow * w + c] *= inv;
        }
        self.data[prow * w + pcol] = 1.0;
        for r in 0..=self.m {
            if r == prow {
                continue;
            }
            let factor = self.data[r * w + pcol];
            if factor == 0.0 {
                continue;
            }
            for c in 0..w {
                self.data[r * w + c] -= factor * self.data[prow * w + c];
            }
            self.data[r * w + pcol] = 0.0;
        }
        self.basis[prow] = pcol;
    }

    /// Bland's rule: lowest-index eligible entering column.
    fn entering(&self, allowed: usize, cost_tol: f64) -> Option<usize> {
        let cost = self.row(self.m);
        (0..allowed).find(|&j| cost[j] < -cost_tol)
    }

    /// Ratio test with Bland tie-breaking (lowest basis index leaves).
    fn leaving(&self, pcol: usize, pivot_tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.m {
            let a = self.at(r, pcol);
            if a > pivot_tol {
                let ratio = self.at(r, self.width - 1) / a;
                match best {
                    None => best = Some((r, ratio)),
                    Some((brow, bratio)) => {
                        if ratio < bratio - 1e-12
                            || ((ratio - bratio).abs() <= 1e-12
                                && self.basis[r] < self.basis[brow])
                        {
                            best = Some((r, ratio));
                        }
                    }
                }
            }
        }
        best.map(|(r, _)| r)
    }
}

/// Solve `min c'x  s.t.  Ax = b, x >= 0`.
pub fn solve(p: &Problem, opts: &Options) -> Result<Outcome, LpError> {
    let m = p.rows.len();
    let n = p.objective.len();
    if m == 0 || n == 0 {
        return Err(LpError::Shape(format!("m={m}, n={n}")));
    }
    if p.rhs.len() != m {
        return Err(LpError::Shape(format!("rhs len {} != m={m}", p.rhs.len())));
    }
    for (i, row) in p.rows.iter().enumerate() {
        if row.len() != n {
            return Err(LpError::Shape(format!("row {i} len {} != n={n}", row.len())));
        }
    }

    let width = n + m + 1;
    let mut t = Tableau {
        data: vec![0.0; (m + 1) * width],
        m,
        n,
        width,
        basis: (n..n + m).collect(),
        row_sign: vec![1.0; m],
    };
    for (i, row) in p.rows.iter().enumerate() {
        let sign = if p.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        t.row_sign[i] = sign;
        for (j, &a) in row.iter().enumerate() {
            t.data[i * width + j] = sign * a;
        }
        t.data[i * width + n + i] = 1.0;
        t.data[i * width + width - 1] = sign * p.rhs[i];
    }
    // Phase-1 reduced costs: c = (0 | 1), basis = artificials.
    for j in 0..width {
        let mut s = 0.0;
        for i in 0..m {
            s += t.data[i * width + j];
        }
        let c_j = if (n..n + m).contains(&j) { 1.0 } else { 0.0 };
        t.data[m * width + j] = c_j - s;
    }

    let max_pivots = if opts.max_pivots == 0 {
        100 * (m + n) + 5000
    } else {
        opts.max_pivots
    };
    let mut pivots = 0usize;

    // Phase 1: minimize the sum of artificials over all columns.
    while let Some(pcol) = t.entering(n + m, opts.cost_tol) {
        let Some(prow) = t.leaving(pcol, opts.pivot_tol) else {
            return Err(LpError::Numerical(
                "phase-1 column unbounded; inputs are not finite".into(),
            ));
        };
        t.pivot(prow, pcol);
        pivots += 1;
        if pivots > max_pivots {
            return Err(LpError::PivotLimit(pivots));
        }
    }
    let phase1 = -t.at(m, width - 1);
    if phase1 > opts.feas_tol {
        // Farkas vector from artificial reduced costs: y_i = 1 - r_{n+i},
        // mapped through the row signs.
        let mut y = vec![0.0; m];
        for i in 0..m {
            y[i] = t.row_sign[i] * (1.0 - t.at(m, n + i));
        }
        return Ok(Outcome::Infeasible(Farkas { y }));
    }

    // Drive leftover artificials out of the basis where possible.
    for r in 0..m {
        if t.basis[r] >= n {
            if let Some(j) = (0..n).find(|&j| t.at(r, j).abs() > opts.pivot_tol) {
                t.pivot(r, j);
                pivots += 1;
            }
            // else: redundant row; the artificial stays basic at value ~0.
        }
    }

    // Phase 2: real reduced costs (artificials barred from entering).
    for j in 0..width {
        let mut s = 0.0;
        for i in 0..m {
            let b = t.basis[i];
            let cb = if b < n { p.objective[b] } else { 0.0 };
            s += cb * t.data[i * width + j];
        }
        let c_j = if j < n { p.objective[j] } else { 0.0 };
        t.data[m * width + j] = c_j - s;
    }
    {
        // rhs cell of the cost row holds -objective
        let mut s = 0.0;
        for i in 0..m {
            let b = t.basis[i];
            let cb = if b < n { p.objective[b] } else { 0.0 };
            s += cb * t.data[i * width + width - 1];
        }
        t.data[m * width + width - 1] = -s;
    }

    while let Some(pcol) = t.entering(n, opts.cost_tol) {
        let Some(prow) = t.leaving(pcol, opts.pivot_tol) else {
            return Ok(Outcome::Unbounded);
        };
        t.pivot(prow, pcol);
        pivots += 1;
        if pivots > max_pivots {
            return Err(LpError::PivotLimit(pivots));
        }
    }

    let mut x = vec![0.0; n];
    for r in 0..m {
        if t.basis[r] < n {
            x[t.basis[r]] = t.at(r, width - 1).max(0.0);
        }
    }
    let objective = x
        .iter()
        .zip(&p.objective)
        .map(|(xi, ci)| xi * ci)
        .sum::<f64>();
    Ok(Outcome::Optimal(Solution {
        x,
        objective,
        basis: t.basis.clone(),
    }))
}

/// Feasibility-only convenience: zero objective.
pub fn solve_feasibility(rows: Vec<Vec<f64>>, rhs: Vec<f64>, opts: &Options) -> Result<Outcome, LpError> {
    let n = rows.first().map(|r| r.len()).unwrap_or(0);
    solve(
        &Problem {
            objective: vec![0.0; n],
            rows,
            rhs,
        },
        opts,
    )
}
