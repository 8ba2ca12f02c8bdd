//! Dense bounded-variable primal simplex.
//!
//! Solves `min c'x` subject to linear rows and finite bounds on every
//! structural variable. Each row gets a slack (`a'x + s = b`) whose bounds
//! encode the relation; rows whose slack cannot absorb the initial residual
//! receive an artificial variable, driven to zero in phase one. Pricing is
//! Dantzig's rule until too many degenerate pivots accumulate, after which
//! the solve switches to Bland's rule for good. All choices break ties on the
//! lowest column index, so runs are reproducible.

use crate::model::Relation;

/// Feasibility and optimality tolerance.
pub const TOLERANCE: f64 = 1e-9;
/// Tolerance when re-checking the final point against the original rows.
pub const CHECK_TOLERANCE: f64 = 1e-6;
/// Degenerate pivots tolerated before switching to Bland's rule.
pub const DEGENERATE_PIVOT_LIMIT: usize = 1000;
const PIVOT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    /// Iteration cap hit or the final point failed its re-check.
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major `B^-1 A`.
    a: Vec<f64>,
    /// Values of basic variables, by row.
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    /// Current value of every column (basic ones mirrored from `beta`).
    value: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    reduced: Vec<f64>,
    iterations: usize,
    degenerate: usize,
    bland: bool,
}

enum Step {
    Optimal,
    Moved,
    Unbounded,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.cols + c]
    }

    fn price(&mut self, cost: &[f64]) {
        self.reduced.copy_from_slice(cost);
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.a[r * self.cols..(r + 1) * self.cols];
                for (d, &x) in self.reduced.iter_mut().zip(row) {
                    *d -= cb * x;
                }
            }
        }
        for r in 0..self.rows {
            self.reduced[self.basis[r]] = 0.0;
        }
    }

    fn choose_entering(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.cols {
            let dir = match self.state[j] {
                State::Basic => continue,
                _ if self.upper[j] - self.lower[j] <= TOLERANCE => continue,
                State::AtLower if self.reduced[j] < -TOLERANCE => 1.0,
                State::AtUpper if self.reduced[j] > TOLERANCE => -1.0,
                _ => continue,
            };
            if self.bland {
                return Some((j, dir));
            }
            let score = self.reduced[j].abs();
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, d, _)| (j, d))
    }

    fn step(&mut self) -> Step {
        let Some((j, dir)) = self.choose_entering() else {
            return Step::Optimal;
        };
        // ratio test
        let mut limit = self.upper[j] - self.lower[j];
        let mut leaving: Option<(usize, State)> = None;
        for r in 0..self.rows {
            let alpha = dir * self.at(r, j);
            let b = self.basis[r];
            let (room, bound) = if alpha > PIVOT_TOLERANCE {
                (
                    if self.lower[b].is_finite() { (self.beta[r] - self.lower[b]) / alpha } else { f64::INFINITY },
                    State::AtLower,
                )
            } else if alpha < -PIVOT_TOLERANCE {
                (
                    if self.upper[b].is_finite() { (self.upper[b] - self.beta[r]) / -alpha } else { f64::INFINITY },
                    State::AtUpper,
                )
            } else {
                continue;
            };
            let room = room.max(0.0);
            let better = match leaving {
                _ if room < limit - TOLERANCE => true,
                Some((lr, _)) if room <= limit + TOLERANCE => {
                    if self.bland {
                        b < self.basis[lr]
                    } else {
                        alpha.abs() > self.at(lr, j).abs()
                    }
                }
                _ => false,
            };
            if better {
                limit = room;
                leaving = Some((r, bound));
            }
        }
        if !limit.is_finite() {
            return Step::Unbounded;
        }
        self.iterations += 1;
        if limit <= TOLERANCE {
            self.degenerate += 1;
            if self.degenerate >= DEGENERATE_PIVOT_LIMIT {
                self.bland = true;
            }
        }
        let t = dir * limit;
        for r in 0..self.rows {
            let alpha = self.at(r, j);
            if alpha != 0.0 {
                self.beta[r] -= t * alpha;
            }
        }
        match leaving {
            None => {
                // bound flip
                self.state[j] = if dir > 0.0 { State::AtUpper } else { State::AtLower };
                self.value[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
            }
            Some((r, bound)) => {
                let out = self.basis[r];
                self.state[out] = bound;
                self.value[out] = if bound == State::AtLower { self.lower[out] } else { self.upper[out] };
                self.beta[r] = self.value[j] + t;
                self.pivot(r, j);
            }
        }
        for r in 0..self.rows {
            self.value[self.basis[r]] = self.beta[r];
        }
        Step::Moved
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let p = self.at(r, j);
        {
            let row = &mut self.a[r * cols..(r + 1) * cols];
            for x in row.iter_mut() {
                *x /= p;
            }
            row[j] = 1.0;
        }
        let pivot_row: Vec<(usize, f64)> = self.a[r * cols..(r + 1) * cols]
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(c, &x)| (c, x))
            .collect();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.a[i * cols + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.a[i * cols..(i + 1) * cols];
            for &(c, x) in &pivot_row {
                row[c] -= f * x;
            }
            row[j] = 0.0;
        }
        let f = self.reduced[j];
        if f != 0.0 {
            for &(c, x) in &pivot_row {
                self.reduced[c] -= f * x;
            }
            self.reduced[j] = 0.0;
        }
        self.state[self.basis[r]] = if self.state[self.basis[r]] == State::Basic {
            State::AtLower
        } else {
            self.state[self.basis[r]]
        };
        self.basis[r] = j;
        self.state[j] = State::Basic;
    }

    fn run(&mut self, cost: &[f64], max_iterations: usize) -> Option<bool> {
        self.price(cost);
        loop {
            if self.iterations >= max_iterations {
                return None;
            }
            match self.step() {
                Step::Optimal => return Some(true),
                Step::Unbounded => return Some(false),
                Step::Moved => {}
            }
        }
    }
}

/// Iteration cap per solve, as a multiple of the tableau size.
fn iteration_cap(rows: usize, cols: usize) -> usize {
    50 * (rows + cols) + 1000
}

pub fn solve_lp(p: &LpProblem) -> LpSolution {
    let n = p.cost.len();
    let m = p.rows.len();
    debug_assert!(p.lower.iter().chain(&p.upper).all(|b| b.is_finite()));

    let fail = |status, iterations| LpSolution { status, value: f64::NAN, x: Vec::new(), iterations };
    if p.lower.iter().zip(&p.upper).any(|(l, u)| l > &(u + TOLERANCE)) {
        return fail(LpStatus::Infeasible, 0);
    }

    // residuals with structurals at their lower bounds
    let residual: Vec<f64> = p
        .rows
        .iter()
        .map(|row| row.rhs - row.terms.iter().map(|&(j, c)| c * p.lower[j]).sum::<f64>())
        .collect();
    let slack_bounds = |rel: Relation| match rel {
        Relation::Le => (0.0, f64::INFINITY),
        Relation::Ge => (f64::NEG_INFINITY, 0.0),
        Relation::Eq => (0.0, 0.0),
    };
    let needs_artificial: Vec<bool> = p
        .rows
        .iter()
        .zip(&residual)
        .map(|(row, &r)| {
            let (lo, hi) = slack_bounds(row.relation);
            r < lo - TOLERANCE || r > hi + TOLERANCE
        })
        .collect();
    let art_count = needs_artificial.iter().filter(|&&b| b).count();
    let cols = n + m + art_count;

    let mut t = Tableau {
        rows: m,
        cols,
        a: vec![0.0; m * cols],
        beta: vec![0.0; m],
        basis: vec![0; m],
        state: vec![State::AtLower; cols],
        value: vec![0.0; cols],
        lower: vec![0.0; cols],
        upper: vec![0.0; cols],
        reduced: vec![0.0; cols],
        iterations: 0,
        degenerate: 0,
        bland: false,
    };
    for j in 0..n {
        t.lower[j] = p.lower[j];
        t.upper[j] = p.upper[j];
        t.value[j] = p.lower[j];
    }
    let mut next_art = n + m;
    for (i, row) in p.rows.iter().enumerate() {
        for &(j, c) in &row.terms {
            t.a[i * cols + j] += c;
        }
        let s = n + i;
        let (lo, hi) = slack_bounds(row.relation);
        t.lower[s] = lo;
        t.upper[s] = hi;
        t.a[i * cols + s] = 1.0;
        if needs_artificial[i] {
            // slack rests at its finite bound nearest to zero
            let rest = if lo.is_finite() { lo } else { hi };
            t.state[s] = if lo.is_finite() { State::AtLower } else { State::AtUpper };
            t.value[s] = rest;
            let r = residual[i] - rest;
            let sigma = if r >= 0.0 { 1.0 } else { -1.0 };
            let a = next_art;
            next_art += 1;
            // scale the row so the artificial enters with coefficient +1
            if sigma < 0.0 {
                for x in &mut t.a[i * cols..(i + 1) * cols] {
                    *x = -*x;
                }
            }
            t.a[i * cols + a] = 1.0;
            t.lower[a] = 0.0;
            t.upper[a] = f64::INFINITY;
            t.basis[i] = a;
            t.state[a] = State::Basic;
            t.beta[i] = r.abs();
        } else {
            t.basis[i] = s;
            t.state[s] = State::Basic;
            t.beta[i] = residual[i];
        }
    }
    for i in 0..m {
        t.value[t.basis[i]] = t.beta[i];
    }
    let cap = iteration_cap(m, cols);

    if art_count > 0 {
        let mut phase1 = vec![0.0; cols];
        for c in &mut phase1[n + m..] {
            *c = 1.0;
        }
        match t.run(&phase1, cap) {
            None => return fail(LpStatus::NumericalFailure, t.iterations),
            Some(false) => return fail(LpStatus::NumericalFailure, t.iterations),
            Some(true) => {}
        }
        let infeasibility: f64 = (n + m..cols).map(|j| t.value[j]).sum();
        if infeasibility > CHECK_TOLERANCE {
            return fail(LpStatus::Infeasible, t.iterations);
        }
        for j in n + m..cols {
            t.upper[j] = 0.0;
            if t.state[j] != State::Basic {
                t.state[j] = State::AtLower;
                t.value[j] = 0.0;
            }
        }
    }

    let mut phase2 = vec![0.0; cols];
    phase2[..n].copy_from_slice(&p.cost);
    match t.run(&phase2, cap) {
        Some(true) => {}
        _ => return fail(LpStatus::NumericalFailure, t.iterations),
    }

    let x: Vec<f64> = t.value[..n].to_vec();
    // re-check against the original data
    let bounds_ok = x
        .iter()
        .zip(p.lower.iter().zip(&p.upper))
        .all(|(&v, (&l, &u))| v >= l - CHECK_TOLERANCE && v <= u + CHECK_TOLERANCE);
    let rows_ok = p.rows.iter().all(|row| {
        let lhs: f64 = row.terms.iter().map(|&(j, c)| c * x[j]).sum();
        match row.relation {
            Relation::Le => lhs <= row.rhs + CHECK_TOLERANCE,
            Relation::Ge => lhs >= row.rhs - CHECK_TOLERANCE,
            Relation::Eq => (lhs - row.rhs).abs() <= CHECK_TOLERANCE,
        }
    });
    if !bounds_ok || !rows_ok {
        return fail(LpStatus::NumericalFailure, t.iterations);
    }
    let value = p.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    LpSolution { status: LpStatus::Optimal, value, x, iterations: t.iterations }
}
