//! Depth-first search for an antecedent offset `k`, one block column at a
//! time.
//!
//! A node assigns one column of `k`. Before descending, every row of the
//! partial transform `V = A (E - K)` is tested against the facets of its
//! projected zonotope (see [`plan`](super::plan)), which turns into an
//! interval for each entry of the next column of `V`. The integer columns
//! whose image falls in that box are enumerated by a small interval-pruned
//! search over the column's coordinates, values nearest the spatial error
//! first.
//!
//! Pruning uses the closed constraints, so exhausting the tree proves that
//! even the all-closed system has no solution. Complete assignments are
//! confirmed by recompression.

use std::time::Instant;

use super::plan::Plan;
use super::{Budget, ConstraintSystem, IgnoreReason, KVector, Outcome, Verdict};
use crate::error::{Error, Result};

/// Largest block (in coefficients) that may be searched without a budget.
const UNBOUNDED_LIMIT: usize = 16;
const BOUND_SLACK: f64 = 1e-9;
/// Limits on `|k - e|^2 - |e|^2` for the restricted passes run before the
/// exhaustive one.
const DEEPENING: [f64; 6] = [0.5, 1.0, 2.0, 3.0, 4.5, 6.5];

/// What to do with a complete assignment that satisfies the system but fails
/// recompression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnverifiedPolicy {
    /// Reject the point and keep searching. The search is then exact.
    #[default]
    Continue,
    /// Stop and report the block as ignored.
    Ignore,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Solver {
    pub unverified: UnverifiedPolicy,
}

enum Step {
    Continue,
    Found,
    Exhausted,
    Ignored,
}

struct Meter {
    nodes: u64,
    budget: Budget,
    start: Instant,
}

impl Meter {
    /// Accounts for one more node; false once the budget is spent.
    fn tick(&mut self) -> bool {
        if self.budget.max_nodes.is_some_and(|max| self.nodes >= max) {
            return false;
        }
        if self
            .budget
            .max_time
            .is_some_and(|limit| self.start.elapsed() >= limit)
        {
            return false;
        }
        self.nodes += 1;
        true
    }
}

impl Solver {
    pub fn new(unverified: UnverifiedPolicy) -> Self {
        Self { unverified }
    }

    /// Decides whether the system has an integer solution that recompresses
    /// to its block.
    ///
    /// Blocks larger than 16 coefficients need a bounded budget.
    pub fn solve(&self, system: &ConstraintSystem, budget: Budget) -> Result<Verdict> {
        system.validate()?;
        budget.validate()?;
        let shape = system.block().shape();
        if !budget.is_bounded() && system.dim() > UNBOUNDED_LIMIT {
            return Err(Error::UnboundedBudget {
                rows: shape.rows(),
                cols: shape.cols(),
            });
        }
        let mut meter = Meter {
            nodes: 0,
            budget,
            start: Instant::now(),
        };
        let plan = Plan::cached(shape, system.block().quant());
        let mut search = Search::new(&plan, system, self.unverified, &mut meter);
        let outcome = match search.run()? {
            Step::Found => Outcome::Feasible(KVector(search.k)),
            Step::Continue => Outcome::Infeasible,
            Step::Exhausted => Outcome::Exhausted,
            Step::Ignored => Outcome::Ignored(IgnoreReason::UnverifiedSolution),
        };
        Ok(Verdict {
            outcome,
            nodes: meter.nodes,
            elapsed: meter.start.elapsed(),
        })
    }
}

struct Search<'a> {
    plan: &'a Plan,
    system: &'a ConstraintSystem,
    policy: UnverifiedPolicy,
    meter: &'a mut Meter,
    /// Current offsets, block layout.
    k: Vec<i32>,
    /// Partial `V`: entry `(r, d)` at `r * cols + d`, indexed by depth.
    v: Vec<f64>,
    /// Distance budget left in the current pass.
    allowance: f64,
    /// Whether the current pass has cut any branch on distance.
    truncated: bool,
}

impl<'a> Search<'a> {
    fn new(
        plan: &'a Plan,
        system: &'a ConstraintSystem,
        policy: UnverifiedPolicy,
        meter: &'a mut Meter,
    ) -> Self {
        Self {
            plan,
            system,
            policy,
            meter,
            k: vec![0; system.dim()],
            v: vec![0.0; system.dim()],
            allowance: f64::INFINITY,
            truncated: false,
        }
    }

    fn run(&mut self) -> Result<Step> {
        if !self.meter.tick() {
            return Ok(Step::Exhausted);
        }
        // At high quality the rounded decompression itself is usually an
        // antecedent.
        let in_range = self.system.rounded().iter().all(|y| (0..=255).contains(y));
        if in_range && self.system.verify(&self.k)? {
            return Ok(Step::Found);
        }
        // Cover offsets lie about as close to e as k = 0 does, so passes
        // restricted to a small excess distance usually find them early.
        for limit in DEEPENING.into_iter().chain([f64::INFINITY]) {
            self.allowance = limit;
            self.truncated = false;
            match self.descend(0)? {
                Step::Continue if self.truncated => {}
                other => return Ok(other),
            }
        }
        Ok(Step::Continue)
    }

    fn descend(&mut self, depth: usize) -> Result<Step> {
        let plan = self.plan;
        let (rows, cols) = (plan.rows, plan.cols);
        if depth == cols {
            if self.system.verify(&self.k)? {
                return Ok(Step::Found);
            }
            // The facet test is looser than the rows, so a leaf may not solve
            // the system at all; only true solutions count as unverified.
            if self.policy == UnverifiedPolicy::Ignore && self.system.satisfied_by(&self.k) {
                return Ok(Step::Ignored);
            }
            return Ok(Step::Continue);
        }

        let level = &plan.levels[depth];
        let mut lo = vec![f64::NEG_INFINITY; rows];
        let mut hi = vec![f64::INFINITY; rows];
        for r in 0..rows {
            let prefix = &self.v[r * cols..r * cols + depth];
            for facet in &level.facets {
                let h = &facet.normal;
                let base: f64 = h[..depth].iter().zip(prefix).map(|(a, b)| a * b).sum();
                let reach = facet.support[r] + plan.tol;
                let (mut a, mut b) = ((-reach - base) / h[depth], (reach - base) / h[depth]);
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                lo[r] = lo[r].max(a);
                hi[r] = hi[r].min(b);
            }
            if lo[r] > hi[r] {
                return Ok(Step::Continue);
            }
        }

        let col = level.col;
        let e: Vec<f64> = (0..rows).map(|i| self.system.e()[i * cols + col]).collect();
        let y: Vec<i32> = (0..rows)
            .map(|i| self.system.rounded()[i * cols + col])
            .collect();
        let mut column = ColumnLattice::new(&plan.a, &e, &y, &lo, &hi, plan.tol, self.allowance);
        let allowance = self.allowance;
        while let Some((kcol, cost)) = column.next() {
            if !self.meter.tick() {
                return Ok(Step::Exhausted);
            }
            for i in 0..rows {
                self.k[i * cols + col] = kcol[i];
            }
            for r in 0..rows {
                self.v[r * cols + depth] = (0..rows)
                    .map(|i| plan.a[r * rows + i] * (e[i] - kcol[i] as f64))
                    .sum();
            }
            self.allowance = allowance - cost;
            let step = self.descend(depth + 1)?;
            self.allowance = allowance;
            match step {
                Step::Continue => {}
                other => return Ok(other),
            }
        }
        self.truncated |= column.truncated;
        Ok(Step::Continue)
    }
}

/// Integer vectors `k` with `A (e - k)` inside a box and `y - k` inside the
/// pixel range, produced lazily in depth-first order.
struct ColumnLattice<'a> {
    a: &'a [f64],
    n: usize,
    /// Range of each row of `A k`.
    row_lo: Vec<f64>,
    row_hi: Vec<f64>,
    /// Candidate values of each coordinate, best first, with their excess
    /// `(k - e)^2 - e^2`.
    values: Vec<Vec<(i32, f64)>>,
    allowance: f64,
    /// Excess of the fixed prefix, indexed by prefix length.
    spent: Vec<f64>,
    /// Set once a value is skipped for exceeding the allowance.
    truncated: bool,
    /// Row contribution range of coordinates `i..n`, at `i * n + r`.
    rest_min: Vec<f64>,
    rest_max: Vec<f64>,
    /// Row sums of the fixed prefix, at `i * n + r` for prefix length `i`.
    partial: Vec<f64>,
    next_value: Vec<usize>,
    depth: usize,
    current: Vec<i32>,
    tol: f64,
    done: bool,
}

impl<'a> ColumnLattice<'a> {
    fn new(
        a: &'a [f64],
        e: &[f64],
        y: &[i32],
        lo: &[f64],
        hi: &[f64],
        tol: f64,
        allowance: f64,
    ) -> Self {
        let n = e.len();
        let ae: Vec<f64> = (0..n)
            .map(|r| (0..n).map(|i| a[r * n + i] * e[i]).sum())
            .collect();
        let row_lo: Vec<f64> = (0..n).map(|r| ae[r] - hi[r]).collect();
        let row_hi: Vec<f64> = (0..n).map(|r| ae[r] - lo[r]).collect();

        // k = e - A^T V with V in the box.
        let mut values: Vec<Vec<(i32, f64)>> = Vec::with_capacity(n);
        let mut bounds = Vec::with_capacity(n);
        for i in 0..n {
            let (mut min, mut max) = (0.0, 0.0);
            for r in 0..n {
                let (p, q) = (a[r * n + i] * lo[r], a[r * n + i] * hi[r]);
                min += p.min(q);
                max += p.max(q);
            }
            let klo = ((e[i] - max - BOUND_SLACK).ceil() as i32).max(y[i] - 255);
            let khi = ((e[i] - min + BOUND_SLACK).floor() as i32).min(y[i]);
            // Cover offsets are close to the spatial error.
            let target = e[i];
            let mut vals: Vec<i32> = (klo..=khi).collect();
            vals.sort_by(|p, q| {
                (*p as f64 - target)
                    .abs()
                    .total_cmp(&(*q as f64 - target).abs())
                    .then(p.cmp(q))
            });
            let excess = |v: i32| (v as f64 - target).powi(2) - target * target;
            values.push(vals.into_iter().map(|v| (v, excess(v))).collect());
            bounds.push((klo, khi));
        }

        let mut rest_min = vec![0.0; (n + 1) * n];
        let mut rest_max = vec![0.0; (n + 1) * n];
        for i in (0..n).rev() {
            let (klo, khi) = bounds[i];
            for r in 0..n {
                let (p, q) = (a[r * n + i] * klo as f64, a[r * n + i] * khi as f64);
                rest_min[i * n + r] = rest_min[(i + 1) * n + r] + p.min(q);
                rest_max[i * n + r] = rest_max[(i + 1) * n + r] + p.max(q);
            }
        }

        let done = values.iter().any(|v| v.is_empty());
        Self {
            a,
            n,
            row_lo,
            row_hi,
            values,
            allowance,
            spent: vec![0.0; n + 1],
            truncated: false,
            rest_min,
            rest_max,
            partial: vec![0.0; (n + 1) * n],
            next_value: vec![0; n],
            depth: 0,
            current: vec![0; n],
            tol,
            done,
        }
    }

    /// The next column and its excess distance.
    fn next(&mut self) -> Option<(Vec<i32>, f64)> {
        let n = self.n;
        if self.done {
            return None;
        }
        loop {
            let i = self.depth;
            if self.next_value[i] == self.values[i].len() {
                if i == 0 {
                    self.done = true;
                    return None;
                }
                self.next_value[i] = 0;
                self.depth -= 1;
                continue;
            }
            let (val, excess) = self.values[i][self.next_value[i]];
            self.next_value[i] += 1;
            let spent = self.spent[i] + excess;
            // Values are sorted by excess, so the rest cost at least as much.
            if spent > self.allowance + BOUND_SLACK {
                self.truncated = true;
                self.next_value[i] = self.values[i].len();
                continue;
            }
            let fits = (0..n).all(|r| {
                let s = self.partial[i * n + r] + self.a[r * n + i] * val as f64;
                s + self.rest_min[(i + 1) * n + r] <= self.row_hi[r] + self.tol
                    && s + self.rest_max[(i + 1) * n + r] >= self.row_lo[r] - self.tol
            });
            if !fits {
                continue;
            }
            self.current[i] = val;
            if i + 1 == n {
                return Some((self.current.clone(), spent));
            }
            self.spent[i + 1] = spent;
            for r in 0..n {
                self.partial[(i + 1) * n + r] =
                    self.partial[i * n + r] + self.a[r * n + i] * val as f64;
            }
            self.depth += 1;
        }
    }
}

/// Search with the default policy.
pub fn solve_feasibility(system: &ConstraintSystem, budget: Budget) -> Result<Verdict> {
    Solver::default().solve(system, budget)
}
