//! Placement search over the cells of a key object: simulated annealing and
//! the exhaustive greedy scan it is checked against.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::spatial_profile::KeyObject;

/// `(surface index, r, c)`.
pub type Cell = (usize, usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealingConfig {
    /// Initial temperature; iteration `i` runs at `t1 / (i + 1)`.
    pub t1: f64,
    pub i_max: usize,
    pub seed: u64,
}

impl Default for AnnealingConfig {
    fn default() -> Self {
        Self {
            t1: 100.0,
            i_max: 200,
            seed: 0,
        }
    }
}

impl AnnealingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t1.is_finite()) {
            return Err(Error::InvalidArgument(format!("T1 must be positive, got {}", self.t1)));
        }
        if self.i_max == 0 {
            return Err(Error::InvalidArgument("i_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub cell: Cell,
    pub cost: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub best: Cell,
    pub best_cost: f64,
    /// Cost queries, repeated cells included.
    pub evaluations: usize,
    /// Distinct cells whose cost was computed.
    pub unique_evaluations: usize,
    /// Distinct cells evaluated up to the iteration that first found `best`.
    pub evaluations_to_best: usize,
    pub iterations_to_best: usize,
    pub trace: Vec<TraceEntry>,
}

/// Memoizing wrapper around a cost function that counts queries.
struct Evaluator<F> {
    cost: F,
    memo: HashMap<Cell, f64>,
    queries: usize,
}

impl<F: FnMut(Cell) -> f64> Evaluator<F> {
    fn new(cost: F) -> Self {
        Self {
            cost,
            memo: HashMap::new(),
            queries: 0,
        }
    }

    fn eval(&mut self, cell: Cell) -> f64 {
        self.queries += 1;
        if let Some(&v) = self.memo.get(&cell) {
            return v;
        }
        let v = (self.cost)(cell);
        self.memo.insert(cell, v);
        v
    }

    fn unique(&self) -> usize {
        self.memo.len()
    }
}

fn better(a: (f64, Cell), b: (f64, Cell)) -> bool {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).is_lt()
}

/// Cell on a surface other than `current` whose anchor is nearest to `p`;
/// ties go to the lexicographically smallest cell. `None` for single-surface
/// objects.
pub fn cross_surface_fallback(p: &Vec3, k: &KeyObject, current: usize) -> Option<Cell> {
    let mut best: Option<(f64, Cell)> = None;
    for (s, surface) in k.surfaces().iter().enumerate() {
        if s == current {
            continue;
        }
        for c in 0..surface.rows() {
            for r in 0..surface.cols() {
                let d = (surface.cell_position(r as i64, c as i64) - p).norm_squared();
                let cand = (d, (s, r, c));
                if best.is_none_or(|b| better(cand, b)) {
                    best = Some(cand);
                }
            }
        }
    }
    best.map(|b| b.1)
}

/// The 8 neighbours of `a`, with off-grid moves redirected to the nearest
/// cell of another surface (or dropped on single-surface objects).
/// Deduplicated, in lexicographic order.
pub fn neighbors(a: Cell, k: &KeyObject) -> Vec<Cell> {
    let (s, r, c) = a;
    let surface = &k.surfaces()[s];
    let mut out = Vec::with_capacity(8);
    for dr in -1i64..=1 {
        for dc in -1i64..=1 {
            if (dr, dc) == (0, 0) {
                continue;
            }
            let (nr, nc) = (r as i64 + dr, c as i64 + dc);
            let cand = if surface.contains_cell(nr, nc) {
                Some((s, nr as usize, nc as usize))
            } else {
                cross_surface_fallback(&surface.cell_position(nr, nc), k, s)
            };
            out.extend(cand);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Lowest-cost neighbour of `a`; ties go to the smallest cell.
pub fn best_neighbor(a: Cell, k: &KeyObject, mut cost: impl FnMut(Cell) -> f64) -> Option<(Cell, f64)> {
    neighbors(a, k)
        .into_iter()
        .map(|n| (cost(n), n))
        .reduce(|acc, cand| if better(cand, acc) { cand } else { acc })
        .map(|(v, n)| (n, v))
}

/// Simulated annealing with best-neighbour proposals, a random global jump
/// whenever the best neighbour is worse than the current cell, and
/// Metropolis acceptance. Returns the best cell visited.
pub fn simulated_annealing(
    k: &KeyObject,
    cost: impl FnMut(Cell) -> f64,
    cfg: &AnnealingConfig,
) -> Result<SearchResult> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ev = Evaluator::new(cost);

    let s = rng.gen_range(0..k.surfaces().len());
    let surface = &k.surfaces()[s];
    let mut current = (s, rng.gen_range(0..surface.cols()), rng.gen_range(0..surface.rows()));
    let mut current_cost = ev.eval(current);
    let mut trace = vec![TraceEntry {
        iteration: 0,
        cell: current,
        cost: current_cost,
        accepted: true,
    }];
    let (mut best, mut best_cost) = (current, current_cost);
    let (mut evaluations_to_best, mut iterations_to_best) = (ev.unique(), 0);

    for i in 1..=cfg.i_max {
        let mut proposal = best_neighbor(current, k, |n| ev.eval(n));
        if proposal.is_none_or(|(_, v)| v > current_cost) {
            let n = rng.gen_range(0..k.total_cells());
            let cell = k.nth_cell(n).expect("index below total_cells");
            proposal = Some((cell, ev.eval(cell)));
        }
        let (cell, v) = proposal.expect("proposal set above");
        let temperature = cfg.t1 / (i as f64 + 1.0);
        let accepted = v <= current_cost || rng.gen::<f64>() < ((current_cost - v) / temperature).exp();
        trace.push(TraceEntry {
            iteration: i,
            cell,
            cost: v,
            accepted,
        });
        if v < best_cost {
            best = cell;
            best_cost = v;
            evaluations_to_best = ev.unique();
            iterations_to_best = i;
        }
        if accepted {
            current = cell;
            current_cost = v;
        }
    }

    Ok(SearchResult {
        best,
        best_cost,
        evaluations: ev.queries,
        unique_evaluations: ev.unique(),
        evaluations_to_best,
        iterations_to_best,
        trace,
    })
}

/// Evaluates every cell once in lexicographic order; the first minimum wins.
pub fn greedy_search(k: &KeyObject, mut cost: impl FnMut(Cell) -> f64) -> SearchResult {
    let mut trace = Vec::with_capacity(k.total_cells());
    let mut best: Option<(f64, Cell, usize)> = None;
    for (i, cell) in k.cells().enumerate() {
        let v = cost(cell);
        let improved = best.is_none_or(|(b, _, _)| v < b);
        if improved {
            best = Some((v, cell, i + 1));
        }
        trace.push(TraceEntry {
            iteration: i,
            cell,
            cost: v,
            accepted: improved,
        });
    }
    let (best_cost, best, found) = best.expect("key objects have at least one cell");
    SearchResult {
        best,
        best_cost,
        evaluations: trace.len(),
        unique_evaluations: trace.len(),
        evaluations_to_best: found,
        iterations_to_best: found - 1,
        trace,
    }
}

/// Full cost table in [`KeyObject::cells`] order.
pub fn cost_table(k: &KeyObject, cost: impl Fn(Cell) -> f64 + Sync) -> Vec<f64> {
    use rayon::prelude::*;
    let cells: Vec<Cell> = k.cells().collect();
    cells.par_iter().map(|&c| cost(c)).collect()
}

/// Index of `cell` in [`KeyObject::cells`] order.
pub fn cell_index(k: &KeyObject, cell: Cell) -> usize {
    let (s, r, c) = cell;
    let before: usize = k.surfaces()[..s].iter().map(|x| x.cell_count()).sum();
    before + r * k.surfaces()[s].rows() + c
}

/// CSV of a search trace: `iteration,surface,r,c,cost,accepted`.
pub fn trace_csv(result: &SearchResult, k: &KeyObject) -> String {
    let mut out = String::from("iteration,surface,r,c,cost,accepted\n");
    for e in &result.trace {
        let (s, r, c) = e.cell;
        let _ = writeln!(out, "{},{},{},{},{},{}", e.iteration, k.surfaces()[s].id, r, c, e.cost, e.accepted);
    }
    out
}
