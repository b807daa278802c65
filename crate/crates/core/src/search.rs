//! Branch-and-bound over per-cell options under a constraint system.
//!
//! Each cell picks one option (a palette with an integer value). The
//! objective is either the product of values (palette sizes, i.e. the exact
//! realisation count) or their sum (weights). Cells are fixed in index order
//! and options are tried in the order given.
//!
//! Two bounds prune the tree. The cheap one combines the incumbent value with
//! the best option of every open cell. The scope bound spreads the objective
//! over constraint scopes: with scope weights `w_s` such that every cell is
//! covered with total weight at least 1, the objective score is at most
//! `sum_s w_s * best_s`, where `best_s` is the best score any feasible local
//! completion of scope `s` can reach. Recomputing `best_s` for the scopes
//! through a newly fixed cell doubles as forward checking, since a scope with
//! no feasible completion scores minus infinity.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

use crate::constraint::ConstraintSystem;
use crate::par;
use crate::template::Palette;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Objective {
    Product,
    Sum,
}

impl Objective {
    fn identity(self) -> u128 {
        match self {
            Objective::Product => 1,
            Objective::Sum => 0,
        }
    }

    #[inline]
    fn combine(self, a: u128, b: u128) -> u128 {
        match self {
            Objective::Product => a.saturating_mul(b),
            Objective::Sum => a.saturating_add(b),
        }
    }

    #[inline]
    fn score(self, v: u128) -> f64 {
        match self {
            Objective::Product => (v as f64).ln(),
            Objective::Sum => v as f64,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Opt {
    pub pal: Palette,
    pub value: u128,
}

pub(crate) struct Spec<'a> {
    pub sys: &'a ConstraintSystem,
    pub options: Vec<Vec<Opt>>,
    pub objective: Objective,
    pub budget: Option<u64>,
    pub parallel: bool,
    /// Keep every optimal assignment (up to `MAX_TIES`) instead of the first.
    pub keep_ties: bool,
}

pub(crate) const MAX_TIES: usize = 100_000;

#[derive(Clone, Debug)]
pub(crate) struct Outcome {
    pub best: Option<u128>,
    pub witnesses: Vec<Vec<Palette>>,
    pub nodes: u64,
    pub complete: bool,
    pub ties_truncated: bool,
}

const EPS: f64 = 1e-9;

struct Problem<'a> {
    sys: &'a ConstraintSystem,
    options: Vec<Vec<(Opt, f64)>>,
    objective: Objective,
    containing: Vec<Vec<u32>>,
    weight: Vec<f64>,
    max_score: Vec<f64>,
    covered: Vec<bool>,
    suffix: Vec<u128>,
    keep_ties: bool,
}

struct Shared {
    nodes: AtomicU64,
    budget: u64,
    aborted: AtomicBool,
    best: Mutex<Option<u128>>,
}

#[derive(Clone)]
struct Snapshot {
    palettes: Vec<Palette>,
    scope_val: Vec<f64>,
    acc: u128,
    bound: f64,
}

struct Worker<'a> {
    p: &'a Problem<'a>,
    shared: &'a Shared,
    palettes: Vec<Palette>,
    scope_val: Vec<f64>,
    local: u64,
    seen_total: u64,
    prune_ref: Option<u128>,
    own_best: Option<u128>,
    witnesses: Vec<Vec<Palette>>,
    ties_truncated: bool,
    stop_depth: usize,
    snapshots: Vec<Snapshot>,
}

impl<'a> Problem<'a> {
    fn new(spec: &'a Spec<'a>) -> Self {
        let sys = spec.sys;
        let m = sys.num_cells();
        let objective = spec.objective;
        let options: Vec<Vec<(Opt, f64)>> = spec
            .options
            .iter()
            .map(|os| os.iter().map(|&o| (o, objective.score(o.value))).collect())
            .collect();
        let mut containing = vec![Vec::new(); m];
        for s in 0..sys.num_scopes() {
            let mut cells: Vec<u32> = sys.scope(s).to_vec();
            cells.sort_unstable();
            cells.dedup();
            for c in cells {
                containing[c as usize].push(s as u32);
            }
        }
        let weight = (0..sys.num_scopes())
            .map(|s| {
                sys.scope(s)
                    .iter()
                    .map(|&c| 1.0 / containing[c as usize].len() as f64)
                    .fold(0.0, f64::max)
            })
            .collect();
        let max_score = options
            .iter()
            .map(|os| os.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let covered = containing.iter().map(|c| !c.is_empty()).collect();
        let mut suffix = vec![objective.identity(); m + 1];
        for c in (0..m).rev() {
            let best = options[c].iter().map(|o| o.0.value).max().unwrap_or(0);
            suffix[c] = objective.combine(suffix[c + 1], best);
        }
        Problem { sys, options, objective, containing, weight, max_score, covered, suffix, keep_ties: spec.keep_ties }
    }

    /// Best score of a feasible completion of scope `s` given the fixed cells.
    fn scope_best(&self, s: usize, palettes: &[Palette]) -> f64 {
        let scope = self.sys.scope(s);
        let mut open: Vec<usize> = Vec::new();
        let mut local: Vec<Palette> = Vec::with_capacity(scope.len());
        let mut fixed = 0.0;
        for (j, &c) in scope.iter().enumerate() {
            let pal = palettes[c as usize];
            if pal.is_empty() {
                if !open.iter().any(|&i| scope[i] == c) {
                    open.push(j);
                }
            } else if !scope[..j].contains(&c) {
                fixed += self
                    .options[c as usize]
                    .iter()
                    .find(|o| o.0.pal == pal)
                    .map_or(0.0, |o| o.1);
            }
            local.push(pal);
        }
        if open.is_empty() {
            return if self.sys.tuple_bad(&local) { f64::NEG_INFINITY } else { fixed };
        }
        let mut idx = vec![0usize; open.len()];
        let mut best = f64::NEG_INFINITY;
        loop {
            let mut sc = fixed;
            for (t, &j) in open.iter().enumerate() {
                let (o, s) = self.options[scope[j] as usize][idx[t]];
                sc += s;
                for (jj, &c) in scope.iter().enumerate() {
                    if c == scope[j] {
                        local[jj] = o.pal;
                    }
                }
            }
            if sc > best && !self.sys.tuple_bad(&local) {
                best = sc;
            }
            let mut t = 0;
            loop {
                if t == open.len() {
                    return best;
                }
                idx[t] += 1;
                if idx[t] < self.options[scope[open[t]] as usize].len() {
                    break;
                }
                idx[t] = 0;
                t += 1;
            }
        }
    }

    fn root(&self) -> Option<Snapshot> {
        let m = self.sys.num_cells();
        let palettes = vec![Palette::EMPTY; m];
        let mut scope_val = vec![0.0; self.sys.num_scopes()];
        let mut bound = 0.0;
        for (s, v) in scope_val.iter_mut().enumerate() {
            *v = self.scope_best(s, &palettes);
            if *v == f64::NEG_INFINITY {
                return None;
            }
            bound += self.weight[s] * *v;
        }
        for c in 0..m {
            if self.options[c].is_empty() {
                return None;
            }
            if !self.covered[c] {
                bound += self.max_score[c];
            }
        }
        Some(Snapshot { palettes, scope_val, acc: self.objective.identity(), bound })
    }
}

impl<'a> Worker<'a> {
    fn new(p: &'a Problem<'a>, shared: &'a Shared, snap: &Snapshot, stop_depth: usize) -> Self {
        Worker {
            p,
            shared,
            palettes: snap.palettes.clone(),
            scope_val: snap.scope_val.clone(),
            local: 0,
            seen_total: 0,
            prune_ref: *shared.best.lock().unwrap(),
            own_best: None,
            witnesses: Vec::new(),
            ties_truncated: false,
            stop_depth,
            snapshots: Vec::new(),
        }
    }

    fn sync(&mut self) -> bool {
        let total = self.shared.nodes.fetch_add(self.local, Ordering::Relaxed) + self.local;
        self.local = 0;
        self.seen_total = total;
        if total > self.shared.budget {
            self.shared.aborted.store(true, Ordering::Relaxed);
        }
        let global = *self.shared.best.lock().unwrap();
        if global > self.prune_ref {
            self.prune_ref = global;
        }
        !self.shared.aborted.load(Ordering::Relaxed)
    }

    /// Counts one node; false once the budget is spent.
    #[inline]
    fn tick(&mut self) -> bool {
        self.local += 1;
        if self.local >= 256 || self.seen_total + self.local > self.shared.budget {
            return self.sync();
        }
        true
    }

    #[inline]
    fn exact_prunes(&self, bound: u128) -> bool {
        match self.prune_ref {
            None => false,
            Some(b) => {
                if self.p.keep_ties {
                    bound < b
                } else {
                    bound <= b
                }
            }
        }
    }

    #[inline]
    fn score_prunes(&self, bound: f64) -> bool {
        match self.prune_ref {
            None => false,
            Some(b) => {
                let target = if self.p.keep_ties { b } else { b + 1 };
                bound < self.p.objective.score(target) - EPS
            }
        }
    }

    fn offer(&mut self, acc: u128) {
        let better = self.own_best.is_none_or(|b| acc > b);
        if better {
            self.own_best = Some(acc);
            self.witnesses.clear();
            self.witnesses.push(self.palettes.clone());
            if self.prune_ref.is_none_or(|b| acc > b) {
                self.prune_ref = Some(acc);
            }
            let mut g = self.shared.best.lock().unwrap();
            if g.is_none_or(|b| acc > b) {
                *g = Some(acc);
            }
        } else if self.p.keep_ties && Some(acc) == self.own_best {
            if self.witnesses.len() < MAX_TIES {
                self.witnesses.push(self.palettes.clone());
            } else {
                self.ties_truncated = true;
            }
        }
    }

    /// Returns false when the budget ran out.
    fn rec(&mut self, cell: usize, acc: u128, bound: f64) -> bool {
        let p = self.p;
        if cell == p.sys.num_cells() {
            self.offer(acc);
            return true;
        }
        if cell == self.stop_depth {
            self.snapshots.push(Snapshot {
                palettes: self.palettes.clone(),
                scope_val: self.scope_val.clone(),
                acc,
                bound,
            });
            return true;
        }
        let mut saved: Vec<(u32, f64)> = Vec::with_capacity(p.containing[cell].len());
        for oi in 0..p.options[cell].len() {
            if !self.tick() {
                self.palettes[cell] = Palette::EMPTY;
                return false;
            }
            let (opt, score) = p.options[cell][oi];
            let next = p.objective.combine(acc, opt.value);
            if self.exact_prunes(p.objective.combine(next, p.suffix[cell + 1])) {
                continue;
            }
            self.palettes[cell] = opt.pal;
            let mut nb = bound;
            if !p.covered[cell] {
                nb += score - p.max_score[cell];
            }
            saved.clear();
            let mut feasible = true;
            for &s in &p.containing[cell] {
                let v = p.scope_best(s as usize, &self.palettes);
                saved.push((s, self.scope_val[s as usize]));
                if v == f64::NEG_INFINITY {
                    feasible = false;
                    break;
                }
                nb += p.weight[s as usize] * (v - self.scope_val[s as usize]);
                self.scope_val[s as usize] = v;
            }
            let go_on = feasible && !self.score_prunes(nb);
            let ok = !go_on || self.rec(cell + 1, next, nb);
            for &(s, v) in saved.iter().rev() {
                self.scope_val[s as usize] = v;
            }
            if !ok {
                self.palettes[cell] = Palette::EMPTY;
                return false;
            }
        }
        self.palettes[cell] = Palette::EMPTY;
        true
    }
}

pub(crate) fn search(spec: &Spec<'_>) -> Outcome {
    let problem = Problem::new(spec);
    let shared = Shared {
        nodes: AtomicU64::new(0),
        budget: spec.budget.unwrap_or(u64::MAX),
        aborted: AtomicBool::new(false),
        best: Mutex::new(None),
    };
    let empty = Outcome { best: None, witnesses: Vec::new(), nodes: 0, complete: true, ties_truncated: false };
    let Some(root) = problem.root() else {
        return empty;
    };
    let m = spec.sys.num_cells();
    let results: Vec<(Option<u128>, Vec<Vec<Palette>>, bool)> = if spec.parallel && par::is_parallel() && m > 2 {
        // split into subtrees at a depth giving enough independent tasks
        let mut depth = 0;
        let mut width = 1usize;
        while depth < m - 1 && width < 64 {
            width = width.saturating_mul(problem.options[depth].len().max(1));
            depth += 1;
        }
        let mut splitter = Worker::new(&problem, &shared, &root, depth);
        splitter.rec(0, root.acc, root.bound);
        splitter.sync();
        let snaps = std::mem::take(&mut splitter.snapshots);
        let mut parts = vec![(splitter.own_best, splitter.witnesses, splitter.ties_truncated)];
        parts.extend(par::map_slice(&snaps, |snap| {
            let mut w = Worker::new(&problem, &shared, snap, usize::MAX);
            if !w.score_prunes(snap.bound) {
                w.rec(depth, snap.acc, snap.bound);
            }
            w.sync();
            (w.own_best, w.witnesses, w.ties_truncated)
        }));
        parts
    } else {
        let mut w = Worker::new(&problem, &shared, &root, usize::MAX);
        w.rec(0, root.acc, root.bound);
        w.sync();
        vec![(w.own_best, w.witnesses, w.ties_truncated)]
    };
    let best = results.iter().filter_map(|r| r.0).max();
    let mut witnesses = Vec::new();
    let mut ties_truncated = false;
    for (b, ws, t) in results {
        if b.is_some() && b == best {
            ties_truncated |= t;
            if spec.keep_ties {
                witnesses.extend(ws);
            } else if witnesses.is_empty() {
                witnesses = ws;
            }
        }
    }
    if witnesses.len() > MAX_TIES {
        witnesses.truncate(MAX_TIES);
        ties_truncated = true;
    }
    Outcome {
        best,
        witnesses,
        nodes: shared.nodes.load(Ordering::SeqCst),
        complete: !shared.aborted.load(Ordering::SeqCst),
        ties_truncated,
    }
}
