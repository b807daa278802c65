//! `k`-decorated step graphons: a partition of `[0,1]` into weighted parts
//! and a symmetric array of probability vectors over the colours.
//!
//! Graphons built from templates or colourings on `K_n` use `n` equal parts;
//! the diagonal blocks, which the template does not describe, are a point
//! mass on colour 1.

mod cut;
mod sample;

pub use cut::{
    classical_cut_norm, cut_distance, cut_objective, delta_cut_upper, disjoint_cut_lower, l1_distance, CutResult,
    DeltaResult, Metric, EXACT_LIMIT,
};
pub use sample::{
    conditional_entropy_sample, hom_density, indicator_edges, neighborhood_count, sample, DecoratedGraph,
    NeighborhoodCount, NeighborhoodMetric, Sample, SampleMode,
};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng;
use crate::template::{Colouring, Template};

pub const TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct StepGraphon {
    k: u8,
    weights: Vec<f64>,
    /// `m * m * k`, row-major by part pair.
    cells: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepGraphonJson {
    pub weights: Vec<f64>,
    pub cells: Vec<Vec<Vec<f64>>>,
    pub k: u8,
}

/// `h_k(p) = -sum p_c log_k p_c`.
pub fn h_k(p: &[f64], k: u8) -> f64 {
    if k <= 1 {
        return 0.0;
    }
    let lk = (k as f64).ln();
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum::<f64>() / lk
}

impl StepGraphon {
    pub fn new(k: u8, weights: Vec<f64>, cells: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let m = weights.len();
        if m == 0 || k == 0 {
            return invalid("a graphon needs at least one part and one colour");
        }
        if cells.len() != m || cells.iter().any(|row| row.len() != m) {
            return invalid("cell array must be m x m");
        }
        let mut flat = Vec::with_capacity(m * m * k as usize);
        for row in &cells {
            for v in row {
                if v.len() != k as usize {
                    return invalid(format!("cell vectors must have {k} entries"));
                }
                flat.extend_from_slice(v);
            }
        }
        let g = StepGraphon { k, weights, cells: flat };
        g.validate()?;
        Ok(g)
    }

    fn from_flat(k: u8, weights: Vec<f64>, cells: Vec<f64>) -> Self {
        StepGraphon { k, weights, cells }
    }

    fn validate(&self) -> Result<()> {
        let m = self.parts();
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return invalid("part weights must be positive");
        }
        if (self.weights.iter().sum::<f64>() - 1.0).abs() > TOL * m as f64 {
            return invalid("part weights must sum to 1");
        }
        for a in 0..m {
            for b in 0..m {
                let v = self.cell(a, b);
                if v.iter().any(|&x| x < -TOL) || (v.iter().sum::<f64>() - 1.0).abs() > TOL * self.k as f64 {
                    return invalid(format!("cell ({a},{b}) is not a probability vector"));
                }
                if v.iter().zip(self.cell(b, a)).any(|(x, y)| (x - y).abs() > TOL) {
                    return invalid(format!("cells ({a},{b}) and ({b},{a}) differ"));
                }
            }
        }
        Ok(())
    }

    /// Same vector on every pair of a single part.
    pub fn constant(k: u8, p: Vec<f64>) -> Result<Self> {
        Self::new(k, vec![1.0], vec![vec![p]])
    }

    /// `W_t`: `n` equal parts, cell `(i, j)` uniform over `t(ij)`.
    pub fn from_template(t: &Template) -> Result<Self> {
        let Some(n) = t.host().complete_order() else {
            return invalid("graphons come from templates on complete hosts");
        };
        let k = t.k() as usize;
        let mut cells = vec![0.0; n * n * k];
        for i in 0..n {
            cells[(i * n + i) * k] = 1.0;
        }
        let mut e = 0;
        for i in 0..n {
            for j in i + 1..n {
                let pal = t.palette(e);
                let share = 1.0 / pal.len() as f64;
                for c in pal.colours() {
                    cells[(i * n + j) * k + c as usize - 1] = share;
                    cells[(j * n + i) * k + c as usize - 1] = share;
                }
                e += 1;
            }
        }
        Ok(Self::from_flat(t.k(), vec![1.0 / n as f64; n], cells))
    }

    /// `W_G`: point masses on the colours of `G`.
    pub fn from_colouring(c: &Colouring) -> Result<Self> {
        Self::from_template(&c.as_template())
    }

    /// Uniform random weights and cell vectors.
    pub fn random(k: u8, m: usize, seed: u64) -> Self {
        let mut r = rng::rng(seed);
        let mut weights: Vec<f64> = (0..m).map(|_| r.gen_range(0.05..1.0)).collect();
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
        let k_ = k as usize;
        let mut cells = vec![0.0; m * m * k_];
        for a in 0..m {
            for b in a..m {
                let mut v: Vec<f64> = (0..k_).map(|_| r.gen::<f64>() + 1e-3).collect();
                let s: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= s);
                cells[(a * m + b) * k_..(a * m + b + 1) * k_].copy_from_slice(&v);
                cells[(b * m + a) * k_..(b * m + a + 1) * k_].copy_from_slice(&v);
            }
        }
        Self::from_flat(k, weights, cells)
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    pub fn parts(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn cell(&self, a: usize, b: usize) -> &[f64] {
        let (m, k) = (self.parts(), self.k as usize);
        &self.cells[(a * m + b) * k..(a * m + b + 1) * k]
    }

    /// Part containing `x` in `[0,1)`.
    pub fn part_of(&self, x: f64) -> usize {
        let mut acc = 0.0;
        for (a, &w) in self.weights.iter().enumerate() {
            acc += w;
            if x < acc {
                return a;
            }
        }
        self.parts() - 1
    }

    /// Part boundaries `0 = b_0 < ... < b_m = 1`.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        let mut acc = 0.0;
        for &w in &self.weights {
            acc += w;
            out.push(acc);
        }
        *out.last_mut().expect("nonempty") = 1.0;
        out
    }

    pub fn to_json(&self) -> StepGraphonJson {
        let m = self.parts();
        StepGraphonJson {
            weights: self.weights.clone(),
            cells: (0..m).map(|a| (0..m).map(|b| self.cell(a, b).to_vec()).collect()).collect(),
            k: self.k,
        }
    }

    pub fn from_json(j: &StepGraphonJson) -> Result<Self> {
        Self::new(j.k, j.weights.clone(), j.cells.clone())
    }

    /// Relabels parts: part `a` of the result is part `perm[a]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let (m, k) = (self.parts(), self.k as usize);
        let mut cells = vec![0.0; m * m * k];
        for a in 0..m {
            for b in 0..m {
                cells[(a * m + b) * k..(a * m + b + 1) * k].copy_from_slice(self.cell(perm[a], perm[b]));
            }
        }
        Self::from_flat(self.k, perm.iter().map(|&a| self.weights[a]).collect(), cells)
    }

    /// The same function on a finer partition: `pieces[i] = (part, mass)`
    /// with pieces listed left to right.
    fn split(&self, pieces: &[(usize, f64)]) -> Self {
        let (m, k) = (pieces.len(), self.k as usize);
        let mut cells = vec![0.0; m * m * k];
        for (i, &(a, _)) in pieces.iter().enumerate() {
            for (j, &(b, _)) in pieces.iter().enumerate() {
                cells[(i * m + j) * k..(i * m + j + 1) * k].copy_from_slice(self.cell(a, b));
            }
        }
        Self::from_flat(self.k, pieces.iter().map(|p| p.1).collect(), cells)
    }
}

/// `Ent(W) = sum_{a,b} w_a w_b h_k(W(a,b))`.
pub fn entropy_graphon(w: &StepGraphon) -> f64 {
    let m = w.parts();
    let mut total = 0.0;
    for a in 0..m {
        for b in 0..m {
            total += w.weights[a] * w.weights[b] * h_k(w.cell(a, b), w.k);
        }
    }
    total
}

/// Lengths of the overlaps between `[i/n, (i+1)/n)` and each part.
fn grid_overlaps(w: &StepGraphon, n: usize) -> Vec<Vec<f64>> {
    let bounds = w.boundaries();
    (0..n)
        .map(|i| {
            let (lo, hi) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
            (0..w.parts()).map(|a| (hi.min(bounds[a + 1]) - lo.max(bounds[a])).max(0.0)).collect()
        })
        .collect()
}

/// `<W>_n`: `n` equal parts, each cell the average of `W` over its square.
pub fn average_graphon(w: &StepGraphon, n: usize) -> Result<StepGraphon> {
    if n == 0 {
        return invalid("average needs n >= 1");
    }
    let ov = grid_overlaps(w, n);
    let (m, k) = (w.parts(), w.k as usize);
    let nn = (n * n) as f64;
    let mut cells = vec![0.0; n * n * k];
    for i in 0..n {
        for j in 0..n {
            let out = &mut cells[(i * n + j) * k..(i * n + j + 1) * k];
            for a in 0..m {
                if ov[i][a] == 0.0 {
                    continue;
                }
                for b in 0..m {
                    let mass = ov[i][a] * ov[j][b] * nn;
                    if mass == 0.0 {
                        continue;
                    }
                    for (o, &x) in out.iter_mut().zip(w.cell(a, b)) {
                        *o += mass * x;
                    }
                }
            }
        }
    }
    Ok(StepGraphon::from_flat(w.k, vec![1.0 / n as f64; n], cells))
}

/// `E[W | S]` for a partition of the parts of `W` into classes. Class `c`
/// becomes part `c` of the result.
pub fn conditional_expectation(w: &StepGraphon, classes: &[Vec<usize>]) -> Result<StepGraphon> {
    let m = w.parts();
    let mut seen = vec![false; m];
    for &a in classes.iter().flatten() {
        if a >= m || std::mem::replace(&mut seen[a], true) {
            return invalid("classes must partition the parts");
        }
    }
    if seen.iter().any(|s| !s) || classes.iter().any(|c| c.is_empty()) {
        return invalid("classes must partition the parts into nonempty sets");
    }
    let q = classes.len();
    let k = w.k as usize;
    let mass: Vec<f64> = classes.iter().map(|c| c.iter().map(|&a| w.weights[a]).sum()).collect();
    let mut cells = vec![0.0; q * q * k];
    for (x, cx) in classes.iter().enumerate() {
        for (y, cy) in classes.iter().enumerate() {
            let out = &mut cells[(x * q + y) * k..(x * q + y + 1) * k];
            for &a in cx {
                for &b in cy {
                    let f = w.weights[a] * w.weights[b] / (mass[x] * mass[y]);
                    for (o, &v) in out.iter_mut().zip(w.cell(a, b)) {
                        *o += f * v;
                    }
                }
            }
        }
    }
    Ok(StepGraphon::from_flat(w.k, mass, cells))
}

/// `E[W | S]` written back on the parts of `W`, for comparisons on a common
/// partition.
fn conditional_on_parts(w: &StepGraphon, classes: &[Vec<usize>]) -> Result<StepGraphon> {
    let e = conditional_expectation(w, classes)?;
    let mut class_of = vec![0; w.parts()];
    for (c, members) in classes.iter().enumerate() {
        for &a in members {
            class_of[a] = c;
        }
    }
    let pieces: Vec<(usize, f64)> = (0..w.parts()).map(|a| (class_of[a], w.weights[a])).collect();
    Ok(e.split(&pieces))
}

#[derive(Clone, Debug)]
pub struct WeakRegularity {
    /// Parts of `W` in each class.
    pub classes: Vec<Vec<usize>>,
    pub conditional: StepGraphon,
    /// `d_k(W, E[W|S])`, exact when `W` has at most `EXACT_LIMIT` parts.
    pub distance: f64,
    pub exact: bool,
}

/// Greedy cut-norm refinement. Each round finds a maximising pair `(S, T)`
/// for `W - E[W|S]` and applies whichever single split of one class by `S`
/// or by `T` lowers the residual most, until `m` classes or a zero residual.
/// Classes are unions of parts of `W`, so they need not have equal measure.
pub fn weak_regularity(w: &StepGraphon, m: usize) -> Result<WeakRegularity> {
    if m == 0 {
        return invalid("weak regularity needs m >= 1");
    }
    let mut classes: Vec<Vec<usize>> = vec![(0..w.parts()).collect()];
    let residual = |classes: &[Vec<usize>]| -> Result<CutResult> {
        cut_distance(w, &conditional_on_parts(w, classes)?, Metric::Dk)
    };
    let mut current = residual(&classes)?;
    while classes.len() < m && current.value > TOL {
        let (s, t) = current.witness.clone().expect("positive residual has a witness");
        let mut best: Option<(f64, Vec<Vec<usize>>, CutResult)> = None;
        for set in [&s, &t] {
            for c in 0..classes.len() {
                let (inside, outside): (Vec<usize>, Vec<usize>) = classes[c].iter().partition(|&&a| set[a]);
                if inside.is_empty() || outside.is_empty() {
                    continue;
                }
                let mut next = classes.clone();
                next[c] = inside;
                next.push(outside);
                let r = residual(&next)?;
                if best.as_ref().is_none_or(|b| r.value < b.0 - TOL) {
                    best = Some((r.value, next, r));
                }
            }
        }
        match best {
            Some((_, next, r)) => {
                classes = next;
                current = r;
            }
            None => break,
        }
    }
    for c in classes.iter_mut() {
        c.sort_unstable();
    }
    let order = {
        let mut idx: Vec<usize> = (0..classes.len()).collect();
        idx.sort_by_key(|&i| classes[i][0]);
        idx
    };
    let classes: Vec<Vec<usize>> = order.into_iter().map(|i| classes[i].clone()).collect();
    Ok(WeakRegularity {
        conditional: conditional_expectation(w, &classes)?,
        distance: current.value,
        exact: current.exact,
        classes,
    })
}
