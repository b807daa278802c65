//! The constructive container pipeline.
//!
//! A forbidden family on a host becomes an `r`-uniform hypergraph on
//! `cells x colours`: one edge per (embedding, member). Colourings avoiding
//! the family are exactly the transversal independent sets. The hypergraph
//! is sparsified and made linear, containers are grown by a max-degree
//! branching procedure, and each container is read back as a template.
//!
//! The branching procedure is a design choice; it is accepted on its checked
//! postconditions (coverage, edge threshold) rather than on any size bound.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng as _;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::host::{binomial, HostGraph};
use crate::par;
use crate::properties::ForbiddenFamily;
use crate::rng;
use crate::template::{entropy_of, Colour, Palette, Template};

/// Hypergraph vertex of cell `e` and colour `c`.
#[inline]
pub fn vertex_of(cell: usize, c: Colour, k: u8) -> u32 {
    (cell * k as usize + c as usize - 1) as u32
}

#[derive(Clone, Debug)]
pub struct ConstraintHypergraph {
    pub r: usize,
    pub k: u8,
    pub num_cells: usize,
    /// Sorted vertex lists.
    pub edges: Vec<Vec<u32>>,
}

impl ConstraintHypergraph {
    pub fn num_vertices(&self) -> usize {
        self.num_cells * self.k as usize
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn with_edges(&self, edges: Vec<Vec<u32>>) -> Self {
        ConstraintHypergraph { edges, ..self.clone() }
    }

    /// Edges lying inside the vertex set.
    pub fn induced_edges(&self, set: &Bits) -> usize {
        self.edges.iter().filter(|e| e.iter().all(|&v| set.get(v))).count()
    }

    pub fn is_linear(&self) -> bool {
        overlapping_pairs(&self.edges, self.num_vertices()).is_empty()
    }

    /// Independent set of a colouring, `{(e, c(e))}`.
    pub fn colouring_set(&self, colours: &[Colour]) -> Bits {
        let mut b = Bits::new(self.num_vertices());
        for (cell, &c) in colours.iter().enumerate() {
            b.set(vertex_of(cell, c, self.k));
        }
        b
    }
}

/// Either the hypergraph, or for single-cell patterns the one template that
/// removes the forbidden colours everywhere.
#[derive(Clone, Debug)]
pub enum Built {
    Hypergraph(ConstraintHypergraph),
    Direct(Template),
}

pub fn build_constraint_hypergraph(f: &ForbiddenFamily, host: Arc<HostGraph>) -> Result<Built> {
    let sys = f.constraints(&host)?;
    let k = f.k();
    if sys.arity() == 1 {
        let banned = f.members().iter().fold(Palette::EMPTY, |p, m| p.union(Palette::singleton(m[0])));
        let keep = Palette::from_mask(Palette::full(k).mask() & !banned.mask());
        if keep.is_empty() {
            return Err(Error::EmptyMeet { cell: 0 });
        }
        return Ok(Built::Direct(Template::constant(host, k, keep)?));
    }
    let mut edges = Vec::with_capacity(sys.num_scopes() * sys.num_members());
    for s in 0..sys.num_scopes() {
        let scope = sys.scope(s);
        for m in 0..sys.num_members() {
            let mut e: Vec<u32> =
                scope.iter().zip(sys.member(m)).map(|(&cell, &c)| vertex_of(cell as usize, c, k)).collect();
            e.sort_unstable();
            edges.push(e);
        }
    }
    Ok(Built::Hypergraph(ConstraintHypergraph { r: sys.arity(), k, num_cells: host.num_cells(), edges }))
}

/// Fixed-width bitset over hypergraph vertices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits(Vec<u64>);

impl Bits {
    pub fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64).max(1)])
    }

    pub fn full(n: usize) -> Self {
        let mut b = Bits::new(n);
        for v in 0..n {
            b.set(v as u32);
        }
        b
    }

    #[inline]
    pub fn get(&self, v: u32) -> bool {
        self.0[(v >> 6) as usize] >> (v & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, v: u32) {
        self.0[(v >> 6) as usize] |= 1 << (v & 63);
    }

    #[inline]
    pub fn clear(&mut self, v: u32) {
        self.0[(v >> 6) as usize] &= !(1 << (v & 63));
    }

    pub fn is_subset(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }
}

/// Unordered pairs of distinct edges sharing at least two vertices.
pub fn overlapping_pairs(edges: &[Vec<u32>], num_vertices: usize) -> Vec<(usize, usize)> {
    let mut holders: Vec<Vec<u32>> = vec![Vec::new(); num_vertices];
    for (i, e) in edges.iter().enumerate() {
        for &v in e {
            holders[v as usize].push(i as u32);
        }
    }
    let mut out = Vec::new();
    let mut hits = vec![0u16; edges.len()];
    for (i, e) in edges.iter().enumerate() {
        let mut touched = Vec::new();
        for &v in e {
            for &j in &holders[v as usize] {
                if (j as usize) > i {
                    if hits[j as usize] == 0 {
                        touched.push(j);
                    }
                    hits[j as usize] += 1;
                }
            }
        }
        touched.sort_unstable();
        for j in touched {
            if hits[j as usize] >= 2 {
                out.push((i, j as usize));
            }
            hits[j as usize] = 0;
        }
    }
    out
}

/// `p = eps1 / (24 k^{2 C(N,2) - 3} C(N,3) C(n-3, N-3))`, unclipped.
pub fn sparsification_probability(eps1: f64, k: u8, small: usize, n: usize) -> f64 {
    let r = binomial(small, 2) as i32;
    let denom = 24.0
        * (k as f64).powi(2 * r - 3)
        * binomial(small, 3) as f64
        * binomial(n.saturating_sub(3), small.saturating_sub(3)) as f64;
    eps1 / denom
}

#[derive(Clone, Debug, Serialize)]
pub struct SparsifyStats {
    pub p: f64,
    pub p_clipped: bool,
    pub edges_h: usize,
    pub edges_sparse: usize,
    /// Overlapping pairs in the sparsified hypergraph.
    pub overlapping_pairs: usize,
    pub edges_linear: usize,
    /// `e(H') >= p e(H) / 2`.
    pub f1: bool,
    /// Overlapping pairs at most `eps1 p C(n,N) / 8`.
    pub f2: bool,
}

/// Keeps each edge with the sparsification probability (`p` overrides the
/// formula), then deletes one edge of every overlapping pair. Deletion is
/// greedy in edge order: an edge survives if it overlaps no survivor.
pub fn sparsify_and_linearize(
    h: &ConstraintHypergraph,
    eps1: f64,
    small: usize,
    n: usize,
    p: Option<f64>,
    seed: u64,
) -> (ConstraintHypergraph, SparsifyStats) {
    let raw = p.unwrap_or_else(|| sparsification_probability(eps1, h.k, small, n));
    let clipped = !(0.0..=1.0).contains(&raw) || raw.is_nan();
    let p = if raw.is_nan() { 1.0 } else { raw.clamp(0.0, 1.0) };
    let mut r = rng::stream(seed, 0);
    let kept: Vec<Vec<u32>> = h.edges.iter().filter(|_| r.gen::<f64>() < p).cloned().collect();
    let pairs = overlapping_pairs(&kept, h.num_vertices());
    let mut dead = vec![false; kept.len()];
    // pairs come sorted by first index, so a pair is resolved once its first
    // edge is dead; otherwise the later edge goes
    for &(i, j) in &pairs {
        if !dead[i] {
            dead[j] = true;
        }
    }
    let linear: Vec<Vec<u32>> = kept.iter().zip(&dead).filter(|(_, &d)| !d).map(|(e, _)| e.clone()).collect();
    let nsets = binomial(n, small) as f64;
    let stats = SparsifyStats {
        p,
        p_clipped: clipped,
        edges_h: h.num_edges(),
        edges_sparse: kept.len(),
        overlapping_pairs: pairs.len(),
        edges_linear: linear.len(),
        f1: kept.len() as f64 >= p * h.num_edges() as f64 / 2.0,
        f2: pairs.len() as f64 <= eps1 * p * nsets / 8.0,
    };
    (h.with_edges(linear), stats)
}

#[derive(Clone, Copy, Debug)]
pub struct ContainerOptions {
    /// Stop once `e(H[C]) < delta e(H)`.
    pub delta: f64,
    /// Only independent sets with one vertex per cell need covering; taking
    /// `(e, c)` then also drops the other colours of `e`.
    pub transversal: bool,
    pub budget: Option<u64>,
}

struct Shared {
    nodes: AtomicU64,
    aborted: AtomicBool,
    budget: u64,
}

#[derive(Clone)]
struct State {
    alive: Bits,
    fingerprint: Bits,
    degree: Vec<u32>,
    edge_alive: Vec<bool>,
    live_edges: usize,
}

struct Algo<'a> {
    h: &'a ConstraintHypergraph,
    incidence: Vec<Vec<u32>>,
    threshold: f64,
    transversal: bool,
}

impl Algo<'_> {
    fn remove(&self, s: &mut State, v: u32) {
        if !s.alive.get(v) {
            return;
        }
        s.alive.clear(v);
        for &e in &self.incidence[v as usize] {
            if s.edge_alive[e as usize] {
                s.edge_alive[e as usize] = false;
                s.live_edges -= 1;
                for &u in &self.h.edges[e as usize] {
                    s.degree[u as usize] -= 1;
                }
            }
        }
    }

    /// Puts `v` in the fingerprint and removes every vertex whose presence
    /// would complete an edge with fingerprint vertices.
    fn take(&self, s: &mut State, v: u32) {
        s.fingerprint.set(v);
        if self.transversal {
            let k = self.h.k as u32;
            let base = v / k * k;
            for u in base..base + k {
                if u != v {
                    self.remove(s, u);
                }
            }
        }
        let mut forced = Vec::new();
        for &e in &self.incidence[v as usize] {
            if !s.edge_alive[e as usize] {
                continue;
            }
            let mut open = self.h.edges[e as usize].iter().filter(|&&u| !s.fingerprint.get(u));
            if let (Some(&u), None) = (open.next(), open.next()) {
                forced.push(u);
            }
        }
        for u in forced {
            self.remove(s, u);
        }
    }

    fn done(&self, s: &State) -> bool {
        (s.live_edges as f64) < self.threshold
    }

    /// Highest-degree vertex outside the fingerprint, lowest index on ties.
    fn pick(&self, s: &State) -> u32 {
        let mut best = (0, u32::MAX);
        for v in 0..self.h.num_vertices() as u32 {
            if s.alive.get(v) && !s.fingerprint.get(v) && s.degree[v as usize] > best.0 {
                best = (s.degree[v as usize], v);
            }
        }
        best.1
    }

    fn children(&self, s: &State) -> [State; 2] {
        let v = self.pick(s);
        debug_assert!(v != u32::MAX, "a live edge always has an open vertex");
        let mut out = s.clone();
        self.remove(&mut out, v);
        let mut inside = s.clone();
        self.take(&mut inside, v);
        [out, inside]
    }

    fn run(&self, s: State, shared: &Shared, local: &mut u64, acc: &mut Vec<Bits>) {
        *local += 1;
        if *local >= 1024 {
            let seen = shared.nodes.fetch_add(*local, Ordering::Relaxed) + *local;
            *local = 0;
            if seen > shared.budget {
                shared.aborted.store(true, Ordering::Relaxed);
            }
        }
        if shared.aborted.load(Ordering::Relaxed) {
            return;
        }
        if self.done(&s) {
            acc.push(s.alive);
            return;
        }
        for child in self.children(&s) {
            self.run(child, shared, local, acc);
        }
    }
}

#[derive(Clone, Debug)]
pub struct ContainerRun {
    pub containers: Vec<Bits>,
    /// Leaves before removing containers held inside others.
    pub leaves: usize,
    pub nodes: u64,
}

/// Containers for the independent sets of `h`: every independent set (every
/// transversal one, in transversal mode) lies inside some container, and each
/// container spans fewer than `delta e(h)` edges. Containers held inside
/// another are dropped. Output order does not depend on the thread count.
pub fn compute_containers(h: &ConstraintHypergraph, opts: ContainerOptions) -> Result<ContainerRun> {
    let nv = h.num_vertices();
    let mut incidence = vec![Vec::new(); nv];
    for (i, e) in h.edges.iter().enumerate() {
        for &v in e {
            incidence[v as usize].push(i as u32);
        }
    }
    let mut degree = vec![0u32; nv];
    for e in &h.edges {
        for &v in e {
            degree[v as usize] += 1;
        }
    }
    let algo = Algo {
        h,
        incidence,
        threshold: opts.delta * h.num_edges() as f64,
        transversal: opts.transversal,
    };
    let root = State {
        alive: Bits::full(nv),
        fingerprint: Bits::new(nv),
        degree,
        edge_alive: vec![true; h.num_edges()],
        live_edges: h.num_edges(),
    };
    let shared = Shared {
        nodes: AtomicU64::new(0),
        aborted: AtomicBool::new(false),
        budget: opts.budget.unwrap_or(u64::MAX),
    };
    if h.num_edges() == 0 || algo.done(&root) {
        return Ok(ContainerRun { containers: vec![root.alive], leaves: 1, nodes: 1 });
    }
    // breadth-first frontier, then independent subtrees
    let mut frontier = vec![root];
    let mut finished: Vec<Bits> = Vec::new();
    let mut expanded = 0u64;
    while !frontier.is_empty() && frontier.len() < 64 && expanded < 4096 {
        let mut next = Vec::new();
        for s in frontier {
            expanded += 1;
            if algo.done(&s) {
                finished.push(s.alive);
            } else {
                next.extend(algo.children(&s));
            }
        }
        frontier = next;
    }
    let parts = par::map_slice(&frontier, |s| {
        let mut acc = Vec::new();
        let mut local = 0;
        algo.run(s.clone(), &shared, &mut local, &mut acc);
        shared.nodes.fetch_add(local, Ordering::Relaxed);
        acc
    });
    let nodes = shared.nodes.load(Ordering::SeqCst) + expanded;
    if shared.aborted.load(Ordering::SeqCst) || nodes > shared.budget {
        return Err(Error::ResourceLimit { explored: nodes, partial: 0 });
    }
    let mut all = finished;
    all.extend(parts.into_iter().flatten());
    let leaves = all.len();
    Ok(ContainerRun { containers: drop_dominated(all), leaves, nodes })
}

/// Removes duplicates and sets contained in another set, keeping first-seen
/// order among survivors.
pub fn drop_dominated(sets: Vec<Bits>) -> Vec<Bits> {
    let mut order: Vec<usize> = (0..sets.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(sets[i].len()));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if !kept.iter().any(|&j| sets[i].is_subset(&sets[j])) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    let mut sets: Vec<Option<Bits>> = sets.into_iter().map(Some).collect();
    kept.into_iter().map(|i| sets[i].take().expect("kept once")).collect()
}

/// Palette of cell `e` is `{c : (e, c) in C}`. Containers leaving some cell
/// without colours are dropped; the second value counts them.
pub fn templates_from_containers(containers: &[Bits], host: Arc<HostGraph>, k: u8) -> Result<(Vec<Template>, usize)> {
    let mut out = Vec::new();
    let mut dropped = 0;
    for c in containers {
        let pals: Vec<Palette> = (0..host.num_cells())
            .map(|cell| {
                (1..=k).filter(|&col| c.get(vertex_of(cell, col, k))).fold(Palette::EMPTY, |p, col| {
                    p.union(Palette::singleton(col))
                })
            })
            .collect();
        if pals.iter().any(|p| p.is_empty()) {
            dropped += 1;
        } else {
            out.push(Template::new(host.clone(), k, pals)?);
        }
    }
    Ok((out, dropped))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum Coverage {
    Exact { covered: u128, total: u128, fraction: f64 },
    Sampled { covered: u64, samples: u64, fraction: f64, low: f64, high: f64 },
}

impl Coverage {
    pub fn fraction(&self) -> f64 {
        match *self {
            Coverage::Exact { fraction, .. } | Coverage::Sampled { fraction, .. } => fraction,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum CoverageMode {
    /// Enumerate the whole property at this order.
    Exact { budget: Option<u64> },
    /// Uniform members by rejection from uniform colourings.
    Sampled { samples: u64, seed: u64 },
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054;
    let nf = n as f64;
    let ph = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (ph + z * z / (2.0 * nf)) / denom;
    let half = z * (ph * (1.0 - ph) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn covered_by(colours: &[Colour], family: &[Template]) -> bool {
    family.iter().any(|t| colours.iter().zip(t.palettes()).all(|(&c, p)| p.contains(c)))
}

/// Fraction of colourings avoiding `f` on `host` realised by some template.
pub fn coverage(f: &ForbiddenFamily, host: &HostGraph, family: &[Template], mode: CoverageMode) -> Result<Coverage> {
    let sys = f.constraints(host)?;
    match mode {
        CoverageMode::Exact { budget } => {
            let (covered, stats) = sys.fold(
                budget,
                || 0u128,
                |acc, c| {
                    if covered_by(c, family) {
                        *acc += 1
                    }
                },
                |a, b| a + b,
            )?;
            let total = stats.count;
            Ok(Coverage::Exact { covered, total, fraction: if total == 0 { 1.0 } else { covered as f64 / total as f64 } })
        }
        CoverageMode::Sampled { samples, seed } => {
            let k = f.k();
            let mut r = rng::stream(seed, 1);
            let mut colours = vec![1 as Colour; host.num_cells()];
            let (mut hits, mut got, mut draws) = (0u64, 0u64, 0u64);
            while got < samples {
                draws += 1;
                if draws > samples.saturating_mul(10_000).max(100_000) && (got as f64) < 1e-4 * draws as f64 {
                    return Err(Error::ResourceLimit { explored: draws, partial: got as u128 });
                }
                for c in colours.iter_mut() {
                    *c = r.gen_range(1..=k);
                }
                if sys.violates(&colours) {
                    continue;
                }
                got += 1;
                if covered_by(&colours, family) {
                    hits += 1;
                }
            }
            let (low, high) = wilson_interval(hits, got);
            Ok(Coverage::Sampled { covered: hits, samples: got, fraction: hits as f64 / got as f64, low, high })
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContainerReport {
    pub n: usize,
    pub eps: f64,
    pub eps1: f64,
    pub delta: f64,
    pub family_size: usize,
    pub dropped_improper: usize,
    pub leaves: usize,
    pub nodes: u64,
    pub max_entropy: f64,
    /// `eps C(n, N)`.
    pub bad_threshold: f64,
    pub bad_counts: Vec<u64>,
    pub all_bad_below: bool,
    pub edges_h: usize,
    pub edge_bounds_hold: bool,
    pub sparsify: Option<SparsifyStats>,
    /// Containers spanning at least `eps1 e(H)` edges of `H` that keep at
    /// least `eps1 e(H') / 2` edges of `H'`, out of those spanning that many.
    pub f3_checked: usize,
    pub f3_held: usize,
    /// Every container spans fewer than `delta e(H'')` edges of `H''`.
    pub threshold_held: bool,
    pub coverage: Option<Coverage>,
    /// `max_entropy <= ex + eps C(n, 2)`, when `ex` was supplied.
    pub entropy_bound_held: Option<bool>,
}

#[derive(Clone, Copy, Debug)]
pub struct PipelineOptions {
    pub eps: f64,
    /// Defaults to `eps / k^{C(N,2)}`.
    pub eps1: Option<f64>,
    /// Defaults to `eps C(n,N) / e(H)`, which makes the edge threshold the
    /// requested bad-set bound.
    pub delta: Option<f64>,
    pub sparsify: bool,
    /// Overrides the sparsification probability.
    pub p: Option<f64>,
    pub transversal: bool,
    pub seed: u64,
    pub budget: Option<u64>,
    pub coverage: Option<CoverageMode>,
    pub ex: Option<f64>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            eps: 0.6,
            eps1: None,
            delta: None,
            sparsify: true,
            p: None,
            transversal: true,
            seed: 0,
            budget: None,
            coverage: Some(CoverageMode::Exact { budget: None }),
            ex: None,
        }
    }
}

/// Hypergraph, sparsification, containers, templates and validation in one go.
pub fn container_pipeline(f: &ForbiddenFamily, host: Arc<HostGraph>, opts: PipelineOptions) -> Result<(Vec<Template>, ContainerReport)> {
    if !(opts.eps > 0.0) {
        return invalid("eps must be positive");
    }
    let small = match f.pattern() {
        crate::host::HostKind::Complete { n } => *n,
        _ => f.order(),
    };
    let n = host.complete_order().unwrap_or(host.num_vertices());
    let k = f.k();
    let r = HostGraph::build(f.pattern().clone())?.num_cells();
    let eps1 = opts.eps1.unwrap_or(opts.eps / (k as f64).powi(r as i32));
    let nsets = f.constraints(&host)?.num_scopes() as f64;
    let bad_threshold = opts.eps * nsets;
    let h = match build_constraint_hypergraph(f, host.clone())? {
        Built::Direct(t) => {
            let report = ContainerReport {
                n,
                eps: opts.eps,
                eps1,
                delta: 0.0,
                family_size: 1,
                dropped_improper: 0,
                leaves: 1,
                nodes: 0,
                max_entropy: t.entropy(),
                bad_threshold,
                bad_counts: vec![0],
                all_bad_below: true,
                edges_h: 0,
                edge_bounds_hold: true,
                sparsify: None,
                f3_checked: 0,
                f3_held: 0,
                threshold_held: true,
                coverage: None,
                entropy_bound_held: opts.ex.map(|ex| t.entropy() <= ex + opts.eps * binomial(n, 2) as f64 + 1e-9),
            };
            return Ok((vec![t], report));
        }
        Built::Hypergraph(h) => h,
    };
    let edges_h = h.num_edges();
    let edge_bounds_hold =
        nsets <= edges_h as f64 && edges_h as f64 <= (k as f64).powi(r as i32) * nsets;
    let (h2, sparsify) = if opts.sparsify {
        let (h2, s) = sparsify_and_linearize(&h, eps1, small, n, opts.p, opts.seed);
        (h2, Some(s))
    } else {
        (h.clone(), None)
    };
    let delta = opts.delta.unwrap_or(opts.eps * nsets / edges_h.max(1) as f64);
    let run = compute_containers(&h2, ContainerOptions { delta, transversal: opts.transversal, budget: opts.budget })?;
    let threshold_held = run
        .containers
        .iter()
        .all(|c| h2.num_edges() == 0 || (h2.induced_edges(c) as f64) < delta * h2.num_edges() as f64);
    let (mut f3_checked, mut f3_held) = (0, 0);
    if opts.sparsify {
        let hs = sparsify_sets(&h, eps1, small, n, opts.p, opts.seed);
        for c in &run.containers {
            if h.induced_edges(c) as f64 >= eps1 * edges_h as f64 {
                f3_checked += 1;
                if hs.induced_edges(c) as f64 >= eps1 / 2.0 * hs.num_edges() as f64 {
                    f3_held += 1;
                }
            }
        }
    }
    let (family, dropped) = templates_from_containers(&run.containers, host.clone(), k)?;
    let sys = f.constraints(&host)?;
    let bad_counts: Vec<u64> = family.iter().map(|t| sys.bad_pairs(t.palettes())).collect();
    let max_entropy = family.iter().map(|t| entropy_of(t.palettes(), k)).fold(f64::NEG_INFINITY, f64::max);
    let coverage = match opts.coverage {
        Some(mode) => Some(coverage(f, &host, &family, mode)?),
        None => None,
    };
    let report = ContainerReport {
        n,
        eps: opts.eps,
        eps1,
        delta,
        family_size: family.len(),
        dropped_improper: dropped,
        leaves: run.leaves,
        nodes: run.nodes,
        max_entropy,
        bad_threshold,
        all_bad_below: bad_counts.iter().all(|&b| (b as f64) < bad_threshold),
        bad_counts,
        edges_h,
        edge_bounds_hold,
        sparsify,
        f3_checked,
        f3_held,
        threshold_held,
        coverage,
        entropy_bound_held: opts.ex.map(|ex| max_entropy <= ex + opts.eps * binomial(n, 2) as f64 + 1e-9),
    };
    Ok((family, report))
}

/// The sparsified (not yet linear) hypergraph for the same seed.
fn sparsify_sets(h: &ConstraintHypergraph, eps1: f64, small: usize, n: usize, p: Option<f64>, seed: u64) -> ConstraintHypergraph {
    let p = p.unwrap_or_else(|| sparsification_probability(eps1, h.k, small, n));
    let p = if p.is_nan() { 1.0 } else { p.clamp(0.0, 1.0) };
    let mut r = rng::stream(seed, 0);
    h.with_edges(h.edges.iter().filter(|_| r.gen::<f64>() < p).cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::properties::lookup;

    fn rainbow() -> ForbiddenFamily {
        lookup("rainbow-k3").unwrap().forbidden_at(3).unwrap().unwrap()
    }

    fn hyper(f: &ForbiddenFamily, n: usize) -> ConstraintHypergraph {
        match build_constraint_hypergraph(f, Arc::new(HostGraph::complete(n))).unwrap() {
            Built::Hypergraph(h) => h,
            Built::Direct(_) => panic!("expected a hypergraph"),
        }
    }

    #[test]
    fn hypergraph_sizes() {
        let h = hyper(&rainbow(), 4);
        assert_eq!(h.num_vertices(), 18);
        assert_eq!(h.num_edges(), 24);
        assert!(h.is_linear());
        let mono = ForbiddenFamily::new(3, 2, vec![vec![1, 1, 1]]).unwrap();
        assert_eq!(hyper(&mono, 4).num_edges(), 4);
        assert_eq!(hyper(&mono, 3).num_edges(), 1);
    }

    #[test]
    fn single_cell_pattern_is_direct() {
        let f = ForbiddenFamily::new(2, 3, vec![vec![2]]).unwrap();
        let Built::Direct(t) = build_constraint_hypergraph(&f, Arc::new(HostGraph::complete(4))).unwrap() else {
            panic!()
        };
        assert!(t.palettes().iter().all(|&p| p == Palette::from_colours(&[1, 3])));
    }

    #[test]
    fn probability_matches_formula() {
        let p = sparsification_probability(0.5, 2, 3, 6);
        assert!((p - 0.5 / 192.0).abs() < 1e-15);
        assert!((p - 0.0026042).abs() < 1e-6);
    }

    #[test]
    fn sparsify_is_deterministic_and_linear() {
        let f = ForbiddenFamily::new(3, 2, vec![vec![1, 1, 1], vec![2, 2, 2], vec![1, 2, 2]]).unwrap();
        let h = hyper(&f, 7);
        assert!(!h.is_linear());
        let (a, sa) = sparsify_and_linearize(&h, 0.5, 3, 7, Some(0.6), 11);
        let (b, _) = sparsify_and_linearize(&h, 0.5, 3, 7, Some(0.6), 11);
        assert_eq!(a.edges, b.edges);
        assert!(a.is_linear());
        assert!(sa.edges_linear <= sa.edges_sparse);
        // formula exceeding one is clipped and keeps everything
        let (c, sc) = sparsify_and_linearize(&h, 0.5, 3, 7, Some(3.0), 1);
        assert!(sc.p_clipped && sc.edges_sparse == h.num_edges());
        assert!(c.is_linear());
    }

    #[test]
    fn container_examples() {
        let empty = ConstraintHypergraph { r: 3, k: 1, num_cells: 5, edges: vec![] };
        let opts = ContainerOptions { delta: 0.5, transversal: false, budget: None };
        let run = compute_containers(&empty, opts).unwrap();
        assert_eq!(run.containers, vec![Bits::full(5)]);

        let one = ConstraintHypergraph { r: 3, k: 1, num_cells: 5, edges: vec![vec![1, 2, 4]] };
        let mut run = compute_containers(&one, opts).unwrap().containers;
        run.sort();
        let mut expect: Vec<Bits> = [1, 2, 4]
            .iter()
            .map(|&v| {
                let mut b = Bits::full(5);
                b.clear(v);
                b
            })
            .collect();
        expect.sort();
        assert_eq!(run, expect);
    }

    /// Oracle: every independent set of a small hypergraph lies in a container.
    #[test]
    fn general_mode_covers_all_independent_sets() {
        let f = ForbiddenFamily::new(3, 2, vec![vec![1, 1, 1], vec![2, 2, 2]]).unwrap();
        let h = hyper(&f, 4); // 12 vertices
        for delta in [0.05, 0.3, 0.7] {
            let run = compute_containers(&h, ContainerOptions { delta, transversal: false, budget: None }).unwrap();
            for c in &run.containers {
                assert!((h.induced_edges(c) as f64) < delta * h.num_edges() as f64);
            }
            for mask in 0u32..1 << h.num_vertices() {
                let independent = h.edges.iter().all(|e| e.iter().any(|&v| mask >> v & 1 == 0));
                if !independent {
                    continue;
                }
                let mut b = Bits::new(h.num_vertices());
                (0..h.num_vertices() as u32).filter(|v| mask >> v & 1 == 1).for_each(|v| b.set(v));
                assert!(run.containers.iter().any(|c| b.is_subset(c)), "mask {mask:b} uncovered");
            }
        }
    }

    #[test]
    fn template_extraction() {
        let host = Arc::new(HostGraph::complete(3));
        let (t, d) = templates_from_containers(&[Bits::full(9)], host.clone(), 3).unwrap();
        assert_eq!(d, 0);
        assert!(t[0].palettes().iter().all(|&p| p == Palette::full(3)));
        let mut b = Bits::full(9);
        (0..3).for_each(|c| b.clear(3 + c));
        assert_eq!(templates_from_containers(&[b], host.clone(), 3).unwrap().1, 1);
        let colouring = [2u8, 1, 3];
        let mut b = Bits::new(9);
        for (cell, &c) in colouring.iter().enumerate() {
            b.set(vertex_of(cell, c, 3));
        }
        let (t, _) = templates_from_containers(&[b], host, 3).unwrap();
        assert!(t[0].is_zero_entropy());
        assert_eq!(t[0].to_colouring().unwrap().colours(), &colouring);
    }

    #[test]
    fn rainbow_pipeline_small() {
        let opts = PipelineOptions { sparsify: false, ..PipelineOptions::default() };
        let (family, report) = container_pipeline(&rainbow(), Arc::new(HostGraph::complete(4)), opts).unwrap();
        assert!(!family.is_empty());
        assert_eq!(report.coverage.unwrap().fraction(), 1.0);
        assert!(report.all_bad_below && report.threshold_held && report.edge_bounds_hold);
    }

    #[test]
    fn wilson_brackets_the_estimate() {
        let (lo, hi) = wilson_interval(90, 100);
        assert!(lo < 0.9 && 0.9 < hi && hi <= 1.0);
        assert!(wilson_interval(10, 10).1 > 1.0 - 1e-12);
    }
}
