//! Host-graph sequences: overlap statistics of embeddings, goodness
//! diagnostics and extremal entropy on hosts other than `K_n`.

use std::sync::Arc;

use serde::Serialize;

use crate::embed::{embeddings, Embedding};
use crate::error::{invalid, Error, Result};
use crate::extremal::{extremal_on_host, ExtremalResult, Optimality, SearchOptions};
use crate::host::{HostFamily, HostGraph, HostKind};
use crate::par;
use crate::properties::{Property, PropertyKind};
use crate::template::{entropy_of, Palette, Template};

pub fn build_host(kind: HostKind) -> Result<HostGraph> {
    HostGraph::build(kind)
}

/// Embedding counts and pair-overlap statistics of `G_N` inside `G_n`.
///
/// `I` and `J` count unordered pairs of embeddings, each pair once and each
/// embedding paired with itself once, that share at least two edges
/// (respectively vertices). Equivalently, half the number of ordered pairs
/// including the diagonal.
#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingStats {
    pub small: HostKind,
    pub big: HostKind,
    pub count: u128,
    pub ordered_edge_overlaps: u128,
    pub ordered_vertex_overlaps: u128,
    pub overlap_i: f64,
    pub overlap_j: f64,
    /// `e(G_n) I / count^2`.
    pub edge_ratio: f64,
    /// `v(G_n) J / count^2`.
    pub vertex_ratio: f64,
}

fn edge_images(pattern: &HostGraph, host: &HostGraph, phi: &Embedding) -> Vec<u32> {
    let mut out: Vec<u32> = pattern
        .edges()
        .iter()
        .map(|&[a, b]| {
            let (x, y) = (phi[a as usize], phi[b as usize]);
            host.edges().binary_search(&[x.min(y), x.max(y)]).expect("embedding keeps edges") as u32
        })
        .collect();
    out.sort_unstable();
    out
}

/// Ordered pairs `(phi, psi)` whose item sets share at least two items.
fn ordered_overlaps(sets: &[Vec<u32>], universe: usize) -> u128 {
    let mut holders: Vec<Vec<u32>> = vec![Vec::new(); universe];
    for (i, s) in sets.iter().enumerate() {
        for &x in s {
            holders[x as usize].push(i as u32);
        }
    }
    let chunk = 256;
    let chunks = sets.len().div_ceil(chunk);
    par::sum_indices(chunks, |c| {
        let mut hits = vec![0u16; sets.len()];
        let mut touched = Vec::new();
        let mut total = 0u128;
        for i in c * chunk..((c + 1) * chunk).min(sets.len()) {
            for &x in &sets[i] {
                for &j in &holders[x as usize] {
                    if hits[j as usize] == 0 {
                        touched.push(j);
                    }
                    hits[j as usize] += 1;
                }
            }
            for &j in &touched {
                if hits[j as usize] >= 2 {
                    total += 1;
                }
                hits[j as usize] = 0;
            }
            touched.clear();
        }
        total
    })
}

pub fn overlap_statistics(family: HostFamily, small: usize, big: usize) -> Result<EmbeddingStats> {
    let pattern = HostGraph::build(family.at(small))?;
    let host = HostGraph::build(family.at(big))?;
    embedding_stats(&pattern, &host)
}

pub fn embedding_stats(pattern: &HostGraph, host: &HostGraph) -> Result<EmbeddingStats> {
    let embs = embeddings(pattern, host)?;
    let count = embs.len() as u128;
    let edge_sets: Vec<Vec<u32>> = embs.iter().map(|phi| edge_images(pattern, host, phi)).collect();
    let vertex_sets: Vec<Vec<u32>> = embs
        .iter()
        .map(|phi| {
            let mut v = phi.clone();
            v.sort_unstable();
            v
        })
        .collect();
    let oi = ordered_overlaps(&edge_sets, host.num_edges());
    let oj = ordered_overlaps(&vertex_sets, host.num_vertices());
    let (i, j) = (oi as f64 / 2.0, oj as f64 / 2.0);
    let sq = (count as f64).powi(2);
    Ok(EmbeddingStats {
        small: pattern.kind().clone(),
        big: host.kind().clone(),
        count,
        ordered_edge_overlaps: oi,
        ordered_vertex_overlaps: oj,
        overlap_i: i,
        overlap_j: j,
        edge_ratio: if count == 0 { f64::NAN } else { host.num_edges() as f64 * i / sq },
        vertex_ratio: if count == 0 { f64::NAN } else { host.num_vertices() as f64 * j / sq },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GoodnessTable {
    pub family: HostFamily,
    pub small: usize,
    pub rows: Vec<EmbeddingStats>,
    pub edge_ratio_strictly_decreasing: bool,
    pub vertex_ratio_strictly_decreasing: bool,
    pub min_edge_ratio: f64,
}

/// Ratios over a range of host orders. Reports data; asserts nothing.
pub fn goodness_diagnostic(family: HostFamily, small: usize, ns: impl IntoIterator<Item = usize>) -> Result<GoodnessTable> {
    let rows = ns
        .into_iter()
        .map(|n| overlap_statistics(family, small, n))
        .collect::<Result<Vec<_>>>()?;
    let dec = |f: fn(&EmbeddingStats) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    Ok(GoodnessTable {
        family,
        small,
        edge_ratio_strictly_decreasing: dec(|r| r.edge_ratio),
        vertex_ratio_strictly_decreasing: dec(|r| r.vertex_ratio),
        min_edge_ratio: rows.iter().map(|r| r.edge_ratio).fold(f64::INFINITY, f64::min),
        rows,
    })
}

/// `ex(G_n, P)`. Path hosts with a two-edge pattern use the exact dynamic
/// program; everything else goes through branch-and-bound.
pub fn extremal_entropy_host(p: &Property, host: Arc<HostGraph>, opts: SearchOptions) -> Result<ExtremalResult> {
    if let (HostKind::Path { .. }, PropertyKind::Forb(f)) = (host.kind(), p.kind()) {
        if *f.pattern() == (HostKind::Path { n: 3 }) {
            return path_extremal(p, host);
        }
    }
    extremal_on_host(p, host, opts)
}

/// Exact DP over consecutive edges of a path host. The state is the palette
/// of the previous edge; a transition is allowed when no forbidden pair fits
/// inside the two palettes.
pub fn path_extremal(p: &Property, host: Arc<HostGraph>) -> Result<ExtremalResult> {
    let PropertyKind::Forb(f) = p.kind() else {
        return invalid("path DP needs a forbidden family");
    };
    if *f.pattern() != (HostKind::Path { n: 3 }) || !matches!(host.kind(), HostKind::Path { .. }) {
        return invalid("path DP needs a P_3 pattern on a path host");
    }
    let k = p.k();
    let m = host.num_cells();
    let opts = Palette::full(k).nonempty_subsets();
    let clash = |a: Palette, b: Palette| f.members().iter().any(|mm| a.contains(mm[0]) && b.contains(mm[1]));
    if m == 0 {
        let witness = Template::new(host, k, Vec::new())?;
        return Ok(ExtremalResult { value: 0.0, witness, realisations: 1, nodes: 0, optimality: Optimality::Proved });
    }
    // best[i][o]: best product of cells 0..=i with cell i using option o
    let mut best: Vec<Vec<u128>> = vec![opts.iter().map(|q| q.len() as u128).collect()];
    let mut from: Vec<Vec<usize>> = vec![vec![usize::MAX; opts.len()]];
    let mut nodes = opts.len() as u64;
    for i in 1..m {
        let mut row = vec![0u128; opts.len()];
        let mut back = vec![usize::MAX; opts.len()];
        for (o, &q) in opts.iter().enumerate() {
            for (prev, &r) in opts.iter().enumerate() {
                nodes += 1;
                let v = best[i - 1][prev];
                if v == 0 || clash(r, q) {
                    continue;
                }
                let cand = v * q.len() as u128;
                if cand > row[o] {
                    row[o] = cand;
                    back[o] = prev;
                }
            }
        }
        best.push(row);
        from.push(back);
    }
    let (mut o, &top) = best[m - 1]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("options exist");
    if top == 0 {
        return Err(Error::Infeasible("no template on the path avoids the family".into()));
    }
    let mut pals = vec![Palette::EMPTY; m];
    for i in (0..m).rev() {
        pals[i] = opts[o];
        o = from[i][o];
    }
    let witness = Template::new(host, k, pals)?;
    Ok(ExtremalResult {
        value: entropy_of(witness.palettes(), k),
        witness,
        realisations: top,
        nodes,
        optimality: Optimality::Proved,
    })
}

/// `phi_{B,v}`: the subcube of `Q_n` with free coordinates `coords`
/// (1-based, increasing) and the remaining coordinates fixed to `base`,
/// listed in `Q_N` vertex order. `base` holds one bit per fixed coordinate,
/// most significant first.
pub fn subcube_map(n: usize, coords: &[usize], base: u32) -> Result<Vec<u32>> {
    if coords.windows(2).any(|w| w[0] >= w[1]) || coords.iter().any(|&c| c == 0 || c > n) {
        return invalid("subcube coordinates must be increasing within 1..=n");
    }
    let small = coords.len();
    let fixed: Vec<usize> = (1..=n).filter(|c| !coords.contains(c)).collect();
    if fixed.len() < 32 && base >> fixed.len() != 0 {
        return invalid("base has bits beyond the fixed coordinates");
    }
    let bit = |coord: usize| 1u32 << (n - coord);
    let mut offset = 0;
    for (j, &c) in fixed.iter().enumerate() {
        if base >> (fixed.len() - 1 - j) & 1 == 1 {
            offset |= bit(c);
        }
    }
    Ok((0..1u32 << small)
        .map(|x| {
            coords
                .iter()
                .enumerate()
                .filter(|&(j, _)| x >> (small - 1 - j) & 1 == 1)
                .fold(offset, |y, (_, &c)| y | bit(c))
        })
        .collect())
}

/// Restriction of a vertex template on `Q_n` to the subcube `Q_n[(B, v)]`.
pub fn restrict_to_subcube(t: &Template, coords: &[usize], base: u32) -> Result<Template> {
    let HostKind::HypercubeVertices { dim } = *t.host().kind() else {
        return invalid("subcube restriction needs a vertex hypercube template");
    };
    let phi = subcube_map(dim, coords, base)?;
    let host = Arc::new(HostGraph::build(HostKind::HypercubeVertices { dim: coords.len() })?);
    Template::new(host, t.k(), phi.iter().map(|&v| t.palette(v as usize)).collect())
}

/// Vertex template of `Q_n` forcing colour 1 on every layer whose weight is
/// divisible by 3 and allowing `{1, 2}` elsewhere.
pub fn every_third_layer_template(n: usize) -> Result<Template> {
    let host = Arc::new(HostGraph::build(HostKind::HypercubeVertices { dim: n })?);
    let pals = (0..1u32 << n)
        .map(|x| {
            if x.count_ones() % 3 == 0 {
                Palette::singleton(1)
            } else {
                Palette::from_colours(&[1, 2])
            }
        })
        .collect();
    Template::new(host, 2, pals)
}
