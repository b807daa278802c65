//! Random decorated graphs from a graphon, homomorphism densities and
//! neighbourhood counts.

use rand::Rng as _;
use serde::Serialize;

use super::{cut_distance, delta_cut_upper, h_k, Metric, StepGraphon};
use crate::error::{invalid, Error, Result};
use crate::host::binomial;
use crate::par;
use crate::rng;
use crate::template::{Colour, Colouring};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    /// The probability-vector decorated graph `H(n, W)`.
    H,
    /// `H(n, W)` plus one colour drawn per pair: `G(n, W)`.
    G,
}

/// Probability vectors on the pairs of `K_n`, in lexicographic pair order.
#[derive(Clone, Debug, Serialize)]
pub struct DecoratedGraph {
    pub n: usize,
    pub k: u8,
    pub pairs: Vec<Vec<f64>>,
}

impl DecoratedGraph {
    /// `sum_{i<j} h_k(H_ij)`.
    pub fn entropy(&self) -> f64 {
        self.pairs.iter().map(|p| h_k(p, self.k)).sum()
    }
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub n: usize,
    pub mode: SampleMode,
    /// The uniform points `X_1..X_n`.
    pub points: Vec<f64>,
    pub parts: Vec<usize>,
    pub decorated: DecoratedGraph,
    pub colouring: Option<Colouring>,
}

/// Draws `H(n, W)` (and `G(n, W)` in `G` mode). Points come from stream 0
/// of `seed` and colours from stream 1.
pub fn sample(w: &StepGraphon, n: usize, mode: SampleMode, seed: u64) -> Result<Sample> {
    if n == 0 {
        return invalid("sample needs n >= 1");
    }
    let mut xs = rng::stream(seed, 0);
    let points: Vec<f64> = (0..n).map(|_| xs.gen::<f64>()).collect();
    let parts: Vec<usize> = points.iter().map(|&x| w.part_of(x)).collect();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push(w.cell(parts[i], parts[j]).to_vec());
        }
    }
    let colouring = match mode {
        SampleMode::H => None,
        SampleMode::G => {
            let mut cs = rng::stream(seed, 1);
            let colours: Vec<Colour> = pairs
                .iter()
                .map(|p| {
                    let u: f64 = cs.gen();
                    let mut acc = 0.0;
                    for (c, &q) in p.iter().enumerate() {
                        acc += q;
                        if u < acc {
                            return c as Colour + 1;
                        }
                    }
                    // rounding left a sliver above the last positive entry
                    p.iter().rposition(|&q| q > 0.0).unwrap_or(0) as Colour + 1
                })
                .collect();
            Some(Colouring::on_complete(n, w.k(), colours)?)
        }
    };
    Ok(Sample { n, mode, points, parts, decorated: DecoratedGraph { n, k: w.k(), pairs }, colouring })
}

/// Entropy of `G(n, W)` given the sampled points: `sum_{i<j} h_k(W(X_i, X_j))`.
pub fn conditional_entropy_sample(w: &StepGraphon, n: usize, seed: u64) -> Result<f64> {
    Ok(sample(w, n, SampleMode::H, seed)?.decorated.entropy())
}

/// `t(F, W)` for a graph on `vertices` vertices whose edges carry weight
/// vectors over the colours. Exact: sums over assignments of vertices to
/// parts.
pub fn hom_density(vertices: usize, edges: &[(usize, usize, Vec<f64>)], w: &StepGraphon) -> Result<f64> {
    let k = w.k() as usize;
    if edges.iter().any(|(a, b, l)| *a >= vertices || *b >= vertices || a == b || l.len() != k) {
        return invalid("edges must join distinct vertices and carry k weights");
    }
    let m = w.parts();
    let total = (m as u128).checked_pow(vertices as u32).filter(|&t| t <= 1 << 26);
    let Some(total) = total else {
        return invalid("too many part assignments");
    };
    let vals = par::map_indices(total as usize, |mut code| {
        let mut assign = vec![0; vertices];
        for a in assign.iter_mut() {
            *a = code % m;
            code /= m;
        }
        let mut prod: f64 = assign.iter().map(|&a| w.weights()[a]).product();
        for (a, b, label) in edges {
            let cell = w.cell(assign[*a], assign[*b]);
            prod *= label.iter().zip(cell).map(|(x, y)| x * y).sum::<f64>();
            if prod == 0.0 {
                break;
            }
        }
        prod
    });
    Ok(vals.into_iter().sum())
}

/// `K_n` labelled by the indicator vectors of a colouring, the graph whose
/// density is `P(G(n, W) = c)`.
pub fn indicator_edges(c: &Colouring) -> Vec<(usize, usize, Vec<f64>)> {
    let n = c.order();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut v = vec![0.0; c.k() as usize];
            v[c.pair(i, j) as usize - 1] = 1.0;
            out.push((i, j, v));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborhoodMetric {
    Dk,
    /// Uses the permutation upper bound, so the count is a lower bound.
    DeltaK,
}

#[derive(Clone, Debug, Serialize)]
pub struct NeighborhoodCount {
    pub count: u128,
    pub total: u128,
    pub lower_bound_only: bool,
    /// Grid used for the rearrangement search (`DeltaK` only).
    pub grid: Option<usize>,
}

/// Labelled colourings `G` of `K_n` with distance from `W_G` to `W` at most
/// `delta`.
pub fn neighborhood_count(
    w: &StepGraphon,
    delta: f64,
    n: usize,
    metric: NeighborhoodMetric,
    budget: Option<u64>,
) -> Result<NeighborhoodCount> {
    let k = w.k();
    let cells = binomial(n, 2) as u32;
    let total = (k as u128).checked_pow(cells).unwrap_or(u128::MAX);
    let limit = budget.unwrap_or(1 << 22) as u128;
    if total > limit {
        return Err(Error::ResourceLimit { explored: 0, partial: 0 });
    }
    let grid = match metric {
        NeighborhoodMetric::Dk => None,
        NeighborhoodMetric::DeltaK => Some(
            (1..=8 / n.max(1))
                .map(|r| r * n)
                .find(|&m| {
                    w.boundaries().iter().all(|&b| ((b * m as f64) - (b * m as f64).round()).abs() < 1e-9)
                })
                .unwrap_or(n),
        ),
    };
    let hits = par::map_indices(total as usize, |mut code| -> Result<bool> {
        let mut colours = Vec::with_capacity(cells as usize);
        for _ in 0..cells {
            colours.push((code % k as usize) as Colour + 1);
            code /= k as usize;
        }
        let wg = StepGraphon::from_colouring(&Colouring::on_complete(n, k, colours)?)?;
        let d = match grid {
            None => cut_distance(&wg, w, Metric::Dk)?.value,
            Some(m) => delta_cut_upper(&wg, w, m)?.value,
        };
        Ok(d <= delta + 1e-12)
    });
    let mut count = 0;
    for h in hits {
        count += h? as u128;
    }
    Ok(NeighborhoodCount { count, total, lower_bound_only: metric == NeighborhoodMetric::DeltaK, grid })
}
