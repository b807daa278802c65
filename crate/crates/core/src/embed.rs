//! Order-preserving embeddings of a small host `G_N` into a larger `G_n` of
//! the same family.
//!
//! Each family has its own substructure notion: vertex subsets of complete
//! graphs, consecutive segments of paths, subcubes of hypercubes, translated
//! axis-aligned blocks of grids, and per-part vertex subsets of multipartite
//! graphs. [`embeddings_by_search`] is an independent backtracking enumerator
//! over all order- and edge-preserving injections, which agrees with the
//! structured enumeration on complete, path and hypercube hosts.

use std::ops::ControlFlow;

use crate::combin::{combinations, for_each_combination};
use crate::error::{invalid, Result};
use crate::host::{HostGraph, HostKind};

/// An embedding as the image of each pattern vertex.
pub type Embedding = Vec<u32>;

fn hypercube_embeddings(small: usize, big: usize) -> Vec<Embedding> {
    let mut out = Vec::new();
    // coordinate i (1-based) of an n-cube lives at bit n - i
    for coords in combinations(big, small) {
        let free: Vec<usize> = (0..big).filter(|i| !coords.contains(i)).collect();
        for base in 0..(1usize << free.len()) {
            let mut offset = 0u32;
            for (j, &coord) in free.iter().enumerate() {
                if base & (1 << (free.len() - 1 - j)) != 0 {
                    offset |= 1 << (big - 1 - coord);
                }
            }
            let phi = (0..1u32 << small)
                .map(|x| {
                    let mut y = offset;
                    for (j, &coord) in coords.iter().enumerate() {
                        if x & (1 << (small - 1 - j)) != 0 {
                            y |= 1 << (big - 1 - coord);
                        }
                    }
                    y
                })
                .collect();
            out.push(phi);
        }
    }
    out
}

/// Structured enumeration of every embedding of `pattern` into `host`.
pub fn embeddings(pattern: &HostGraph, host: &HostGraph) -> Result<Vec<Embedding>> {
    use HostKind::*;
    Ok(match (pattern.kind(), host.kind()) {
        (Complete { n: small }, Complete { n: big }) => combinations(*big, *small)
            .into_iter()
            .map(|c| c.into_iter().map(|v| v as u32).collect())
            .collect(),
        (Path { n: small }, Path { n: big }) => {
            if small > big {
                Vec::new()
            } else {
                (0..=big - small)
                    .map(|s| (s as u32..(s + small) as u32).collect())
                    .collect()
            }
        }
        (HypercubeEdges { dim: small }, HypercubeEdges { dim: big })
        | (HypercubeVertices { dim: small }, HypercubeVertices { dim: big }) => {
            if small > big {
                Vec::new()
            } else {
                hypercube_embeddings(*small, *big)
            }
        }
        (Grid { rows: r0, cols: c0 }, Grid { rows: r1, cols: c1 }) => {
            let mut out = Vec::new();
            if r0 <= r1 && c0 <= c1 {
                for dr in 0..=r1 - r0 {
                    for dc in 0..=c1 - c0 {
                        out.push(
                            (0..r0 * c0)
                                .map(|v| (((v / c0) + dr) * c1 + (v % c0) + dc) as u32)
                                .collect(),
                        );
                    }
                }
            }
            out
        }
        (Multipartite { parts: q0, size: s0 }, Multipartite { parts: q1, size: s1 }) => {
            if q0 != q1 {
                return invalid("multipartite embeddings need equal part counts");
            }
            let choices = combinations(*s1, *s0);
            let mut out = Vec::new();
            let mut pick = vec![0usize; *q0];
            if choices.is_empty() {
                return Ok(out);
            }
            loop {
                let mut phi = Vec::with_capacity(q0 * s0);
                for (p, &c) in pick.iter().enumerate() {
                    phi.extend(choices[c].iter().map(|&v| (p * s1 + v) as u32));
                }
                out.push(phi);
                let mut i = *q0;
                loop {
                    if i == 0 {
                        return Ok(out);
                    }
                    i -= 1;
                    pick[i] += 1;
                    if pick[i] < choices.len() {
                        break;
                    }
                    pick[i] = 0;
                }
            }
        }
        (a, b) => return invalid(format!("cannot embed {a} into {b}: host kinds differ")),
    })
}

/// Every order-preserving, edge-preserving injection, found by backtracking.
pub fn embeddings_by_search(pattern: &HostGraph, host: &HostGraph) -> Vec<Embedding> {
    let m = pattern.num_vertices();
    let n = host.num_vertices();
    let mut back: Vec<Vec<u32>> = vec![Vec::new(); m];
    for &[a, b] in pattern.edges() {
        back[b as usize].push(a);
    }
    let mut out = Vec::new();
    let mut phi: Vec<u32> = Vec::with_capacity(m);
    fn rec(
        v: usize,
        m: usize,
        n: usize,
        back: &[Vec<u32>],
        host: &HostGraph,
        phi: &mut Vec<u32>,
        out: &mut Vec<Embedding>,
    ) {
        if v == m {
            out.push(phi.clone());
            return;
        }
        let lo = phi.last().map_or(0, |&x| x as usize + 1);
        // leave room for the remaining pattern vertices
        let hi = n - (m - v - 1);
        for img in lo..hi {
            if back[v].iter().all(|&u| host.has_edge(phi[u as usize], img as u32)) {
                phi.push(img as u32);
                rec(v + 1, m, n, back, host, phi, out);
                phi.pop();
            }
        }
    }
    if m <= n {
        rec(0, m, n, &back, host, &mut phi, &mut out);
    }
    out
}

/// Host cell indices hit by the pattern's cells under `phi`, in pattern cell order.
pub fn image_cells(pattern: &HostGraph, host: &HostGraph, phi: &[u32]) -> Result<Vec<u32>> {
    pattern
        .cells()
        .iter()
        .map(|cell| {
            let mut img: Vec<u32> = cell.iter().map(|&v| phi[v as usize]).collect();
            img.sort_unstable();
            host.cell_index(&img)
                .map(|i| i as u32)
                .ok_or_else(|| crate::Error::InvalidArgument(format!("{img:?} is not a cell of the host")))
        })
        .collect()
}

/// Visits the `N`-subsets of `0..n` as complete-graph embeddings without
/// materialising the whole list.
pub fn for_each_complete_embedding<F>(small: usize, big: usize, f: F) -> ControlFlow<()>
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    for_each_combination(big, small, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::host::binomial;

    fn host(kind: HostKind) -> HostGraph {
        HostGraph::build(kind).unwrap()
    }

    #[test]
    fn closed_form_counts() {
        let q2 = host(HostKind::HypercubeEdges { dim: 2 });
        let q4 = host(HostKind::HypercubeEdges { dim: 4 });
        assert_eq!(embeddings(&q2, &q4).unwrap().len(), 24);
        let k3 = HostGraph::complete(3);
        let k5 = HostGraph::complete(5);
        assert_eq!(embeddings(&k3, &k5).unwrap().len(), 10);
        let p3 = host(HostKind::Path { n: 3 });
        let p6 = host(HostKind::Path { n: 6 });
        assert_eq!(embeddings(&p3, &p6).unwrap().len(), 4);
    }

    #[test]
    fn structured_matches_backtracking() {
        let cases = [
            (HostKind::Complete { n: 3 }, HostKind::Complete { n: 6 }),
            (HostKind::Path { n: 3 }, HostKind::Path { n: 7 }),
            (HostKind::HypercubeEdges { dim: 2 }, HostKind::HypercubeEdges { dim: 4 }),
            (HostKind::HypercubeEdges { dim: 3 }, HostKind::HypercubeEdges { dim: 4 }),
            (HostKind::HypercubeVertices { dim: 1 }, HostKind::HypercubeVertices { dim: 3 }),
        ];
        for (a, b) in cases {
            let (pa, hb) = (host(a.clone()), host(b.clone()));
            let mut s = embeddings(&pa, &hb).unwrap();
            let mut t = embeddings_by_search(&pa, &hb);
            s.sort();
            t.sort();
            assert_eq!(s, t, "{a} into {b}");
        }
    }

    #[test]
    fn hypercube_count_formula() {
        for big in 2..=6 {
            for small in 1..=big {
                let a = host(HostKind::HypercubeVertices { dim: small });
                let b = host(HostKind::HypercubeVertices { dim: big });
                let expect = binomial(big, small) << (big - small);
                assert_eq!(embeddings(&a, &b).unwrap().len() as u128, expect);
            }
        }
    }

    #[test]
    fn grid_and_multipartite() {
        let g0 = host(HostKind::Grid { rows: 2, cols: 2 });
        let g1 = host(HostKind::Grid { rows: 3, cols: 4 });
        let e = embeddings(&g0, &g1).unwrap();
        assert_eq!(e.len(), 2 * 3);
        for phi in &e {
            assert!(image_cells(&g0, &g1, phi).is_ok());
        }
        let m0 = host(HostKind::Multipartite { parts: 2, size: 1 });
        let m1 = host(HostKind::Multipartite { parts: 2, size: 3 });
        assert_eq!(embeddings(&m0, &m1).unwrap().len(), 9);
        let m2 = host(HostKind::Multipartite { parts: 3, size: 3 });
        assert!(embeddings(&m0, &m2).is_err());
        assert!(embeddings(&g0, &m1).is_err());
    }

    #[test]
    fn subcube_map_sends_coordinates_in_order() {
        // Q_1 into Q_3 along coordinate 2 with base 000: 000 -> 010
        let a = host(HostKind::HypercubeVertices { dim: 1 });
        let b = host(HostKind::HypercubeVertices { dim: 3 });
        let e = embeddings(&a, &b).unwrap();
        assert!(e.contains(&vec![0b000, 0b010]));
        assert!(e.iter().all(|phi| phi[0] < phi[1]));
    }
}
