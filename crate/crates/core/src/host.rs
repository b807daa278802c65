//! Host graphs: the ordered structures whose edges (or vertices) get coloured.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Which host and at what size. Vertex orders: complete and path hosts use
/// `0..n`; hypercubes order vertices by binary value with coordinate 1 as the
/// most significant bit; grids are row-major; multipartite hosts list part 0
/// first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HostKind {
    Complete { n: usize },
    HypercubeEdges { dim: usize },
    HypercubeVertices { dim: usize },
    Grid { rows: usize, cols: usize },
    Multipartite { parts: usize, size: usize },
    Path { n: usize },
}

impl fmt::Display for HostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HostKind::Complete { n } => write!(f, "K_{n}"),
            HostKind::HypercubeEdges { dim } => write!(f, "Q_{dim}(edges)"),
            HostKind::HypercubeVertices { dim } => write!(f, "Q_{dim}(vertices)"),
            HostKind::Grid { rows, cols } => write!(f, "Grid({rows}x{cols})"),
            HostKind::Multipartite { parts, size } => write!(f, "K_{parts}({size})"),
            HostKind::Path { n } => write!(f, "P_{n}"),
        }
    }
}

/// A host sequence family; `at(n)` picks the member of order `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum HostFamily {
    Complete,
    HypercubeEdges,
    HypercubeVertices,
    /// `Grid(a, b)`: the `n`-th member is `P_{an} x P_{bn}`.
    Grid { a: usize, b: usize },
    Multipartite { parts: usize },
    Path,
}

impl HostFamily {
    pub fn at(self, n: usize) -> HostKind {
        match self {
            HostFamily::Complete => HostKind::Complete { n },
            HostFamily::HypercubeEdges => HostKind::HypercubeEdges { dim: n },
            HostFamily::HypercubeVertices => HostKind::HypercubeVertices { dim: n },
            HostFamily::Grid { a, b } => HostKind::Grid { rows: a * n, cols: b * n },
            HostFamily::Multipartite { parts } => HostKind::Multipartite { parts, size: n },
            HostFamily::Path => HostKind::Path { n },
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "complete" | "kn" => Ok(HostFamily::Complete),
            "hypercube" | "hypercube-edges" => Ok(HostFamily::HypercubeEdges),
            "hypercube-vertices" => Ok(HostFamily::HypercubeVertices),
            "grid" => Ok(HostFamily::Grid { a: 1, b: 1 }),
            "path" => Ok(HostFamily::Path),
            other => {
                if let Some(q) = other.strip_prefix("multipartite-") {
                    let parts = q
                        .parse()
                        .map_err(|_| Error::UnknownId(other.to_string()))?;
                    return Ok(HostFamily::Multipartite { parts });
                }
                Err(Error::UnknownId(other.to_string()))
            }
        }
    }
}

/// An ordered host. `edges` is the graph structure used for embeddings;
/// `cells` are the coloured objects: the edges for graph hosts and the
/// singleton vertices for vertex hosts.
#[derive(Clone, Debug)]
pub struct HostGraph {
    kind: HostKind,
    num_vertices: usize,
    edges: Vec<[u32; 2]>,
    cells: Vec<Vec<u32>>,
    cell_index: HashMap<Vec<u32>, usize>,
}

impl PartialEq for HostGraph {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}
impl Eq for HostGraph {}

/// Index of pair `i < j` in the lexicographic edge order of `K_n`.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

pub fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

impl HostGraph {
    pub fn build(kind: HostKind) -> Result<Self> {
        let (num_vertices, mut edges): (usize, Vec<[u32; 2]>) = match kind {
            HostKind::Complete { n } => {
                if n == 0 {
                    return invalid("complete host needs n >= 1");
                }
                let mut e = Vec::with_capacity(n * n.saturating_sub(1) / 2);
                for i in 0..n {
                    for j in i + 1..n {
                        e.push([i as u32, j as u32]);
                    }
                }
                (n, e)
            }
            HostKind::HypercubeEdges { dim } | HostKind::HypercubeVertices { dim } => {
                if dim > 20 {
                    return invalid("hypercube dimension above 20");
                }
                let v = 1usize << dim;
                let mut e = Vec::with_capacity(dim * v / 2);
                for x in 0..v {
                    for b in 0..dim {
                        if x & (1 << b) == 0 {
                            e.push([x as u32, (x | (1 << b)) as u32]);
                        }
                    }
                }
                (v, e)
            }
            HostKind::Grid { rows, cols } => {
                if rows == 0 || cols == 0 {
                    return invalid("grid needs positive dimensions");
                }
                let mut e = Vec::new();
                for r in 0..rows {
                    for c in 0..cols {
                        let v = (r * cols + c) as u32;
                        if c + 1 < cols {
                            e.push([v, v + 1]);
                        }
                        if r + 1 < rows {
                            e.push([v, v + cols as u32]);
                        }
                    }
                }
                (rows * cols, e)
            }
            HostKind::Multipartite { parts, size } => {
                if parts == 0 || size == 0 {
                    return invalid("multipartite host needs positive parts and size");
                }
                let v = parts * size;
                let mut e = Vec::new();
                for i in 0..v {
                    for j in i + 1..v {
                        if i / size != j / size {
                            e.push([i as u32, j as u32]);
                        }
                    }
                }
                (v, e)
            }
            HostKind::Path { n } => {
                if n == 0 {
                    return invalid("path host needs n >= 1");
                }
                let e = (0..n.saturating_sub(1))
                    .map(|i| [i as u32, i as u32 + 1])
                    .collect();
                (n, e)
            }
        };
        edges.sort_unstable();
        let cells: Vec<Vec<u32>> = match kind {
            HostKind::HypercubeVertices { .. } => (0..num_vertices as u32).map(|v| vec![v]).collect(),
            _ => edges.iter().map(|e| e.to_vec()).collect(),
        };
        let cell_index = cells.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Ok(HostGraph { kind, num_vertices, edges, cells, cell_index })
    }

    pub fn complete(n: usize) -> Self {
        Self::build(HostKind::Complete { n }).expect("n >= 1")
    }

    pub fn kind(&self) -> &HostKind {
        &self.kind
    }

    /// 1 for vertex hosts, 2 for graph hosts.
    pub fn uniformity(&self) -> usize {
        match self.kind {
            HostKind::HypercubeVertices { .. } => 1,
            _ => 2,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[[u32; 2]] {
        &self.edges
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Vec<u32>] {
        &self.cells
    }

    pub fn cell_index(&self, cell: &[u32]) -> Option<usize> {
        self.cell_index.get(cell).copied()
    }

    /// Order of a complete host, if this is one.
    pub fn complete_order(&self) -> Option<usize> {
        match self.kind {
            HostKind::Complete { n } => Some(n),
            _ => None,
        }
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.edges.binary_search(&[a, b]).is_ok()
    }

    /// Adjacency lists, sorted.
    pub fn neighbours(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.num_vertices];
        for &[a, b] in &self.edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        adj
    }

    pub fn record(&self) -> HostRecord {
        HostRecord {
            host: self.kind.clone(),
            uniformity: self.uniformity(),
            vertices: self.num_vertices,
            edges: self.edges.clone(),
        }
    }

    pub fn from_record(rec: &HostRecord) -> Result<Self> {
        let h = Self::build(rec.host.clone())?;
        if h.edges != rec.edges || h.num_vertices != rec.vertices {
            return invalid(format!("edge list does not match host kind {}", rec.host));
        }
        Ok(h)
    }
}

/// JSON form of a host: kind tag plus the explicit edge list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HostRecord {
    pub host: HostKind,
    pub uniformity: usize,
    pub vertices: usize,
    pub edges: Vec<[u32; 2]>,
}
