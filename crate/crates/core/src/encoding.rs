//! Digraphs, oriented graphs, tournaments and multigraphs as colourings of
//! `K_n`.
//!
//! For a pair `i < j` the arc encoding is: 1 no arc, 2 the arc `i -> j`,
//! 3 the arc `j -> i`, 4 both arcs. All three arc kinds use `k = 4` so that
//! oriented graphs (colours 1..=3) and tournaments (colours 2..=3) sit inside
//! the digraph encoding. A multigraph of maximum weight `d` uses `k = d + 1`
//! with colour `w + 1` for weight `w`.

use std::collections::BTreeSet;

use crate::error::{invalid, Error, Result};
use crate::host::pair_index;
use crate::template::{Colour, Colouring};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncodingKind {
    Digraph,
    OrGraph,
    Tournament,
    Multigraph { max_weight: u8 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EncodedObject {
    /// Arcs `(from, to)` on vertices `0..n`.
    Digraph { n: usize, arcs: BTreeSet<(usize, usize)> },
    OrGraph { n: usize, arcs: BTreeSet<(usize, usize)> },
    Tournament { n: usize, arcs: BTreeSet<(usize, usize)> },
    /// Edge weights in lexicographic pair order.
    Multigraph { n: usize, max_weight: u8, weights: Vec<u8> },
}

impl EncodingKind {
    pub fn colours(self) -> u8 {
        match self {
            EncodingKind::Multigraph { max_weight } => max_weight + 1,
            _ => 4,
        }
    }

    fn allowed(self, c: Colour) -> bool {
        match self {
            EncodingKind::Digraph => (1..=4).contains(&c),
            EncodingKind::OrGraph => (1..=3).contains(&c),
            EncodingKind::Tournament => c == 2 || c == 3,
            EncodingKind::Multigraph { max_weight } => c >= 1 && c <= max_weight + 1,
        }
    }
}

impl EncodedObject {
    pub fn kind(&self) -> EncodingKind {
        match self {
            EncodedObject::Digraph { .. } => EncodingKind::Digraph,
            EncodedObject::OrGraph { .. } => EncodingKind::OrGraph,
            EncodedObject::Tournament { .. } => EncodingKind::Tournament,
            EncodedObject::Multigraph { max_weight, .. } => EncodingKind::Multigraph { max_weight: *max_weight },
        }
    }
}

fn arc_colours(n: usize, arcs: &BTreeSet<(usize, usize)>) -> Result<Vec<Colour>> {
    let mut colours = vec![1 as Colour; n * n.saturating_sub(1) / 2];
    for &(a, b) in arcs {
        if a == b || a >= n || b >= n {
            return invalid(format!("arc ({a}, {b}) is not between distinct vertices of 0..{n}"));
        }
        let (i, j) = (a.min(b), a.max(b));
        let bit = if a < b { 1 } else { 2 };
        let e = pair_index(n, i, j);
        colours[e] = (((colours[e] - 1) | bit) + 1) as Colour;
    }
    Ok(colours)
}

pub fn encode(obj: &EncodedObject) -> Result<Colouring> {
    let kind = obj.kind();
    let (n, colours) = match obj {
        EncodedObject::Digraph { n, arcs }
        | EncodedObject::OrGraph { n, arcs }
        | EncodedObject::Tournament { n, arcs } => (*n, arc_colours(*n, arcs)?),
        EncodedObject::Multigraph { n, max_weight, weights } => {
            if weights.len() != n * n.saturating_sub(1) / 2 {
                return invalid("one weight per pair is required");
            }
            if let Some(w) = weights.iter().find(|&&w| w > *max_weight) {
                return invalid(format!("weight {w} above the declared maximum {max_weight}"));
            }
            (*n, weights.iter().map(|&w| w + 1).collect())
        }
    };
    if let Some(&c) = colours.iter().find(|&&c| !kind.allowed(c)) {
        return invalid(format!("object does not fit its kind {kind:?} (pair colour {c})"));
    }
    Colouring::on_complete(n, kind.colours(), colours)
}

pub fn decode(c: &Colouring, kind: EncodingKind) -> Result<EncodedObject> {
    if c.host().complete_order().is_none() {
        return Err(Error::MalformedEncoding("encodings live on complete hosts".into()));
    }
    if c.k() != kind.colours() {
        return Err(Error::MalformedEncoding(format!("{kind:?} needs k = {}", kind.colours())));
    }
    if let Some(&bad) = c.colours().iter().find(|&&x| !kind.allowed(x)) {
        return Err(Error::MalformedEncoding(format!("colour {bad} outside the range of {kind:?}")));
    }
    let n = c.order();
    if let EncodingKind::Multigraph { max_weight } = kind {
        return Ok(EncodedObject::Multigraph { n, max_weight, weights: c.colours().iter().map(|&x| x - 1).collect() });
    }
    let mut arcs = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            let bits = c.pair(i, j) - 1;
            if bits & 1 != 0 {
                arcs.insert((i, j));
            }
            if bits & 2 != 0 {
                arcs.insert((j, i));
            }
        }
    }
    Ok(match kind {
        EncodingKind::Digraph => EncodedObject::Digraph { n, arcs },
        EncodingKind::OrGraph => EncodedObject::OrGraph { n, arcs },
        _ => EncodedObject::Tournament { n, arcs },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn table_entries() {
        let one = EncodedObject::Digraph { n: 2, arcs: [(0, 1)].into() };
        assert_eq!(encode(&one).unwrap().colours(), &[2]);
        let back = EncodedObject::Digraph { n: 2, arcs: [(1, 0)].into() };
        assert_eq!(encode(&back).unwrap().colours(), &[3]);
        let double = EncodedObject::Digraph { n: 2, arcs: [(0, 1), (1, 0)].into() };
        assert_eq!(encode(&double).unwrap().colours(), &[4]);
        let none = EncodedObject::Digraph { n: 2, arcs: BTreeSet::new() };
        assert_eq!(encode(&none).unwrap().colours(), &[1]);
    }

    #[test]
    fn kinds_are_checked() {
        let double = EncodedObject::OrGraph { n: 2, arcs: [(0, 1), (1, 0)].into() };
        assert!(encode(&double).is_err());
        let gap = EncodedObject::Tournament { n: 3, arcs: [(0, 1), (1, 2)].into() };
        assert!(encode(&gap).is_err());
        let c = Colouring::on_complete(3, 4, vec![1, 2, 3]).unwrap();
        assert!(matches!(decode(&c, EncodingKind::Tournament), Err(Error::MalformedEncoding(_))));
        assert!(decode(&c, EncodingKind::OrGraph).is_ok());
        let heavy = EncodedObject::Multigraph { n: 2, max_weight: 4, weights: vec![5] };
        assert!(encode(&heavy).is_err());
    }

    #[test]
    fn random_round_trips() {
        let mut r = crate::rng::rng(11);
        for _ in 0..10_000 {
            let n = r.gen_range(1..=7);
            let mut arcs = BTreeSet::new();
            for a in 0..n {
                for b in 0..n {
                    if a != b && r.gen_bool(0.4) {
                        arcs.insert((a, b));
                    }
                }
            }
            let d = EncodedObject::Digraph { n, arcs };
            assert_eq!(decode(&encode(&d).unwrap(), EncodingKind::Digraph).unwrap(), d);
        }
        for _ in 0..1000 {
            let n = r.gen_range(2..=6);
            let mut arcs = BTreeSet::new();
            for a in 0..n {
                for b in a + 1..n {
                    arcs.insert(if r.gen_bool(0.5) { (a, b) } else { (b, a) });
                }
            }
            let t = EncodedObject::Tournament { n, arcs };
            assert_eq!(decode(&encode(&t).unwrap(), EncodingKind::Tournament).unwrap(), t);
            let weights = (0..n * (n - 1) / 2).map(|_| r.gen_range(0..=4)).collect();
            let m = EncodedObject::Multigraph { n, max_weight: 4, weights };
            let kind = EncodingKind::Multigraph { max_weight: 4 };
            assert_eq!(decode(&encode(&m).unwrap(), kind).unwrap(), m);
        }
    }
}
