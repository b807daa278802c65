//! Certified lower bounds on the colouring number of a graph property.
//!
//! `H(r, v)_l` is the class of graphs on `[l]` obtained by splitting the
//! vertices into `r` labelled (possibly empty) parts, making part `i` a clique
//! when `v_i` holds and independent otherwise, and choosing the edges
//! between parts freely. Graphs are 2-colourings with colour 2 as "edge".

use std::collections::HashSet;

use crate::error::{invalid, Error, Result};
use crate::host::{pair_index, HostGraph};
use crate::properties::Property;
use crate::template::Colour;

/// Every graph of `H(r, v)_l` lies in `p`.
pub fn universal_class_contained(p: &Property, r: usize, v: &[bool], l: usize, budget: Option<u64>) -> Result<bool> {
    if p.k() != 2 {
        return invalid("colouring-number tools work with graph properties (k = 2)");
    }
    if v.len() != r || r == 0 {
        return invalid("need one clique flag per part and at least one part");
    }
    if l > 6 {
        return invalid("class generation is limited to l <= 6");
    }
    let host = HostGraph::complete(l.max(1));
    let sys = p.constraints(&host)?;
    let cells = host.num_cells();
    let budget = budget.unwrap_or(u64::MAX);
    let mut seen: HashSet<Vec<Colour>> = HashSet::new();
    let mut work = 0u64;
    let mut part = vec![0usize; l];
    loop {
        let mut colours = vec![1 as Colour; cells];
        let mut free = Vec::new();
        for i in 0..l {
            for j in i + 1..l {
                let e = pair_index(l, i, j);
                if part[i] == part[j] {
                    colours[e] = if v[part[i]] { 2 } else { 1 };
                } else {
                    free.push(e);
                }
            }
        }
        for mask in 0..1u64 << free.len() {
            work += 1;
            if work > budget {
                return Err(Error::ResourceLimit { explored: work, partial: seen.len() as u128 });
            }
            for (b, &e) in free.iter().enumerate() {
                colours[e] = if mask >> b & 1 == 1 { 2 } else { 1 };
            }
            if seen.insert(colours.clone()) && sys.violates(&colours) {
                return Ok(false);
            }
        }
        // next assignment of vertices to parts
        let mut i = 0;
        loop {
            if i == l {
                return Ok(true);
            }
            part[i] += 1;
            if part[i] < r {
                break;
            }
            part[i] = 0;
            i += 1;
        }
    }
}

/// Largest `r <= r_max` for which some `v` passes at level `l`, together
/// with that `v`. Returns `(0, [])` if even `r = 1` fails.
pub fn chi_c_lower_bound(p: &Property, r_max: usize, l: usize) -> Result<(usize, Vec<bool>)> {
    for r in (1..=r_max).rev() {
        for bits in 0..1u32 << r {
            let v: Vec<bool> = (0..r).map(|i| bits >> i & 1 == 1).collect();
            if universal_class_contained(p, r, &v, l, None)? {
                return Ok((r, v));
            }
        }
    }
    Ok((0, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::properties::lookup;

    #[test]
    fn triangle_free_examples() {
        let p = lookup("triangle-free").unwrap();
        assert!(universal_class_contained(&p, 2, &[false, false], 4, None).unwrap());
        assert!(!universal_class_contained(&p, 3, &[false, false, false], 3, None).unwrap());
        assert!(!universal_class_contained(&p, 2, &[true, false], 4, None).unwrap());
        assert_eq!(chi_c_lower_bound(&p, 4, 4).unwrap(), (2, vec![false, false]));
    }

    #[test]
    fn trivial_extremes() {
        assert_eq!(chi_c_lower_bound(&lookup("all").unwrap(), 3, 4).unwrap().0, 3);
        assert_eq!(chi_c_lower_bound(&lookup("empty-graph").unwrap(), 3, 4).unwrap(), (1, vec![false]));
        assert!(universal_class_contained(&lookup("rainbow-k3").unwrap(), 1, &[false], 1, None).is_err());
        for p in ["triangle-free", "max-degree-2", "empty-graph"] {
            assert!(universal_class_contained(&lookup(p).unwrap(), 1, &[false], 1, None).unwrap());
        }
    }

    #[test]
    fn budget() {
        let p = lookup("all").unwrap();
        assert!(matches!(
            universal_class_contained(&p, 3, &[false; 3], 4, Some(10)),
            Err(Error::ResourceLimit { .. })
        ));
    }
}
