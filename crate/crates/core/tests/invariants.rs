//! Randomised invariants against small brute-force oracles.

use std::collections::BTreeSet;
use std::sync::Arc;

use chroma_core::containers::{container_pipeline, PipelineOptions};
use chroma_core::encoding::{decode, encode, EncodedObject};
use chroma_core::extremal::{extremal_entropy, SearchOptions};
use chroma_core::graphon::{conditional_expectation, cut_distance, entropy_graphon, l1_distance, Metric, StepGraphon};
use chroma_core::properties::{bad_pairs, speed, template_in_property, ForbiddenFamily, Property};
use chroma_core::{HostGraph, Palette, Template};
use proptest::prelude::*;

/// For each 3-subset of `K_4`, the cells of its pairs in lexicographic order.
fn k4_triples() -> [[usize; 3]; 4] {
    // pairs: 01 02 03 12 13 23 -> 0..6
    [[0, 1, 3], [0, 2, 4], [1, 2, 5], [3, 4, 5]]
}

fn family_strategy(k: u8) -> impl Strategy<Value = Vec<Vec<u8>>> {
    let all: Vec<Vec<u8>> =
        (0..(k as usize).pow(3)).map(|x| vec![(x % k as usize) as u8 + 1, (x / k as usize % k as usize) as u8 + 1, (x / (k as usize * k as usize)) as u8 + 1]).collect();
    proptest::sample::subsequence(all.clone(), 1..=all.len())
}

fn palettes_from(codes: &[u64]) -> Vec<Palette> {
    codes.iter().map(|&m| Palette::from_mask(m)).collect()
}

/// Number of (3-subset, member) pairs realisable inside the palettes.
fn brute_bad(pals: &[Palette], members: &[Vec<u8>]) -> u64 {
    let mut b = 0;
    for t in k4_triples() {
        for m in members {
            if (0..3).all(|i| pals[t[i]].contains(m[i])) {
                b += 1;
            }
        }
    }
    b
}

fn brute_speed(k: u8, members: &[Vec<u8>]) -> u64 {
    let set: BTreeSet<&Vec<u8>> = members.iter().collect();
    let mut count = 0;
    for code in 0..(k as u64).pow(6) {
        let c: Vec<u8> = (0..6).map(|i| (code / (k as u64).pow(i) % k as u64) as u8 + 1).collect();
        if k4_triples().iter().all(|t| !set.contains(&vec![c[t[0]], c[t[1]], c[t[2]]])) {
            count += 1;
        }
    }
    count
}

/// ex(4, P) by trying every template on `K_4`.
fn brute_ex(k: u8, members: &[Vec<u8>]) -> f64 {
    let full = (1u64 << k) - 1;
    let mut best = f64::NEG_INFINITY;
    let mut code = vec![1u64; 6];
    loop {
        let pals = palettes_from(&code);
        if brute_bad(&pals, members) == 0 {
            let e: f64 = pals.iter().map(|p| (p.len() as f64).ln()).sum::<f64>() / (k as f64).ln();
            best = best.max(e);
        }
        let mut i = 0;
        while i < 6 && code[i] == full {
            code[i] = 1;
            i += 1;
        }
        if i == 6 {
            break;
        }
        code[i] += 1;
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn speed_matches_brute_force(members in family_strategy(2)) {
        let p = Property::forb("random", ForbiddenFamily::new(3, 2, members.clone()).unwrap());
        prop_assert_eq!(speed(&p, 4, None).unwrap().count, brute_speed(2, &members) as u128);
    }

    #[test]
    fn speed_matches_brute_force_three_colours(members in family_strategy(3)) {
        let p = Property::forb("random", ForbiddenFamily::new(3, 3, members.clone()).unwrap());
        prop_assert_eq!(speed(&p, 4, None).unwrap().count, brute_speed(3, &members) as u128);
    }

    #[test]
    fn bad_pairs_match_brute_force(members in family_strategy(3), codes in proptest::collection::vec(1u64..8, 6)) {
        let f = ForbiddenFamily::new(3, 3, members.clone()).unwrap();
        let p = Property::forb("random", f.clone());
        let t = Template::new(Arc::new(HostGraph::complete(4)), 3, palettes_from(&codes)).unwrap();
        let b = bad_pairs(&t, &f).unwrap();
        prop_assert_eq!(b, brute_bad(t.palettes(), &members));
        prop_assert_eq!(b == 0, template_in_property(&t, &p).unwrap());
    }

    #[test]
    fn extremal_matches_brute_force(members in family_strategy(2)) {
        let p = Property::forb("random", ForbiddenFamily::new(3, 2, members.clone()).unwrap());
        let expect = brute_ex(2, &members);
        let r = extremal_entropy(&p, 4, SearchOptions::default());
        if expect == f64::NEG_INFINITY {
            prop_assert!(r.is_err());
            return Ok(());
        }
        let r = r.unwrap();
        prop_assert!(r.proved());
        prop_assert!((r.value - expect).abs() < 1e-9);
        prop_assert!(template_in_property(&r.witness, &p).unwrap());
    }

    #[test]
    fn containers_cover_every_member(members in family_strategy(2), seed in 0u64..1000) {
        let f = ForbiddenFamily::new(3, 2, members).unwrap();
        let opts = PipelineOptions { sparsify: false, seed, ..PipelineOptions::default() };
        let (_, rep) = container_pipeline(&f, Arc::new(HostGraph::complete(4)), opts).unwrap();
        prop_assert_eq!(rep.coverage.unwrap().fraction(), 1.0);
        prop_assert!(rep.threshold_held);
    }

    #[test]
    fn palette_algebra(a in 1u64..256, b in 1u64..256) {
        let (p, q) = (Palette::from_mask(a), Palette::from_mask(b));
        prop_assert_eq!(p.union(q).mask(), a | b);
        prop_assert_eq!(p.intersect(q).mask(), a & b);
        prop_assert_eq!(p.is_subset(q), a & !b == 0);
        prop_assert_eq!(p.len(), a.count_ones());
        prop_assert_eq!(p.nonempty_subsets().len() as u64, (1u64 << a.count_ones()) - 1);
        prop_assert!(p.colours().all(|c| p.contains(c)));
        prop_assert_eq!(Palette::from_colours(&p.colours().collect::<Vec<_>>()), p);
    }

    #[test]
    fn multigraph_encoding_round_trips(n in 2usize..7, d in 1u8..5, raw in proptest::collection::vec(0u8..=255, 21)) {
        let cells = n * (n - 1) / 2;
        let weights: Vec<u8> = raw[..cells].iter().map(|w| w % (d + 1)).collect();
        let obj = EncodedObject::Multigraph { n, max_weight: d, weights };
        let c = encode(&obj).unwrap();
        prop_assert_eq!(decode(&c, obj.kind()).unwrap(), obj);
    }

    #[test]
    fn digraph_encoding_round_trips(n in 2usize..7, raw in proptest::collection::vec(any::<bool>(), 42)) {
        let mut arcs = BTreeSet::new();
        let mut i = 0;
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    if raw[i] {
                        arcs.insert((a, b));
                    }
                    i += 1;
                }
            }
        }
        let obj = EncodedObject::Digraph { n, arcs };
        let c = encode(&obj).unwrap();
        prop_assert_eq!(decode(&c, obj.kind()).unwrap(), obj);
    }

    #[test]
    fn cut_distance_is_a_bounded_symmetric(k in 2u8..4, m1 in 1usize..5, m2 in 1usize..5, s1 in any::<u64>(), s2 in any::<u64>()) {
        let u = StepGraphon::random(k, m1, s1);
        let w = StepGraphon::random(k, m2, s2);
        let uw = cut_distance(&u, &w, Metric::Dk).unwrap().value;
        let wu = cut_distance(&w, &u, Metric::Dk).unwrap().value;
        prop_assert!((uw - wu).abs() < 1e-9);
        prop_assert!(uw >= -1e-12 && uw <= l1_distance(&u, &w) + 1e-9);
    }

    #[test]
    fn averaging_never_lowers_entropy(k in 2u8..5, m in 2usize..7, seed in any::<u64>()) {
        let w = StepGraphon::random(k, m, seed);
        let classes = vec![(0..m / 2).collect::<Vec<_>>(), (m / 2..m).collect()];
        let e = conditional_expectation(&w, &classes).unwrap();
        prop_assert!(entropy_graphon(&e) >= entropy_graphon(&w) - 1e-12);
        let one = conditional_expectation(&w, &[(0..m).collect()]).unwrap();
        prop_assert!(entropy_graphon(&one) >= entropy_graphon(&e) - 1e-12);
    }
}

#[test]
fn triple_cell_layout_matches_pair_index() {
    use chroma_core::host::pair_index;
    let triples = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    for (t, cells) in triples.iter().zip(k4_triples()) {
        let got = [pair_index(4, t[0], t[1]), pair_index(4, t[0], t[2]), pair_index(4, t[1], t[2])];
        assert_eq!(got, cells);
    }
}
