//! Forbidden families, order-hereditary properties and the built-in registry.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::combin::permutations;
use crate::constraint::{ConstraintSystem, EnumStats};
use crate::error::{invalid, Error, Result};
use crate::host::{pair_index, HostFamily, HostGraph, HostKind};
use crate::template::{Colour, Colouring, Palette, Template};

/// Finitely many colourings of a small pattern host (usually `K_N`).
/// Members are stored as cell colour vectors in the pattern's cell order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForbiddenFamily {
    pattern: HostKind,
    k: u8,
    members: Vec<Vec<Colour>>,
}

/// JSON shape `{N, k, members, host?}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForbiddenFamilyJson {
    #[serde(rename = "N")]
    pub order: usize,
    pub k: u8,
    pub members: Vec<Vec<Colour>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub host: Option<HostKind>,
}

impl ForbiddenFamily {
    /// Family of colourings of `K_N`.
    pub fn new(order: usize, k: u8, members: Vec<Vec<Colour>>) -> Result<Self> {
        Self::on_pattern(HostKind::Complete { n: order }, k, members)
    }

    pub fn on_pattern(pattern: HostKind, k: u8, mut members: Vec<Vec<Colour>>) -> Result<Self> {
        if members.is_empty() {
            return invalid("forbidden family must be nonempty");
        }
        let host = HostGraph::build(pattern.clone())?;
        for m in &members {
            Colouring::new(Arc::new(host.clone()), k, m.clone())?;
        }
        members.sort();
        members.dedup();
        Ok(ForbiddenFamily { pattern, k, members })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: ForbiddenFamilyJson = serde_json::from_str(text)?;
        Self::from_record(j)
    }

    pub fn from_record(j: ForbiddenFamilyJson) -> Result<Self> {
        match j.host {
            None => Self::new(j.order, j.k, j.members),
            Some(h) => {
                if HostGraph::build(h.clone())?.num_vertices() != j.order {
                    return invalid("`N` disagrees with the pattern host");
                }
                Self::on_pattern(h, j.k, j.members)
            }
        }
    }

    pub fn to_record(&self) -> ForbiddenFamilyJson {
        ForbiddenFamilyJson {
            order: self.order(),
            k: self.k,
            members: self.members.clone(),
            host: match self.pattern {
                HostKind::Complete { .. } => None,
                ref h => Some(h.clone()),
            },
        }
    }

    /// Number of pattern vertices.
    pub fn order(&self) -> usize {
        HostGraph::build(self.pattern.clone()).map(|h| h.num_vertices()).unwrap_or(0)
    }

    pub fn pattern(&self) -> &HostKind {
        &self.pattern
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    pub fn members(&self) -> &[Vec<Colour>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Adds every vertex relabelling of every member (complete patterns only).
    pub fn closed_under_permutations(&self) -> Result<Self> {
        let HostKind::Complete { n } = self.pattern else {
            return invalid("symmetric closure needs a complete pattern");
        };
        let mut out = Vec::new();
        for m in &self.members {
            for perm in permutations(n) {
                let mut c = vec![0; m.len()];
                for i in 0..n {
                    for j in i + 1..n {
                        let (a, b) = (perm[i].min(perm[j]), perm[i].max(perm[j]));
                        c[pair_index(n, a, b)] = m[pair_index(n, i, j)];
                    }
                }
                out.push(c);
            }
        }
        Self::on_pattern(self.pattern.clone(), self.k, out)
    }

    /// Constraint system on a host of the pattern's family.
    pub fn constraints(&self, host: &HostGraph) -> Result<ConstraintSystem> {
        let pattern = HostGraph::build(self.pattern.clone())?;
        if let (HostKind::Complete { n: small }, Some(big)) = (&self.pattern, host.complete_order()) {
            if *small > big {
                return Ok(ConstraintSystem::unconstrained(host.num_cells(), self.k));
            }
        }
        ConstraintSystem::on_host(&pattern, host, self.k, &self.members)
    }
}

/// Membership oracle for colourings of complete hosts.
pub type Membership = Arc<dyn Fn(&Colouring) -> bool + Send + Sync>;

#[derive(Clone)]
pub enum PropertyKind {
    Forb(ForbiddenFamily),
    /// A hereditary property decided by its restrictions of order `order`.
    Predicate { order: usize, test: Membership },
    SymmetricClosure(Box<PropertyKind>),
}

impl fmt::Debug for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyKind::Forb(fam) => write!(f, "Forb(N={}, {} members)", fam.order(), fam.len()),
            PropertyKind::Predicate { order, .. } => write!(f, "Predicate(order {order})"),
            PropertyKind::SymmetricClosure(inner) => write!(f, "Sym({inner:?})"),
        }
    }
}

/// An order-hereditary property of `k`-colourings.
#[derive(Clone, Debug)]
pub struct Property {
    id: String,
    description: String,
    k: u8,
    kind: PropertyKind,
    monotone: Palette,
    down_monotone: bool,
    hosts: HostFamily,
}

/// All colourings of `K_m` that fail `test`.
fn non_members(k: u8, m: usize, test: &Membership) -> Vec<Vec<Colour>> {
    let host = Arc::new(HostGraph::complete(m.max(1)));
    let cells = host.num_cells();
    let mut out = Vec::new();
    let total = (k as u64).pow(cells as u32);
    for x in 0..total {
        let mut y = x;
        let colours: Vec<Colour> = (0..cells)
            .map(|_| {
                let c = (y % k as u64) as Colour + 1;
                y /= k as u64;
                c
            })
            .collect();
        let c = Colouring::new(host.clone(), k, colours).expect("valid colouring");
        if !test(&c) {
            out.push(c.colours().to_vec());
        }
    }
    out
}

impl Property {
    pub fn forb(id: &str, family: ForbiddenFamily) -> Self {
        let hosts = match family.pattern {
            HostKind::Complete { .. } => HostFamily::Complete,
            HostKind::HypercubeEdges { .. } => HostFamily::HypercubeEdges,
            HostKind::HypercubeVertices { .. } => HostFamily::HypercubeVertices,
            HostKind::Grid { .. } => HostFamily::Grid { a: 1, b: 1 },
            HostKind::Multipartite { parts, .. } => HostFamily::Multipartite { parts },
            HostKind::Path { .. } => HostFamily::Path,
        };
        Property {
            id: id.to_string(),
            description: String::new(),
            k: family.k,
            kind: PropertyKind::Forb(family),
            monotone: Palette::EMPTY,
            down_monotone: false,
            hosts,
        }
    }

    pub fn predicate<F>(id: &str, k: u8, order: usize, test: F) -> Self
    where
        F: Fn(&Colouring) -> bool + Send + Sync + 'static,
    {
        Property {
            id: id.to_string(),
            description: String::new(),
            k,
            kind: PropertyKind::Predicate { order, test: Arc::new(test) },
            monotone: Palette::EMPTY,
            down_monotone: false,
            hosts: HostFamily::Complete,
        }
    }

    pub fn described(mut self, text: &str) -> Self {
        self.description = text.to_string();
        self
    }

    /// Flags colours `i` for which recolouring any cell to `i` stays inside.
    pub fn monotone_in(mut self, colours: &[Colour]) -> Self {
        self.monotone = Palette::from_colours(colours);
        self
    }

    /// Flags that lowering any cell's colour stays inside.
    pub fn down_closed(mut self) -> Self {
        self.down_monotone = true;
        self
    }

    /// Closes the property's forbidden configurations under vertex relabelling.
    pub fn symmetric_closure(mut self) -> Self {
        self.kind = PropertyKind::SymmetricClosure(Box::new(self.kind));
        self.id = format!("sym({})", self.id);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    pub fn kind(&self) -> &PropertyKind {
        &self.kind
    }

    pub fn monotone_colours(&self) -> Palette {
        self.monotone
    }

    pub fn is_monotone_in(&self, c: Colour) -> bool {
        self.monotone.contains(c)
    }

    pub fn is_down_monotone(&self) -> bool {
        self.down_monotone
    }

    pub fn host_family(&self) -> HostFamily {
        self.hosts
    }

    /// Defining order: `N` for families, `m` for predicates.
    pub fn defining_order(&self) -> usize {
        fn go(kind: &PropertyKind) -> usize {
            match kind {
                PropertyKind::Forb(f) => f.order(),
                PropertyKind::Predicate { order, .. } => *order,
                PropertyKind::SymmetricClosure(inner) => go(inner),
            }
        }
        go(&self.kind)
    }

    /// The forbidden family that decides membership on `K_n`, or `None` if
    /// nothing is forbidden at that order.
    pub fn forbidden_at(&self, n: usize) -> Result<Option<ForbiddenFamily>> {
        fn go(kind: &PropertyKind, k: u8, n: usize) -> Result<Option<ForbiddenFamily>> {
            match kind {
                PropertyKind::Forb(f) => Ok(match f.pattern {
                    HostKind::Complete { n: small } if small > n => None,
                    _ => Some(f.clone()),
                }),
                PropertyKind::Predicate { order, test } => {
                    let m = (*order).min(n);
                    if m < 2 {
                        return Ok(None);
                    }
                    let bad = non_members(k, m, test);
                    if bad.is_empty() {
                        Ok(None)
                    } else {
                        ForbiddenFamily::new(m, k, bad).map(Some)
                    }
                }
                PropertyKind::SymmetricClosure(inner) => match go(inner, k, n)? {
                    None => Ok(None),
                    Some(f) => f.closed_under_permutations().map(Some),
                },
            }
        }
        go(&self.kind, self.k, n)
    }

    /// Constraint system deciding membership on `host`.
    pub fn constraints(&self, host: &HostGraph) -> Result<ConstraintSystem> {
        if let Some(n) = host.complete_order() {
            return match self.forbidden_at(n)? {
                None => Ok(ConstraintSystem::unconstrained(host.num_cells(), self.k)),
                Some(f) => f.constraints(host),
            };
        }
        match &self.kind {
            PropertyKind::Forb(f) => f.constraints(host),
            _ => invalid(format!("property `{}` is only defined on complete hosts", self.id)),
        }
    }

    pub fn contains(&self, c: &Colouring) -> Result<bool> {
        if c.k() != self.k {
            return invalid("colouring and property use different colour counts");
        }
        Ok(!self.constraints(c.host())?.violates(c.colours()))
    }

    /// `Q^j`: forbid exactly the non-members of order at most `j` (for `j <= 5`).
    pub fn approximation(&self, j: usize) -> Result<Property> {
        if j > 5 {
            return invalid("approximation chain is exposed up to order 5");
        }
        if j < 2 {
            return invalid("approximation needs order at least 2");
        }
        // Q^j agrees with P up to order j and is decided by order-j restrictions
        let inner = self.clone();
        let mut p = Property::predicate(&format!("{}~Q{j}", self.id), self.k, j, move |c: &Colouring| {
            inner.contains(c).unwrap_or(false)
        });
        p.monotone = self.monotone;
        p.down_monotone = self.down_monotone;
        Ok(p)
    }
}

/// True iff some member of `family` appears as an order-preserving
/// subcolouring of `c`.
pub fn violates(c: &Colouring, family: &ForbiddenFamily) -> Result<bool> {
    if c.k() != family.k() {
        return invalid("colouring and family use different colour counts");
    }
    Ok(family.constraints(c.host())?.violates(c.colours()))
}

/// `|P_n|` on `K_n`.
pub fn speed(p: &Property, n: usize, budget: Option<u64>) -> Result<EnumStats> {
    speed_on(p, &HostGraph::complete(n), budget)
}

/// Number of colourings of `host` inside `p`.
pub fn speed_on(p: &Property, host: &HostGraph, budget: Option<u64>) -> Result<EnumStats> {
    p.constraints(host)?.count(budget)
}

/// `B(t)`: pairs (embedding, member) with the member realisable inside `t`.
pub fn bad_pairs(t: &Template, family: &ForbiddenFamily) -> Result<u64> {
    if t.k() != family.k() {
        return invalid("template and family use different colour counts");
    }
    Ok(family.constraints(t.host())?.bad_pairs(t.palettes()))
}

/// `<t> ⊆ P`.
pub fn template_in_property(t: &Template, p: &Property) -> Result<bool> {
    if t.k() != p.k() {
        return invalid("template and property use different colour counts");
    }
    Ok(p.constraints(t.host())?.admits(t.palettes()))
}

fn all_triples(k: u8, bad: impl Fn(Colour, Colour, Colour) -> bool) -> Vec<Vec<Colour>> {
    let mut out = Vec::new();
    for a in 1..=k {
        for b in 1..=k {
            for c in 1..=k {
                if bad(a, b, c) {
                    out.push(vec![a, b, c]);
                }
            }
        }
    }
    out
}

fn max_degree(limit: usize) -> impl Fn(&Colouring) -> bool + Send + Sync {
    move |c: &Colouring| {
        let n = c.order();
        (0..n).all(|v| (0..n).filter(|&u| u != v && c.pair(u, v) == 2).count() <= limit)
    }
}

/// Built-in properties. Graph properties use `k = 2` with colour 2 as "edge";
/// digraphs use the 4-colour arc encoding; multigraphs use colour = weight + 1.
pub fn registry() -> Vec<Property> {
    let fam = |n, k, m| ForbiddenFamily::new(n, k, m).expect("built-in family");
    let host_fam = |h, k, m| ForbiddenFamily::on_pattern(h, k, m).expect("built-in family");
    vec![
        Property::forb("rainbow-k3", fam(3, 3, all_triples(3, |a, b, c| a != b && b != c && a != c)))
            .described("3-colourings of K_n with no rainbow triangle"),
        Property::forb("dk3", fam(3, 4, vec![vec![4, 4, 4]]))
            .monotone_in(&[1])
            .down_closed()
            .described("digraphs without a double triangle (1 none, 2 i->j, 3 j->i, 4 both)"),
        Property::forb(
            "multigraph-3-5",
            fam(3, 5, all_triples(5, |a, b, c| (a + b + c) as usize - 3 > 4)),
        )
        .monotone_in(&[1])
        .down_closed()
        .described("multigraphs where every triple carries total weight at most 4"),
        Property::forb("triangle-free", fam(3, 2, vec![vec![2, 2, 2]]))
            .monotone_in(&[1])
            .down_closed()
            .described("triangle-free graphs"),
        Property::forb("inc-path-2", fam(3, 2, vec![vec![2, 1, 2], vec![2, 2, 2]]))
            .monotone_in(&[1])
            .down_closed()
            .described("graphs with no increasing path i<j<l with ij and jl edges"),
        Property::predicate("max-degree-2", 2, 4, max_degree(2))
            .monotone_in(&[1])
            .down_closed()
            .described("graphs of maximum degree at most 2"),
        Property::predicate("max-degree-1", 2, 3, max_degree(1))
            .monotone_in(&[1])
            .down_closed()
            .described("matchings (maximum degree at most 1)"),
        Property::forb("empty-graph", fam(2, 2, vec![vec![2]]))
            .monotone_in(&[1])
            .down_closed()
            .described("edgeless graphs"),
        Property::predicate("all", 2, 2, |_| true)
            .monotone_in(&[1, 2])
            .down_closed()
            .described("every 2-colouring"),
        Property::forb("path-3colour", host_fam(HostKind::Path { n: 3 }, 3, vec![vec![1, 1], vec![2, 2], vec![3, 3]]))
            .described("3-colourings of path edges with no two consecutive edges alike"),
        Property::forb("q2-free-edge", host_fam(HostKind::HypercubeEdges { dim: 2 }, 2, vec![vec![2, 2, 2, 2]]))
            .monotone_in(&[1])
            .down_closed()
            .described("hypercube edge sets containing no Q_2"),
        Property::forb(
            "q2-free-vertex",
            host_fam(HostKind::HypercubeVertices { dim: 2 }, 2, vec![vec![2, 2, 2, 2]]),
        )
        .monotone_in(&[1])
        .down_closed()
        .described("hypercube vertex sets containing no Q_2 subcube"),
    ]
}

pub fn lookup(id: &str) -> Result<Property> {
    registry()
        .into_iter()
        .find(|p| p.id == id)
        .ok_or_else(|| Error::UnknownId(id.to_string()))
}

pub fn registered_ids() -> Vec<String> {
    registry().into_iter().map(|p| p.id).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kn(n: usize) -> Arc<HostGraph> {
        Arc::new(HostGraph::complete(n))
    }

    /// Independent oracle: enumerate every colouring and test all N-subsets.
    fn brute_speed(p: &Property, n: usize) -> u64 {
        let f = p.forbidden_at(n).unwrap();
        let host = kn(n);
        let cells = host.num_cells();
        let k = p.k() as u64;
        let mut count = 0;
        for x in 0..k.pow(cells as u32) {
            let mut y = x;
            let colours: Vec<Colour> = (0..cells)
                .map(|_| {
                    let c = (y % k) as Colour + 1;
                    y /= k;
                    c
                })
                .collect();
            let c = Colouring::new(host.clone(), p.k(), colours).unwrap();
            let ok = match &f {
                None => true,
                Some(f) => crate::combin::combinations(n, f.order())
                    .iter()
                    .all(|a| !f.members().contains(&c.restrict(a).unwrap().colours().to_vec())),
            };
            if ok {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn violates_examples() {
        let mono = ForbiddenFamily::new(3, 2, vec![vec![1, 1, 1]]).unwrap();
        let c1 = Colouring::constant(kn(4), 2, 1).unwrap();
        let c2 = Colouring::constant(kn(4), 2, 2).unwrap();
        assert!(violates(&c1, &mono).unwrap());
        assert!(!violates(&c2, &mono).unwrap());
        let rainbow = lookup("rainbow-k3").unwrap().forbidden_at(3).unwrap().unwrap();
        assert_eq!(rainbow.len(), 6);
        let c = Colouring::on_complete(3, 3, vec![1, 2, 3]).unwrap();
        assert!(violates(&c, &rainbow).unwrap());
        let wrong_k = Colouring::constant(kn(4), 3, 1).unwrap();
        assert!(violates(&wrong_k, &mono).is_err());
    }

    #[test]
    fn speed_examples() {
        assert_eq!(speed(&lookup("rainbow-k3").unwrap(), 3, None).unwrap().count, 21);
        assert_eq!(speed(&lookup("triangle-free").unwrap(), 4, None).unwrap().count, 41);
        // 8 graphs on [3]; the increasing 2-path needs edges 01 and 12
        assert_eq!(speed(&lookup("inc-path-2").unwrap(), 3, None).unwrap().count, 8 - 2);
    }

    #[test]
    fn speed_matches_brute_force_for_registry() {
        for p in registry() {
            if p.host_family() != HostFamily::Complete {
                continue;
            }
            let top = if p.k() <= 2 { 5 } else if p.k() == 3 { 4 } else { 3 };
            for n in 2..=top {
                assert_eq!(speed(&p, n, None).unwrap().count as u64, brute_speed(&p, n), "{} n={n}", p.id());
            }
        }
    }

    #[test]
    fn path_speed_closed_form() {
        let p = lookup("path-3colour").unwrap();
        for n in 3..=9 {
            let host = HostGraph::build(HostKind::Path { n }).unwrap();
            assert_eq!(speed_on(&p, &host, None).unwrap().count, 3 << (n - 2));
        }
    }

    #[test]
    fn bad_pairs_examples() {
        let mono = ForbiddenFamily::new(3, 2, vec![vec![1, 1, 1]]).unwrap();
        assert_eq!(bad_pairs(&Template::full(kn(3), 2).unwrap(), &mono).unwrap(), 1);
        let member = Colouring::on_complete(3, 2, vec![1, 1, 1]).unwrap().as_template();
        assert_eq!(bad_pairs(&member, &mono).unwrap(), 1);
        let rainbow = lookup("rainbow-k3").unwrap().forbidden_at(3).unwrap().unwrap();
        assert_eq!(bad_pairs(&Template::full(kn(4), 3).unwrap(), &rainbow).unwrap(), 24);
    }

    #[test]
    fn template_membership_examples() {
        let p = lookup("rainbow-k3").unwrap();
        let pair = Template::constant(kn(5), 3, Palette::from_colours(&[1, 2])).unwrap();
        assert!(template_in_property(&pair, &p).unwrap());
        assert!(!template_in_property(&Template::full(kn(3), 3).unwrap(), &p).unwrap());
        let c = Colouring::constant(kn(4), 3, 2).unwrap();
        assert!(template_in_property(&c.as_template(), &p).unwrap());
    }

    #[test]
    fn predicate_below_defining_order() {
        let p = lookup("max-degree-2").unwrap();
        // on three vertices every graph has max degree <= 2
        assert_eq!(speed(&p, 3, None).unwrap().count, 8);
        // inclusion-exclusion over degree-3 vertices: 64 - (4*8 - 6*2 + 4 - 1)
        assert_eq!(speed(&p, 4, None).unwrap().count, 41);
    }

    #[test]
    fn symmetric_closure_of_increasing_path() {
        let p = lookup("inc-path-2").unwrap().symmetric_closure();
        let f = p.forbidden_at(3).unwrap().unwrap();
        // closing "ij, jl edges" over relabellings forbids every 2-path
        assert_eq!(f.len(), 4);
        assert_eq!(speed(&p, 4, None).unwrap().count, brute_speed(&p, 4) as u128);
    }

    #[test]
    fn approximation_chain_is_nested() {
        let p = lookup("max-degree-2").unwrap();
        for n in 3..=5 {
            let q3 = speed(&p.approximation(3).unwrap(), n, None).unwrap().count;
            let q4 = speed(&p.approximation(4).unwrap(), n, None).unwrap().count;
            let q5 = speed(&p.approximation(5).unwrap(), n, None).unwrap().count;
            let exact = speed(&p, n, None).unwrap().count;
            assert!(q3 >= q4 && q4 >= q5 && q5 >= exact);
            assert_eq!(q4, exact);
        }
        assert!(p.approximation(6).is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"N": 3, "k": 2, "members": [[2, 2, 2]]}"#;
        let f = ForbiddenFamily::from_json(text).unwrap();
        assert_eq!(f.order(), 3);
        let back = serde_json::to_string(&f.to_record()).unwrap();
        assert_eq!(ForbiddenFamily::from_json(&back).unwrap(), f);
        assert!(ForbiddenFamily::from_json(r#"{"N": 3, "k": 2, "members": []}"#).is_err());
        assert!(ForbiddenFamily::from_json(r#"{"N": 3, "k": 2, "members": [[3, 1, 1]]}"#).is_err());
    }

    #[test]
    fn unknown_id() {
        assert!(matches!(lookup("rainbow-k4"), Err(Error::UnknownId(_))));
    }
}
