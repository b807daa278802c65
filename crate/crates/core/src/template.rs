//! Colourings and templates over an ordered host.
//!
//! Colours are 1-based (`1..=k`). A palette is a bitmask whose bit `c - 1`
//! marks colour `c`. Cells are indexed in the host's cell order, which for
//! complete hosts is the lexicographic order of pairs `i < j`.

use std::fmt;
use std::ops::ControlFlow;
use std::sync::Arc;

use num_bigint::BigUint;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::combin::for_each_combination;
use crate::error::{invalid, Error, Result};
use crate::host::{pair_index, HostGraph, HostKind};
use crate::rng;

pub type Colour = u8;

/// Largest supported colour count.
pub const MAX_COLOURS: u8 = 32;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Palette(u64);

impl Palette {
    pub const EMPTY: Palette = Palette(0);

    pub fn full(k: u8) -> Self {
        Palette((1u64 << k) - 1)
    }

    pub fn singleton(c: Colour) -> Self {
        debug_assert!(c >= 1);
        Palette(1u64 << (c - 1))
    }

    pub fn from_mask(mask: u64) -> Self {
        Palette(mask)
    }

    pub fn from_colours(colours: &[Colour]) -> Self {
        Palette(colours.iter().fold(0, |m, &c| m | (1u64 << (c - 1))))
    }

    /// `{1, ..., top}`.
    pub fn prefix(top: u8) -> Self {
        Palette((1u64 << top) - 1)
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn contains(self, c: Colour) -> bool {
        c >= 1 && self.0 & (1u64 << (c - 1)) != 0
    }

    #[inline]
    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersect(self, other: Palette) -> Palette {
        Palette(self.0 & other.0)
    }

    pub fn union(self, other: Palette) -> Palette {
        Palette(self.0 | other.0)
    }

    pub fn is_subset(self, other: Palette) -> bool {
        self.0 & !other.0 == 0
    }

    /// Largest colour in the palette.
    pub fn max_colour(self) -> Option<Colour> {
        (self.0 != 0).then(|| (64 - self.0.leading_zeros()) as Colour)
    }

    pub fn colours(self) -> impl Iterator<Item = Colour> {
        let m = self.0;
        (1..=64u8).filter(move |&c| m & (1u64 << (c - 1)) != 0)
    }

    /// The `i`-th smallest colour.
    pub fn nth(self, mut i: usize) -> Colour {
        let mut m = self.0;
        loop {
            let c = m.trailing_zeros() as Colour + 1;
            if i == 0 {
                return c;
            }
            m &= m - 1;
            i -= 1;
        }
    }

    /// Every nonempty sub-palette.
    pub fn nonempty_subsets(self) -> Vec<Palette> {
        let mut out = Vec::new();
        let mut s = self.0;
        while s != 0 {
            out.push(Palette(s));
            s = (s - 1) & self.0;
        }
        out
    }
}

impl fmt::Debug for Palette {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.colours()).finish()
    }
}

fn check_k(k: u8) -> Result<()> {
    if k == 0 || k > MAX_COLOURS {
        return invalid(format!("colour count {k} outside 1..={MAX_COLOURS}"));
    }
    Ok(())
}

fn same_host(a: &Arc<HostGraph>, b: &Arc<HostGraph>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// A total colouring of the host's cells.
#[derive(Clone, PartialEq, Eq)]
pub struct Colouring {
    host: Arc<HostGraph>,
    k: u8,
    colours: Vec<Colour>,
}

impl fmt::Debug for Colouring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Colouring({}, k={}, {:?})", self.host.kind(), self.k, self.colours)
    }
}

impl Colouring {
    pub fn new(host: Arc<HostGraph>, k: u8, colours: Vec<Colour>) -> Result<Self> {
        check_k(k)?;
        if colours.len() != host.num_cells() {
            return invalid(format!(
                "colouring has {} entries, host has {} cells",
                colours.len(),
                host.num_cells()
            ));
        }
        if let Some(bad) = colours.iter().find(|&&c| c == 0 || c > k) {
            return invalid(format!("colour {bad} outside 1..={k}"));
        }
        Ok(Colouring { host, k, colours })
    }

    /// Colouring of `K_n` from its lexicographic edge colours.
    pub fn on_complete(n: usize, k: u8, colours: Vec<Colour>) -> Result<Self> {
        Self::new(Arc::new(HostGraph::complete(n)), k, colours)
    }

    pub fn constant(host: Arc<HostGraph>, k: u8, c: Colour) -> Result<Self> {
        let m = host.num_cells();
        Self::new(host, k, vec![c; m])
    }

    pub fn host(&self) -> &Arc<HostGraph> {
        &self.host
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    pub fn colours(&self) -> &[Colour] {
        &self.colours
    }

    pub fn get(&self, cell: usize) -> Colour {
        self.colours[cell]
    }

    /// Colour of pair `{i, j}` on a complete host.
    pub fn pair(&self, i: usize, j: usize) -> Colour {
        let n = self.host.num_vertices();
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.colours[pair_index(n, i, j)]
    }

    pub fn order(&self) -> usize {
        self.host.num_vertices()
    }

    /// The zero-entropy template realised only by this colouring.
    pub fn as_template(&self) -> Template {
        Template {
            host: self.host.clone(),
            k: self.k,
            palettes: self.colours.iter().map(|&c| Palette::singleton(c)).collect(),
        }
    }

    /// Order-preserving restriction to the vertex set `a` of a complete host.
    pub fn restrict(&self, a: &[usize]) -> Result<Colouring> {
        let idx = restriction_cells(&self.host, a)?;
        Colouring::on_complete(a.len(), self.k, idx.iter().map(|&e| self.colours[e]).collect())
    }

    pub fn to_json(&self) -> TemplateJson {
        self.as_template().to_json()
    }
}

/// A nonempty palette per cell.
#[derive(Clone, PartialEq, Eq)]
pub struct Template {
    host: Arc<HostGraph>,
    k: u8,
    palettes: Vec<Palette>,
}

impl fmt::Debug for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Template({}, k={}, {:?})", self.host.kind(), self.k, self.palettes)
    }
}

/// Cell indices of `K_|a|` inside a complete host, in lexicographic order.
pub(crate) fn restriction_cells(host: &HostGraph, a: &[usize]) -> Result<Vec<usize>> {
    let Some(n) = host.complete_order() else {
        return invalid("vertex restriction needs a complete host");
    };
    if a.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("restriction set must be strictly increasing");
    }
    if a.iter().any(|&v| v >= n) {
        return invalid("restriction set is not a subset of the host's vertices");
    }
    let mut out = Vec::with_capacity(a.len() * a.len().saturating_sub(1) / 2);
    for x in 0..a.len() {
        for y in x + 1..a.len() {
            out.push(pair_index(n, a[x], a[y]));
        }
    }
    Ok(out)
}

impl Template {
    pub fn new(host: Arc<HostGraph>, k: u8, palettes: Vec<Palette>) -> Result<Self> {
        check_k(k)?;
        if palettes.len() != host.num_cells() {
            return invalid(format!(
                "template has {} palettes, host has {} cells",
                palettes.len(),
                host.num_cells()
            ));
        }
        let full = Palette::full(k);
        for (i, p) in palettes.iter().enumerate() {
            if p.is_empty() {
                return invalid(format!("palette at cell {i} is empty"));
            }
            if !p.is_subset(full) {
                return invalid(format!("palette at cell {i} uses colours above {k}"));
            }
        }
        Ok(Template { host, k, palettes })
    }

    /// Every cell gets `[k]`.
    pub fn full(host: Arc<HostGraph>, k: u8) -> Result<Self> {
        let m = host.num_cells();
        Self::new(host, k, vec![Palette::full(k); m])
    }

    pub fn constant(host: Arc<HostGraph>, k: u8, p: Palette) -> Result<Self> {
        let m = host.num_cells();
        Self::new(host, k, vec![p; m])
    }

    pub fn host(&self) -> &Arc<HostGraph> {
        &self.host
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    pub fn palettes(&self) -> &[Palette] {
        &self.palettes
    }

    pub fn palette(&self, cell: usize) -> Palette {
        self.palettes[cell]
    }

    pub fn order(&self) -> usize {
        self.host.num_vertices()
    }

    /// `sum_e log_k |t(e)|`.
    pub fn entropy(&self) -> f64 {
        entropy_of(&self.palettes, self.k)
    }

    /// `prod_e |t(e)|`, i.e. the number of realisations.
    pub fn realisation_count(&self) -> BigUint {
        self.palettes
            .iter()
            .fold(BigUint::from(1u32), |acc, p| acc * BigUint::from(p.len()))
    }

    pub fn restrict(&self, a: &[usize]) -> Result<Template> {
        let idx = restriction_cells(&self.host, a)?;
        Template::new(
            Arc::new(HostGraph::complete(a.len().max(1))),
            self.k,
            idx.iter().map(|&e| self.palettes[e]).collect(),
        )
    }

    pub fn is_zero_entropy(&self) -> bool {
        self.palettes.iter().all(|p| p.len() == 1)
    }

    /// The unique realisation of a zero-entropy template.
    pub fn to_colouring(&self) -> Option<Colouring> {
        self.is_zero_entropy().then(|| Colouring {
            host: self.host.clone(),
            k: self.k,
            colours: self.palettes.iter().map(|p| p.nth(0)).collect(),
        })
    }

    pub fn to_json(&self) -> TemplateJson {
        TemplateJson {
            n: self.host.num_vertices(),
            k: self.k,
            host: self.host.kind().clone(),
            palettes: self.palettes.iter().map(|p| p.colours().collect()).collect(),
        }
    }

    pub fn from_json(j: &TemplateJson) -> Result<Self> {
        let host = Arc::new(HostGraph::build(j.host.clone())?);
        if host.num_vertices() != j.n {
            return invalid("`n` disagrees with the host");
        }
        let palettes = j
            .palettes
            .iter()
            .map(|cs| {
                if cs.iter().any(|&c| c == 0 || c > j.k) {
                    return invalid(format!("colour outside 1..={}", j.k));
                }
                Ok(Palette::from_colours(cs))
            })
            .collect::<Result<Vec<_>>>()?;
        Template::new(host, j.k, palettes)
    }
}

pub(crate) fn entropy_of(palettes: &[Palette], k: u8) -> f64 {
    if k <= 1 {
        return 0.0;
    }
    let lk = (k as f64).ln();
    palettes.iter().map(|p| (p.len() as f64).ln()).sum::<f64>() / lk
}

/// Canonical JSON form shared by templates and colourings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateJson {
    pub n: usize,
    pub k: u8,
    pub host: HostKind,
    pub palettes: Vec<Vec<Colour>>,
}

impl TemplateJson {
    pub fn to_colouring(&self) -> Result<Colouring> {
        Template::from_json(self)?
            .to_colouring()
            .ok_or_else(|| Error::InvalidArgument("colouring palettes must be singletons".into()))
    }
}

/// True iff some order-preserving injection maps `s` into `t` with
/// `s(f) ⊆ t|_A(f)` on every edge. Both must live on complete hosts.
/// Enumerates `C(n, m)` vertex sets, so it is meant for orders up to ~8.
pub fn is_subtemplate(s: &Template, t: &Template) -> Result<bool> {
    if s.k != t.k {
        return invalid("subtemplate test across different colour counts");
    }
    let (Some(m), Some(n)) = (s.host.complete_order(), t.host.complete_order()) else {
        return invalid("subtemplate test needs complete hosts");
    };
    if m > n {
        return Ok(false);
    }
    if m == n {
        return Ok(s.palettes.iter().zip(&t.palettes).all(|(a, b)| a.is_subset(*b)));
    }
    let mut found = false;
    let _ = for_each_combination(n, m, |a| {
        let cells = restriction_cells(&t.host, a).expect("valid subset");
        if cells
            .iter()
            .zip(&s.palettes)
            .all(|(&e, p)| p.is_subset(t.palettes[e]))
        {
            found = true;
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    Ok(found)
}

/// `c(e) ∈ t(e)` for every cell.
pub fn realises(c: &Colouring, t: &Template) -> Result<bool> {
    if !same_host(&c.host, &t.host) {
        return invalid("colouring and template live on different hosts");
    }
    if c.k != t.k {
        return invalid("colouring and template use different colour counts");
    }
    Ok(c.colours.iter().zip(&t.palettes).all(|(&x, p)| p.contains(x)))
}

/// Uniform realisation: each cell's colour independent and uniform on its palette.
pub fn sample_realisation(t: &Template, seed: u64) -> Colouring {
    let mut r = rng::rng(seed);
    let colours = t
        .palettes
        .iter()
        .map(|p| {
            let n = p.len() as usize;
            if n == 1 {
                p.nth(0)
            } else {
                p.nth(r.gen_range(0..n))
            }
        })
        .collect();
    Colouring { host: t.host.clone(), k: t.k, colours }
}

fn check_pair(a_host: &Arc<HostGraph>, a_k: u8, b_host: &Arc<HostGraph>, b_k: u8) -> Result<()> {
    if !same_host(a_host, b_host) {
        return invalid("edit distance across different hosts");
    }
    if a_k != b_k {
        return invalid("edit distance across different colour counts");
    }
    Ok(())
}

/// Number of cells whose palettes differ.
pub fn edit_distance(s: &Template, t: &Template) -> Result<usize> {
    check_pair(&s.host, s.k, &t.host, t.k)?;
    Ok(s.palettes.iter().zip(&t.palettes).filter(|(a, b)| a != b).count())
}

/// Number of cells where `c` leaves the template's palette.
pub fn colouring_distance(c: &Colouring, t: &Template) -> Result<usize> {
    check_pair(&c.host, c.k, &t.host, t.k)?;
    Ok(c.colours.iter().zip(&t.palettes).filter(|(&x, p)| !p.contains(x)).count())
}

/// Minimum distance from `c` to any template of the family.
pub fn colouring_family_distance(c: &Colouring, family: &[Template]) -> Result<usize> {
    if family.is_empty() {
        return invalid("distance to an empty family");
    }
    family.iter().map(|t| colouring_distance(c, t)).try_fold(usize::MAX, |m, d| Ok(m.min(d?)))
}

/// Minimum template-to-template distance over a family.
pub fn template_family_distance(s: &Template, family: &[Template]) -> Result<usize> {
    if family.is_empty() {
        return invalid("distance to an empty family");
    }
    family.iter().map(|t| edit_distance(s, t)).try_fold(usize::MAX, |m, d| Ok(m.min(d?)))
}

/// Cellwise intersection; fails on the first empty cell.
pub fn meet(t: &Template, u: &Template) -> Result<Template> {
    check_pair(&t.host, t.k, &u.host, u.k)?;
    let mut out = Vec::with_capacity(t.palettes.len());
    for (cell, (a, b)) in t.palettes.iter().zip(&u.palettes).enumerate() {
        let p = a.intersect(*b);
        if p.is_empty() {
            return Err(Error::EmptyMeet { cell });
        }
        out.push(p);
    }
    Ok(Template { host: t.host.clone(), k: t.k, palettes: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kn(n: usize) -> Arc<HostGraph> {
        Arc::new(HostGraph::complete(n))
    }

    fn pal(cs: &[u8]) -> Palette {
        Palette::from_colours(cs)
    }

    #[test]
    fn entropy_examples() {
        let t = Template::full(kn(3), 2).unwrap();
        assert!((t.entropy() - 3.0).abs() < 1e-12);
        let z = Template::constant(kn(3), 3, pal(&[2])).unwrap();
        assert_eq!(z.entropy(), 0.0);
        let h = Template::constant(kn(4), 3, pal(&[1, 2])).unwrap();
        assert!((h.entropy() - 6.0 * 2f64.ln() / 3f64.ln()).abs() < 1e-12);
        assert!((h.entropy() - 3.78558).abs() < 1e-5);
        assert_eq!(h.realisation_count(), BigUint::from(64u32));
    }

    #[test]
    fn restrict_examples() {
        let t = Template::full(kn(4), 3).unwrap();
        assert_eq!(t.restrict(&[0, 1, 2]).unwrap(), Template::full(kn(3), 3).unwrap());
        assert_eq!(t.restrict(&[0, 1, 2, 3]).unwrap(), t);
        // t(12)={1}, t(13)={1,2}, t(23)={2}; A = {1,3}
        let s = Template::new(kn(3), 2, vec![pal(&[1]), pal(&[1, 2]), pal(&[2])]).unwrap();
        let r = s.restrict(&[0, 2]).unwrap();
        assert_eq!(r.palettes(), &[pal(&[1, 2])]);
        assert!(s.restrict(&[0, 5]).is_err());
        assert!(s.restrict(&[1, 0]).is_err());
    }

    #[test]
    fn subtemplate_examples() {
        let t = Template::constant(kn(4), 3, pal(&[1, 2])).unwrap();
        assert!(is_subtemplate(&t, &t).unwrap());
        let c = sample_realisation(&t, 3);
        assert!(is_subtemplate(&c.as_template(), &t).unwrap());
        let s = Template::constant(kn(2), 3, pal(&[3])).unwrap();
        assert!(!is_subtemplate(&s, &t).unwrap());
        let other_k = Template::full(kn(2), 2).unwrap();
        assert!(is_subtemplate(&other_k, &t).is_err());
    }

    #[test]
    fn realises_examples() {
        let ones = Colouring::constant(kn(4), 3, 1).unwrap();
        assert!(realises(&ones, &Template::full(kn(4), 3).unwrap()).unwrap());
        let twos = Template::constant(kn(4), 3, pal(&[2])).unwrap();
        assert!(!realises(&ones, &twos).unwrap());
        let other = Colouring::constant(kn(3), 3, 1).unwrap();
        assert!(realises(&other, &twos).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_in_template() {
        let t = Template::new(kn(3), 3, vec![pal(&[1]), pal(&[1, 3]), pal(&[2, 3])]).unwrap();
        let a = sample_realisation(&t, 11);
        assert_eq!(a, sample_realisation(&t, 11));
        assert!(realises(&a, &t).unwrap());
        let z = Template::constant(kn(3), 3, pal(&[2])).unwrap();
        assert_eq!(sample_realisation(&z, 1), z.to_colouring().unwrap());
    }

    #[test]
    fn edit_distance_examples() {
        let t = Template::constant(kn(3), 3, pal(&[2, 3])).unwrap();
        assert_eq!(edit_distance(&t, &t).unwrap(), 0);
        let c = Colouring::constant(kn(3), 3, 1).unwrap();
        assert_eq!(colouring_distance(&c, &t).unwrap(), 3);
        let mut ps = t.palettes().to_vec();
        ps[1] = pal(&[1]);
        let u = Template::new(kn(3), 3, ps).unwrap();
        assert_eq!(edit_distance(&t, &u).unwrap(), 1);
        assert_eq!(colouring_family_distance(&c, &[t.clone(), u]).unwrap(), 2);
        assert!(colouring_family_distance(&c, &[]).is_err());
    }

    #[test]
    fn meet_examples() {
        let t = Template::constant(kn(3), 3, pal(&[1, 2])).unwrap();
        assert_eq!(meet(&t, &Template::full(kn(3), 3).unwrap()).unwrap(), t);
        let u = Template::constant(kn(3), 3, pal(&[2, 3])).unwrap();
        assert_eq!(meet(&t, &u).unwrap(), Template::constant(kn(3), 3, pal(&[2])).unwrap());
        let a = Template::constant(kn(3), 3, pal(&[1])).unwrap();
        let b = Template::constant(kn(3), 3, pal(&[2])).unwrap();
        assert_eq!(meet(&a, &b), Err(Error::EmptyMeet { cell: 0 }));
    }

    #[test]
    fn empty_palette_rejected() {
        assert!(Template::new(kn(2), 2, vec![Palette::EMPTY]).is_err());
        assert!(Template::new(kn(2), 2, vec![pal(&[3])]).is_err());
        assert!(Colouring::on_complete(2, 2, vec![0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = Template::new(kn(3), 3, vec![pal(&[1]), pal(&[1, 3]), pal(&[2, 3])]).unwrap();
        let s = serde_json::to_string(&t.to_json()).unwrap();
        assert!(s.contains("\"palettes\":[[1],[1,3],[2,3]]"));
        let back: TemplateJson = serde_json::from_str(&s).unwrap();
        assert_eq!(Template::from_json(&back).unwrap(), t);
    }

    #[test]
    fn palette_helpers() {
        let p = pal(&[1, 3, 4]);
        assert_eq!(p.len(), 3);
        assert_eq!(p.nth(1), 3);
        assert_eq!(p.max_colour(), Some(4));
        assert_eq!(p.nonempty_subsets().len(), 7);
        assert_eq!(Palette::prefix(3), pal(&[1, 2, 3]));
    }
}
