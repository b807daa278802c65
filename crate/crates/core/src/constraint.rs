//! Forbidden-pattern constraints on the cells of a host.
//!
//! A constraint system lists *scopes* (the host cells covered by one
//! embedding of a small pattern, in pattern cell order) and a set of
//! forbidden colour tuples shared by every scope. A colouring violates the
//! system when some scope reads a forbidden tuple. Everything downstream
//! (membership, speed, bad pairs, template search, containers) is phrased
//! against this one structure.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use crate::embed::{embeddings, image_cells};
use crate::error::{invalid, Error, Result};
use crate::host::HostGraph;
use crate::par;
use crate::template::{Colour, Palette};

/// Forbidden tuple codes. Dense bitsets when `k^arity` is small.
#[derive(Clone, Debug)]
enum CodeSet {
    Dense(Vec<u64>),
    Sparse(HashSet<u64>),
}

impl CodeSet {
    #[inline]
    fn contains(&self, code: u64) -> bool {
        match self {
            CodeSet::Dense(bits) => bits[(code >> 6) as usize] & (1 << (code & 63)) != 0,
            CodeSet::Sparse(set) => set.contains(&code),
        }
    }
}

const DENSE_LIMIT: u64 = 1 << 26;

#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    k: u8,
    num_cells: usize,
    arity: usize,
    scopes: Vec<u32>,
    members: Vec<Colour>,
    forbidden: CodeSet,
    completes_at: Vec<Vec<u32>>,
    powers: Vec<u64>,
}

/// Outcome of an enumeration: how many colourings passed and how many
/// partial assignments were tried.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumStats {
    pub count: u128,
    pub nodes: u64,
}

impl ConstraintSystem {
    /// Builds a system from explicit scopes. Each member is a colour tuple
    /// of length `arity`, read in scope order.
    pub fn from_scopes(
        num_cells: usize,
        k: u8,
        arity: usize,
        scopes: Vec<Vec<u32>>,
        members: &[Vec<Colour>],
    ) -> Result<Self> {
        if k == 0 {
            return invalid("colour count must be positive");
        }
        if arity == 0 && !scopes.is_empty() {
            return invalid("constraint scopes must cover at least one cell");
        }
        let mut powers = Vec::with_capacity(arity + 1);
        let mut p: u64 = 1;
        for _ in 0..=arity {
            powers.push(p);
            p = p.saturating_mul(k as u64);
        }
        let space = powers[arity];
        if space == u64::MAX {
            return invalid("k^arity overflows the code space");
        }
        let mut flat_members = Vec::with_capacity(members.len() * arity);
        let mut codes = Vec::with_capacity(members.len());
        let mut seen = HashSet::new();
        for m in members {
            if m.len() != arity {
                return invalid(format!("member of length {} in a system of arity {arity}", m.len()));
            }
            if m.iter().any(|&c| c == 0 || c > k) {
                return invalid(format!("member colour outside 1..={k}"));
            }
            let code = m.iter().zip(&powers).map(|(&c, &w)| (c as u64 - 1) * w).sum::<u64>();
            if seen.insert(code) {
                flat_members.extend_from_slice(m);
                codes.push(code);
            }
        }
        let forbidden = if space <= DENSE_LIMIT {
            let mut bits = vec![0u64; (space as usize).div_ceil(64)];
            for c in &codes {
                bits[(c >> 6) as usize] |= 1 << (c & 63);
            }
            CodeSet::Dense(bits)
        } else {
            CodeSet::Sparse(codes.into_iter().collect())
        };
        let mut completes_at = vec![Vec::new(); num_cells];
        let mut flat_scopes = Vec::with_capacity(scopes.len() * arity);
        for (i, s) in scopes.iter().enumerate() {
            if s.len() != arity {
                return invalid("scope length differs from arity");
            }
            let Some(&last) = s.iter().max() else { continue };
            if last as usize >= num_cells {
                return invalid("scope refers to a cell outside the host");
            }
            completes_at[last as usize].push(i as u32);
            flat_scopes.extend_from_slice(s);
        }
        Ok(ConstraintSystem {
            k,
            num_cells,
            arity,
            scopes: flat_scopes,
            members: flat_members,
            forbidden,
            completes_at,
            powers,
        })
    }

    /// Scopes from every embedding of `pattern` into `host`.
    pub fn on_host(pattern: &HostGraph, host: &HostGraph, k: u8, members: &[Vec<Colour>]) -> Result<Self> {
        let scopes = embeddings(pattern, host)?
            .iter()
            .map(|phi| image_cells(pattern, host, phi))
            .collect::<Result<Vec<_>>>()?;
        Self::from_scopes(host.num_cells(), k, pattern.num_cells(), scopes, members)
    }

    /// No constraints at all.
    pub fn unconstrained(num_cells: usize, k: u8) -> Self {
        Self::from_scopes(num_cells, k, 0, Vec::new(), &[]).expect("trivially valid")
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn num_scopes(&self) -> usize {
        if self.arity == 0 {
            0
        } else {
            self.scopes.len() / self.arity
        }
    }

    pub fn scope(&self, s: usize) -> &[u32] {
        &self.scopes[s * self.arity..(s + 1) * self.arity]
    }

    pub fn num_members(&self) -> usize {
        if self.arity == 0 {
            0
        } else {
            self.members.len() / self.arity
        }
    }

    pub fn member(&self, i: usize) -> &[Colour] {
        &self.members[i * self.arity..(i + 1) * self.arity]
    }

    /// Scopes whose largest cell is `cell`.
    pub fn completed_at(&self, cell: usize) -> &[u32] {
        &self.completes_at[cell]
    }

    #[inline]
    fn scope_code(&self, s: usize, colours: &[Colour]) -> u64 {
        let mut code = 0;
        for (j, &cell) in self.scope(s).iter().enumerate() {
            code += (colours[cell as usize] as u64 - 1) * self.powers[j];
        }
        code
    }

    #[inline]
    pub fn scope_violated(&self, s: usize, colours: &[Colour]) -> bool {
        self.forbidden.contains(self.scope_code(s, colours))
    }

    /// True iff no scope completed at `cell` reads a forbidden tuple.
    #[inline]
    pub fn cell_ok(&self, cell: usize, colours: &[Colour]) -> bool {
        self.completes_at[cell]
            .iter()
            .all(|&s| !self.scope_violated(s as usize, colours))
    }

    pub fn violates(&self, colours: &[Colour]) -> bool {
        (0..self.num_scopes()).any(|s| self.scope_violated(s, colours))
    }

    /// Number of violated scopes.
    pub fn violations(&self, colours: &[Colour]) -> usize {
        (0..self.num_scopes()).filter(|&s| self.scope_violated(s, colours)).count()
    }

    /// How many members of the family fit inside the scope's palettes.
    pub fn members_within(&self, s: usize, palettes: &[Palette]) -> u64 {
        let scope = self.scope(s);
        let product: u64 = scope
            .iter()
            .map(|&c| palettes[c as usize].len() as u64)
            .try_fold(1u64, |a, b| a.checked_mul(b))
            .unwrap_or(u64::MAX);
        if product <= self.num_members() as u64 {
            // walk the realisations of the scope instead of the members
            let mut count = 0;
            let mut idx = vec![0usize; scope.len()];
            let pals: Vec<Palette> = scope.iter().map(|&c| palettes[c as usize]).collect();
            let sizes: Vec<usize> = pals.iter().map(|p| p.len() as usize).collect();
            loop {
                let code: u64 = idx
                    .iter()
                    .enumerate()
                    .map(|(j, &i)| (pals[j].nth(i) as u64 - 1) * self.powers[j])
                    .sum();
                if self.forbidden.contains(code) {
                    count += 1;
                }
                let mut j = 0;
                loop {
                    if j == idx.len() {
                        return count;
                    }
                    idx[j] += 1;
                    if idx[j] < sizes[j] {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
            }
        }
        (0..self.num_members())
            .filter(|&m| {
                self.member(m)
                    .iter()
                    .zip(scope)
                    .all(|(&c, &cell)| palettes[cell as usize].contains(c))
            })
            .count() as u64
    }

    #[inline]
    pub fn scope_bad(&self, s: usize, palettes: &[Palette]) -> bool {
        let scope = self.scope(s);
        if scope.iter().all(|&c| palettes[c as usize].len() == 1) {
            let code: u64 = scope
                .iter()
                .enumerate()
                .map(|(j, &c)| (palettes[c as usize].nth(0) as u64 - 1) * self.powers[j])
                .sum();
            return self.forbidden.contains(code);
        }
        (0..self.num_members()).any(|m| {
            self.member(m)
                .iter()
                .zip(scope)
                .all(|(&c, &cell)| palettes[cell as usize].contains(c))
        })
    }

    /// True iff some member fits inside `pals`, given in scope order.
    pub fn tuple_bad(&self, pals: &[Palette]) -> bool {
        if pals.iter().all(|p| p.len() == 1) {
            let code: u64 = pals
                .iter()
                .enumerate()
                .map(|(j, p)| (p.nth(0) as u64 - 1) * self.powers[j])
                .sum();
            return self.forbidden.contains(code);
        }
        (0..self.num_members()).any(|m| self.member(m).iter().zip(pals).all(|(&c, p)| p.contains(c)))
    }

    /// Pairs (scope, member) with the member inside the template.
    pub fn bad_pairs(&self, palettes: &[Palette]) -> u64 {
        (0..self.num_scopes()).map(|s| self.members_within(s, palettes)).sum()
    }

    /// Scopes holding at least one member.
    pub fn bad_scopes(&self, palettes: &[Palette]) -> u64 {
        (0..self.num_scopes()).filter(|&s| self.scope_bad(s, palettes)).count() as u64
    }

    /// Every realisation of the palettes avoids the family.
    pub fn admits(&self, palettes: &[Palette]) -> bool {
        (0..self.num_scopes()).all(|s| !self.scope_bad(s, palettes))
    }

    /// Splits the search at a prefix depth giving enough subtrees to share out.
    fn split_depth(&self) -> usize {
        let mut d = 0;
        let mut width: u64 = 1;
        while d < self.num_cells && width < 512 {
            width *= self.k as u64;
            d += 1;
        }
        d
    }

    /// Enumerates valid colourings of the first `depth` cells.
    fn prefixes(&self, depth: usize, walk: &Walk) -> Vec<Vec<Colour>> {
        let mut out = Vec::new();
        let mut colours = vec![1 as Colour; self.num_cells];
        let mut local = 0;
        self.dfs(0, depth, &mut colours, walk, &mut local, &mut |c: &[Colour]| {
            out.push(c[..depth].to_vec())
        });
        walk.flush(&mut local);
        out
    }

    /// Depth-first extension from `cell` to `end`, checking scopes as they close.
    fn dfs<F: FnMut(&[Colour])>(
        &self,
        cell: usize,
        end: usize,
        colours: &mut [Colour],
        walk: &Walk,
        local: &mut u64,
        f: &mut F,
    ) -> bool {
        if cell == end {
            f(colours);
            return true;
        }
        for c in 1..=self.k {
            *local += 1;
            if *local >= walk.chunk && !walk.flush(local) {
                return false;
            }
            colours[cell] = c;
            if self.cell_ok(cell, colours) && !self.dfs(cell + 1, end, colours, walk, local, f) {
                return false;
            }
        }
        true
    }

    /// Folds `step` over every colouring avoiding the family, with subtrees
    /// shared across workers and partial results reduced in prefix order.
    pub fn fold<T, I, S, R>(&self, budget: Option<u64>, identity: I, step: S, reduce: R) -> Result<(T, EnumStats)>
    where
        T: Send,
        I: Fn() -> T + Sync + Send,
        S: Fn(&mut T, &[Colour]) + Sync + Send,
        R: Fn(T, T) -> T + Sync + Send,
    {
        let walk = Walk::new(budget);
        let depth = self.split_depth();
        let prefixes = self.prefixes(depth, &walk);
        let parts: Vec<(T, u128)> = par::map_slice(&prefixes, |prefix| {
            let mut acc = identity();
            let mut count = 0u128;
            if walk.aborted.load(Ordering::Relaxed) {
                return (acc, count);
            }
            let mut colours = vec![1 as Colour; self.num_cells];
            colours[..depth].copy_from_slice(prefix);
            let mut local = 0;
            self.dfs(depth, self.num_cells, &mut colours, &walk, &mut local, &mut |c: &[Colour]| {
                count += 1;
                step(&mut acc, c)
            });
            walk.flush(&mut local);
            (acc, count)
        });
        let mut total = 0u128;
        let mut acc = identity();
        for (t, c) in parts {
            total += c;
            acc = reduce(acc, t);
        }
        let nodes = walk.nodes.load(Ordering::SeqCst);
        if walk.aborted.load(Ordering::SeqCst) {
            return Err(Error::ResourceLimit { explored: nodes, partial: total });
        }
        Ok((acc, EnumStats { count: total, nodes }))
    }

    /// Counts colourings avoiding the family.
    pub fn count(&self, budget: Option<u64>) -> Result<EnumStats> {
        self.fold(budget, || (), |_, _| (), |_, _| ()).map(|(_, s)| s)
    }

    /// Visits every colouring avoiding the family in lexicographic order,
    /// on the calling thread.
    pub fn for_each<F: FnMut(&[Colour])>(&self, budget: Option<u64>, mut f: F) -> Result<EnumStats> {
        let walk = Walk::new(budget);
        let mut colours = vec![1 as Colour; self.num_cells];
        let mut local = 0;
        let mut count = 0u128;
        self.dfs(0, self.num_cells, &mut colours, &walk, &mut local, &mut |c: &[Colour]| {
            count += 1;
            f(c)
        });
        walk.flush(&mut local);
        let nodes = walk.nodes.load(Ordering::SeqCst);
        if walk.aborted.load(Ordering::SeqCst) {
            return Err(Error::ResourceLimit { explored: nodes, partial: count });
        }
        Ok(EnumStats { count, nodes })
    }

    /// Collects every colouring avoiding the family.
    pub fn collect(&self, budget: Option<u64>) -> Result<Vec<Vec<Colour>>> {
        let (v, _) = self.fold(
            budget,
            Vec::new,
            |acc: &mut Vec<Vec<Colour>>, c| acc.push(c.to_vec()),
            |mut a, b| {
                a.extend(b);
                a
            },
        )?;
        Ok(v)
    }
}

/// Shared node budget.
struct Walk {
    nodes: AtomicU64,
    budget: u64,
    aborted: AtomicBool,
    /// Local nodes between flushes; small budgets flush more often.
    chunk: u64,
}

impl Walk {
    fn new(budget: Option<u64>) -> Self {
        let budget = budget.unwrap_or(u64::MAX);
        Walk { nodes: AtomicU64::new(0), budget, aborted: AtomicBool::new(false), chunk: (budget / 64).clamp(1, 1024) }
    }

    /// Moves local node counts into the shared total. False once the budget
    /// is gone.
    fn flush(&self, local: &mut u64) -> bool {
        let total = self.nodes.fetch_add(*local, Ordering::Relaxed).saturating_add(*local);
        *local = 0;
        if total > self.budget {
            self.aborted.store(true, Ordering::Relaxed);
        }
        !self.aborted.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::host::HostGraph;

    fn rainbow() -> Vec<Vec<Colour>> {
        let mut v = Vec::new();
        for a in 1..=3u8 {
            for b in 1..=3u8 {
                for c in 1..=3u8 {
                    if a != b && b != c && a != c {
                        v.push(vec![a, b, c]);
                    }
                }
            }
        }
        v
    }

    fn brute_count(sys: &ConstraintSystem) -> u128 {
        let m = sys.num_cells();
        let k = sys.k() as u64;
        let mut n = 0;
        let mut colours = vec![1u8; m];
        for x in 0..k.pow(m as u32) {
            let mut y = x;
            for c in colours.iter_mut() {
                *c = (y % k) as u8 + 1;
                y /= k;
            }
            if !sys.violates(&colours) {
                n += 1;
            }
        }
        n
    }

    #[test]
    fn rainbow_counts_match_brute_force() {
        for n in 3..=4 {
            let sys = ConstraintSystem::on_host(&HostGraph::complete(3), &HostGraph::complete(n), 3, &rainbow())
                .unwrap();
            assert_eq!(sys.count(None).unwrap().count, brute_count(&sys));
        }
        let sys =
            ConstraintSystem::on_host(&HostGraph::complete(3), &HostGraph::complete(3), 3, &rainbow()).unwrap();
        assert_eq!(sys.count(None).unwrap().count, 21);
    }

    #[test]
    fn fold_and_for_each_agree() {
        let sys =
            ConstraintSystem::on_host(&HostGraph::complete(3), &HostGraph::complete(4), 3, &rainbow()).unwrap();
        let mut seq = Vec::new();
        let stats = sys.for_each(None, |c| seq.push(c.to_vec())).unwrap();
        let par = sys.collect(None).unwrap();
        assert_eq!(seq, par);
        assert_eq!(stats.count as usize, seq.len());
        assert_eq!(sys.count(None).unwrap().nodes, stats.nodes);
    }

    #[test]
    fn budget_is_enforced() {
        let sys =
            ConstraintSystem::on_host(&HostGraph::complete(3), &HostGraph::complete(5), 3, &rainbow()).unwrap();
        match sys.count(Some(100)) {
            Err(Error::ResourceLimit { explored, .. }) => assert!(explored > 100),
            other => panic!("expected a resource limit, got {other:?}"),
        }
    }

    #[test]
    fn bad_pairs_on_full_template() {
        let sys =
            ConstraintSystem::on_host(&HostGraph::complete(3), &HostGraph::complete(4), 3, &rainbow()).unwrap();
        let full = vec![Palette::full(3); 6];
        assert_eq!(sys.bad_pairs(&full), 24);
        assert_eq!(sys.bad_scopes(&full), 4);
        assert!(!sys.admits(&full));
        let pair = vec![Palette::from_colours(&[1, 2]); 6];
        assert_eq!(sys.bad_pairs(&pair), 0);
        assert!(sys.admits(&pair));
    }

    #[test]
    fn members_within_both_paths_agree() {
        let sys =
            ConstraintSystem::on_host(&HostGraph::complete(3), &HostGraph::complete(3), 3, &rainbow()).unwrap();
        for a in 1..8u64 {
            for b in 1..8u64 {
                for c in 1..8u64 {
                    let p = [Palette::from_mask(a), Palette::from_mask(b), Palette::from_mask(c)];
                    let direct = rainbow()
                        .iter()
                        .filter(|m| m.iter().zip(&p).all(|(&x, q)| q.contains(x)))
                        .count() as u64;
                    assert_eq!(sys.members_within(0, &p), direct);
                    assert_eq!(sys.scope_bad(0, &p), direct > 0);
                }
            }
        }
    }

    #[test]
    fn unconstrained_counts_everything() {
        let sys = ConstraintSystem::unconstrained(4, 3);
        assert_eq!(sys.count(None).unwrap().count, 81);
    }
}
