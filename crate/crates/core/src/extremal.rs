//! Extremal entropy by exact branch-and-bound, plus the experiments built on it.
//!
//! The search maximises the exact realisation count `prod_e |t(e)|` rather
//! than a floating entropy, so optimality and tie handling are decided in
//! integers. Options per cell are palettes ordered by descending size and
//! then ascending bitmask; the first optimum met in that order is returned.
//!
//! Two reductions are applied when a property declares them:
//! * monotone in colour `i`: only palettes containing `i` are tried, since
//!   adding `i` to a palette keeps every realisation inside the property;
//! * down-closed (lowering a colour stays inside): only initial segments of
//!   the allowed palette are tried, since the `j`-th smallest colour of any
//!   palette dominates the `j`-th colour of the segment.

use std::ops::RangeInclusive;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintSystem;
use crate::error::{invalid, Error, Result};
use crate::host::HostGraph;
use crate::par;
use crate::properties::Property;
use crate::rng;
use crate::search::{self, Objective, Opt, Spec};
use crate::template::{colouring_family_distance, entropy_of, Colour, Colouring, Palette, Template};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimality {
    Proved,
    LowerBoundOnly,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SearchOptions {
    /// Node budget; `None` searches to completion.
    pub budget: Option<u64>,
    /// Split subtrees across worker threads. Single-threaded runs give
    /// reproducible witnesses and node counts.
    pub parallel: bool,
}

impl SearchOptions {
    pub fn budget(nodes: u64) -> Self {
        SearchOptions { budget: Some(nodes), parallel: false }
    }
}

#[derive(Clone, Debug)]
pub struct ExtremalResult {
    pub value: f64,
    pub witness: Template,
    /// `prod_e |t(e)|` of the witness.
    pub realisations: u128,
    pub nodes: u64,
    pub optimality: Optimality,
}

impl ExtremalResult {
    pub fn proved(&self) -> bool {
        self.optimality == Optimality::Proved
    }
}

fn sorted(mut v: Vec<Palette>) -> Vec<Palette> {
    v.sort_by(|a, b| b.len().cmp(&a.len()).then(a.mask().cmp(&b.mask())));
    v
}

/// Palettes the search may give a cell whose allowed colours are `within`.
pub fn palette_options(p: &Property, within: Palette) -> Vec<Palette> {
    if p.is_down_monotone() {
        let colours: Vec<Colour> = within.colours().collect();
        return sorted((1..=colours.len()).map(|j| Palette::from_colours(&colours[..j])).collect());
    }
    let all = within.nonempty_subsets();
    let mono = p.monotone_colours().intersect(within);
    if let Some(i) = mono.colours().next() {
        return sorted(all.into_iter().filter(|q| q.contains(i)).collect());
    }
    sorted(all)
}

fn entropy_spec<'a>(sys: &'a ConstraintSystem, p: &Property, within: &[Palette], opts: SearchOptions, keep_ties: bool) -> Spec<'a> {
    Spec {
        sys,
        options: within
            .iter()
            .map(|&w| {
                palette_options(p, w)
                    .into_iter()
                    .map(|pal| Opt { pal, value: pal.len() as u128 })
                    .collect()
            })
            .collect(),
        objective: Objective::Product,
        budget: opts.budget,
        parallel: opts.parallel,
        keep_ties,
    }
}

struct Solved {
    result: ExtremalResult,
    ties: Vec<Template>,
    ties_truncated: bool,
}

fn solve(p: &Property, host: Arc<HostGraph>, within: Vec<Palette>, opts: SearchOptions, keep_ties: bool) -> Result<Solved> {
    let k = p.k();
    let sys = p.constraints(&host)?;
    let spec = entropy_spec(&sys, p, &within, opts, keep_ties);
    let out = search::search(&spec);
    let optimality = if out.complete { Optimality::Proved } else { Optimality::LowerBoundOnly };
    let Some(best) = out.best else {
        if out.complete {
            return Err(Error::Infeasible("no template inside the allowed palettes avoids the property".into()));
        }
        // nothing found within budget: fall back to a constant singleton template
        for c in Palette::from_mask(within.iter().fold(u64::MAX, |m, w| m & w.mask())).colours() {
            let pals = vec![Palette::singleton(c); within.len()];
            if sys.admits(&pals) {
                let witness = Template::new(host.clone(), k, pals)?;
                return Ok(Solved {
                    result: ExtremalResult { value: 0.0, witness, realisations: 1, nodes: out.nodes, optimality },
                    ties: Vec::new(),
                    ties_truncated: false,
                });
            }
        }
        return Err(Error::ResourceLimit { explored: out.nodes, partial: 0 });
    };
    let mut templates = out
        .witnesses
        .into_iter()
        .map(|w| Template::new(host.clone(), k, w))
        .collect::<Result<Vec<_>>>()?;
    let witness = templates[0].clone();
    if !keep_ties {
        templates.clear();
    }
    Ok(Solved {
        result: ExtremalResult {
            value: entropy_of(witness.palettes(), k),
            witness,
            realisations: best,
            nodes: out.nodes,
            optimality,
        },
        ties: templates,
        ties_truncated: out.ties_truncated,
    })
}

/// `ex(n, P)` on `K_n`.
pub fn extremal_entropy(p: &Property, n: usize, opts: SearchOptions) -> Result<ExtremalResult> {
    extremal_on_host(p, Arc::new(HostGraph::complete(n)), opts)
}

/// `ex(G, P)` on an arbitrary host of the property's family.
pub fn extremal_on_host(p: &Property, host: Arc<HostGraph>, opts: SearchOptions) -> Result<ExtremalResult> {
    let within = vec![Palette::full(p.k()); host.num_cells()];
    solve(p, host, within, opts, false).map(|s| s.result)
}

/// All maximum-entropy templates on `K_n` (reduced by the property's
/// monotonicity flags). The flag reports whether the list was capped.
pub fn extremal_optima(p: &Property, n: usize, opts: SearchOptions) -> Result<(ExtremalResult, Vec<Template>, bool)> {
    let host = Arc::new(HostGraph::complete(n));
    let within = vec![Palette::full(p.k()); host.num_cells()];
    let s = solve(p, host, within, opts, true)?;
    Ok((s.result, s.ties, s.ties_truncated))
}

/// `ex(T, P)`: the best subtemplate of `t` inside the property.
pub fn relative_extremal_entropy(t: &Template, p: &Property, opts: SearchOptions) -> Result<ExtremalResult> {
    if t.k() != p.k() {
        return invalid("template and property use different colour counts");
    }
    solve(p, t.host().clone(), t.palettes().to_vec(), opts, false).map(|s| s.result)
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityTerm {
    pub n: usize,
    pub ex: f64,
    pub density: f64,
    pub nodes: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DensitySequence {
    pub terms: Vec<DensityTerm>,
    pub nonincreasing: bool,
    /// First order whose term could not be proved optimal; the sequence
    /// stops before it.
    pub truncated_at: Option<usize>,
}

/// `ex(n, P) / C(n, 2)` over a range of orders, with a monotonicity check.
pub fn entropy_density_sequence(p: &Property, ns: RangeInclusive<usize>, opts: SearchOptions) -> Result<DensitySequence> {
    let mut terms: Vec<DensityTerm> = Vec::new();
    let mut truncated_at = None;
    for n in ns {
        if n < 2 {
            continue;
        }
        let r = match extremal_entropy(p, n, opts) {
            Ok(r) if r.proved() => r,
            Ok(_) | Err(Error::ResourceLimit { .. }) => {
                truncated_at = Some(n);
                break;
            }
            Err(e) => return Err(e),
        };
        let pairs = (n * (n - 1) / 2) as f64;
        terms.push(DensityTerm { n, ex: r.value, density: r.value / pairs, nodes: r.nodes });
    }
    let nonincreasing = terms.windows(2).all(|w| w[1].density <= w[0].density + 1e-12);
    Ok(DensitySequence { terms, nonincreasing, truncated_at })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RandomTemplateSpec {
    pub n: usize,
    pub k: u8,
    pub p: f64,
    pub base_colour: Colour,
    pub seed: u64,
}

/// `T_{n,p}(i)`: each edge independently gets `[k]` with probability `p`,
/// otherwise `{i}`.
pub fn random_template(spec: &RandomTemplateSpec) -> Result<Template> {
    if !(0.0..=1.0).contains(&spec.p) {
        return invalid("p must lie in [0, 1]");
    }
    if spec.base_colour == 0 || spec.base_colour > spec.k {
        return invalid("base colour outside 1..=k");
    }
    let host = Arc::new(HostGraph::complete(spec.n));
    let mut r = rng::rng(spec.seed);
    let pals = (0..host.num_cells())
        .map(|_| {
            if r.gen_bool(spec.p) {
                Palette::full(spec.k)
            } else {
                Palette::singleton(spec.base_colour)
            }
        })
        .collect();
    Template::new(host, spec.k, pals)
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferenceTrial {
    pub seed: u64,
    pub template_entropy: f64,
    pub ex: f64,
    pub ratio: Option<f64>,
    pub nodes: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferenceStats {
    pub n: usize,
    pub p: f64,
    pub ex_full: f64,
    pub trials: Vec<TransferenceTrial>,
    pub discarded: usize,
    pub mean_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    /// Trials with `ex(T,P) > Ent(T)`; always 0 unless something is broken.
    pub dominance_violations: usize,
    /// Fraction of ratios inside `[1 - eps n^2/ex, 1 + 2 eps n^2/ex]`.
    pub inside_fraction: Option<f64>,
}

/// Relative extremal entropy of `trials` independent `T_{n,p}(i)`.
pub fn transference_experiment(
    p: &Property,
    n: usize,
    prob: f64,
    base_colour: Colour,
    trials: usize,
    seed: u64,
    eps: f64,
    opts: SearchOptions,
) -> Result<TransferenceStats> {
    if !p.is_monotone_in(base_colour) {
        return invalid(format!("property is not monotone in colour {base_colour}"));
    }
    let full = extremal_entropy(p, n, opts)?;
    if !full.proved() {
        return Err(Error::ResourceLimit { explored: full.nodes, partial: 0 });
    }
    let inner = SearchOptions { parallel: false, ..opts };
    let run = |t: usize| -> Result<Option<TransferenceTrial>> {
        let s = rng::derive(seed, t as u64);
        let tpl = random_template(&RandomTemplateSpec { n, k: p.k(), p: prob, base_colour, seed: s })?;
        let r = relative_extremal_entropy(&tpl, p, inner)?;
        if !r.proved() {
            return Ok(None);
        }
        let denom = prob * full.value;
        Ok(Some(TransferenceTrial {
            seed: s,
            template_entropy: tpl.entropy(),
            ex: r.value,
            ratio: (denom > 0.0).then(|| r.value / denom),
            nodes: r.nodes,
        }))
    };
    let results: Vec<Result<Option<TransferenceTrial>>> = if opts.parallel {
        par::map_indices(trials, run)
    } else {
        (0..trials).map(run).collect()
    };
    let mut kept = Vec::new();
    let mut discarded = 0;
    for r in results {
        match r? {
            Some(t) => kept.push(t),
            None => discarded += 1,
        }
    }
    let ratios: Vec<f64> = kept.iter().filter_map(|t| t.ratio).collect();
    let stat = |f: fn(f64, f64) -> f64| ratios.iter().copied().reduce(f);
    let pairs = (n * n) as f64;
    let (lo, hi) = if full.value > 0.0 {
        (1.0 - eps * pairs / full.value, 1.0 + 2.0 * eps * pairs / full.value)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    };
    Ok(TransferenceStats {
        n,
        p: prob,
        ex_full: full.value,
        dominance_violations: kept.iter().filter(|t| t.ex > t.template_entropy + 1e-9).count(),
        mean_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        min_ratio: stat(f64::min),
        max_ratio: stat(f64::max),
        inside_fraction: (!ratios.is_empty())
            .then(|| ratios.iter().filter(|&&r| r >= lo && r <= hi).count() as f64 / ratios.len() as f64),
        trials: kept,
        discarded,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMethod {
    Enumeration,
    Rejection,
}

#[derive(Clone, Debug, Serialize)]
pub struct TypicalStats {
    pub method: SamplingMethod,
    /// `|P_n|` when enumerated.
    pub population: Option<u128>,
    pub distances: Vec<usize>,
    pub median: f64,
    pub mean: f64,
    /// `(d, fraction of samples at distance <= d)`.
    pub cdf: Vec<(usize, f64)>,
}

impl TypicalStats {
    pub fn fraction_above(&self, threshold: f64) -> f64 {
        if self.distances.is_empty() {
            return 0.0;
        }
        self.distances.iter().filter(|&&d| d as f64 > threshold).count() as f64 / self.distances.len() as f64
    }
}

const ENUMERATION_LIMIT: f64 = 2e7;
const MIN_ACCEPTANCE: f64 = 1e-4;

/// Edit distance from uniform members of `P_n` to the nearest template of `family`.
pub fn typical_structure_experiment(
    p: &Property,
    n: usize,
    family: &[Template],
    samples: usize,
    seed: u64,
) -> Result<TypicalStats> {
    if family.is_empty() {
        return invalid("template family must be nonempty");
    }
    let host = Arc::new(HostGraph::complete(n));
    if family.iter().any(|t| **t.host() != *host || t.k() != p.k()) {
        return invalid("family templates must live on K_n with the property's colour count");
    }
    let sys = p.constraints(&host)?;
    let cells = host.num_cells();
    let k = p.k();
    let mut r = rng::rng(seed);
    let space = (k as f64).powi(cells as i32);
    let (method, population, colourings) = if space <= ENUMERATION_LIMIT {
        let all = sys.collect(None)?;
        if all.is_empty() {
            return Err(Error::Infeasible("the property is empty at this order".into()));
        }
        let picks = (0..samples).map(|_| all[r.gen_range(0..all.len())].clone()).collect::<Vec<_>>();
        (SamplingMethod::Enumeration, Some(all.len() as u128), picks)
    } else {
        let mut out = Vec::with_capacity(samples);
        let mut draws = 0u64;
        let mut colours = vec![1 as Colour; cells];
        while out.len() < samples {
            for c in colours.iter_mut() {
                *c = r.gen_range(1..=k);
            }
            draws += 1;
            if !sys.violates(&colours) {
                out.push(colours.clone());
            }
            if draws >= 100_000 && (out.len() as f64) < MIN_ACCEPTANCE * draws as f64 {
                return Err(Error::ResourceLimit { explored: draws, partial: out.len() as u128 });
            }
        }
        (SamplingMethod::Rejection, None, out)
    };
    let mut distances = colourings
        .into_iter()
        .map(|c| colouring_family_distance(&Colouring::new(host.clone(), k, c)?, family))
        .collect::<Result<Vec<_>>>()?;
    distances.sort_unstable();
    let len = distances.len().max(1) as f64;
    let median = match distances.len() {
        0 => 0.0,
        l if l % 2 == 1 => distances[l / 2] as f64,
        l => (distances[l / 2 - 1] + distances[l / 2]) as f64 / 2.0,
    };
    let mean = distances.iter().sum::<usize>() as f64 / len;
    let mut cdf = Vec::new();
    for (i, &d) in distances.iter().enumerate() {
        if i + 1 == distances.len() || distances[i + 1] != d {
            cdf.push((d, (i + 1) as f64 / len));
        }
    }
    Ok(TypicalStats { method, population, distances, median, mean, cdf })
}

/// Templates with one fixed pair of colours on every edge of `K_n`.
pub fn constant_pair_templates(n: usize, k: u8) -> Vec<Template> {
    let host = Arc::new(HostGraph::complete(n));
    let mut out = Vec::new();
    for a in 1..=k {
        for b in a + 1..=k {
            out.push(Template::constant(host.clone(), k, Palette::from_colours(&[a, b])).expect("valid"));
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct WeightResult {
    pub weight: u128,
    pub colouring: Colouring,
    pub nodes: u64,
    pub proved: bool,
}

/// Colouring of `K_n` inside the property maximising `sum_e weight(c(e))`.
pub fn max_weight_colouring<W>(p: &Property, n: usize, weight: W, opts: SearchOptions) -> Result<WeightResult>
where
    W: Fn(Colour) -> u64,
{
    let host = Arc::new(HostGraph::complete(n));
    let sys = p.constraints(&host)?;
    let mut opts_cell: Vec<Opt> = (1..=p.k())
        .map(|c| Opt { pal: Palette::singleton(c), value: weight(c) as u128 })
        .collect();
    opts_cell.sort_by(|a, b| b.value.cmp(&a.value).then(a.pal.mask().cmp(&b.pal.mask())));
    let spec = Spec {
        sys: &sys,
        options: vec![opts_cell; host.num_cells()],
        objective: Objective::Sum,
        budget: opts.budget,
        parallel: opts.parallel,
        keep_ties: false,
    };
    let out = search::search(&spec);
    let (Some(best), Some(w)) = (out.best, out.witnesses.first()) else {
        return Err(if out.complete {
            Error::Infeasible("the property is empty at this order".into())
        } else {
            Error::ResourceLimit { explored: out.nodes, partial: 0 }
        });
    };
    let colouring = Colouring::new(host, p.k(), w.iter().map(|pal| pal.nth(0)).collect())?;
    Ok(WeightResult { weight: best, colouring, nodes: out.nodes, proved: out.complete })
}
