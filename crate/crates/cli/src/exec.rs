//! Dispatch from a validated spec to the library.

use std::path::Path;
use std::sync::Arc;

use chroma_core::containers::{container_pipeline, CoverageMode, PipelineOptions};
use chroma_core::extremal::{
    constant_pair_templates, transference_experiment, typical_structure_experiment, SearchOptions,
};
use chroma_core::graphon::{
    conditional_entropy_sample, cut_distance, delta_cut_upper, entropy_graphon, hom_density, neighborhood_count,
    sample, weak_regularity, Metric, NeighborhoodMetric, SampleMode, StepGraphon, StepGraphonJson,
};
use chroma_core::host::binomial;
use chroma_core::hostgraphs::{extremal_entropy_host, goodness_diagnostic};
use chroma_core::properties::{bad_pairs, lookup, speed_on, Property};
use chroma_core::template::TemplateJson;
use chroma_core::{Error, HostFamily, HostGraph, Template};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::spec::{ExperimentSpec, SpecError};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("spec error: {0}")]
    Spec(#[from] SpecError),
    #[error("{0}")]
    Core(Error),
    #[error("{0}")]
    Io(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => RunError::Spec(SpecError { line: None, field: None, message: m }),
            Error::UnknownId(id) => RunError::Spec(SpecError { line: None, field: None, message: format!("unknown id `{id}`") }),
            other => RunError::Core(other),
        }
    }
}

/// One reported number with its tolerance and the oracle that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub quantity: String,
    pub value: Value,
    pub tolerance: f64,
    pub oracle: String,
    pub nodes: Option<u64>,
}

impl Row {
    fn new(n: Option<usize>, quantity: &str, value: Value, tolerance: f64, oracle: &str) -> Self {
        Row { n, seed: None, quantity: quantity.to_string(), value, tolerance, oracle: oracle.to_string(), nodes: None }
    }

    fn nodes(mut self, nodes: u64) -> Self {
        self.nodes = Some(nodes);
        self
    }

    fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn as_f64(&self) -> Option<f64> {
        match &self.value {
            Value::Number(x) => x.as_f64(),
            Value::Bool(b) => Some(*b as u8 as f64),
            Value::String(s) => s.parse().ok(),
            _ => None,
        }
    }
}

/// What a command produced: flat rows for reports and CSV, plus the native
/// JSON payload printed by the direct subcommands.
#[derive(Debug, Default)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub detail: Value,
    /// A budget ran out; rows hold what was computed before the cut-off.
    pub partial: bool,
}

/// Integers that overflow `u64` are written as strings.
pub fn count_value(x: u128) -> Value {
    u64::try_from(x).map(Value::from).unwrap_or_else(|_| Value::String(x.to_string()))
}

fn num(x: f64) -> Value {
    json!(x)
}

const EXACT: f64 = 1e-9;

fn property(spec: &ExperimentSpec) -> Result<Property, RunError> {
    let id = spec.property.as_deref().ok_or_else(|| SpecError::field("property", "property required"))?;
    lookup(id).map_err(|_| SpecError::field("property", format!("unknown property id `{id}`")).into())
}

fn host_for(p: &Property, n: usize) -> Result<Arc<HostGraph>, RunError> {
    Ok(Arc::new(HostGraph::build(p.host_family().at(n))?))
}

pub fn load_graphon(path: &Path) -> Result<StepGraphon, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Io(format!("cannot read {}: {e}", path.display())))?;
    let j: StepGraphonJson =
        serde_json::from_str(&text).map_err(|e| RunError::Io(format!("{}: malformed graphon: {e}", path.display())))?;
    Ok(StepGraphon::from_json(&j)?)
}

pub fn exec(spec: &ExperimentSpec) -> Result<Outcome, RunError> {
    match spec.command.as_str() {
        "extremal" => extremal(spec),
        "speed" => speed(spec),
        "badpairs" => badpairs(spec),
        "containers" => containers(spec),
        "transfer" => transfer(spec),
        "typical" => typical(spec),
        "goodness" => goodness(spec),
        "graphon-cutdist" => graphon_cutdist(spec),
        "graphon-entropy" => graphon_entropy(spec),
        "graphon-weakreg" => graphon_weakreg(spec),
        "graphon-sample" => graphon_sample(spec),
        "graphon-homdensity" => graphon_homdensity(spec),
        "graphon-count" => graphon_count(spec),
        other => Err(SpecError::field("command", format!("unknown command `{other}`")).into()),
    }
}

fn single_or_list(mut items: Vec<Value>) -> Value {
    if items.len() == 1 {
        items.pop().unwrap()
    } else {
        Value::Array(items)
    }
}

fn extremal(spec: &ExperimentSpec) -> Result<Outcome, RunError> {
    let p = property(spec)?;
    let opts = SearchOptions { budget: spec.budget, parallel: spec.parallel };
    let mut out = Outcome::default();
    let mut details = Vec::new();
    for n in spec.orders()? {
        let host = host_for(&p, n)?;
        let oracle = if p.host_family() == HostFamily::Path { "path-dp" } else { "branch-and-bound" };
        let r = extremal_entropy_host(&p, host.clone(), opts)?;
        let proved = r.proved();
        let tag = if proved { oracle.to_string() } else { format!("{oracle} (lower bound only)") };
        out.rows.push(Row::new(Some(n), "ex", num(r.value), EXACT, &tag).nodes(r.nodes));
        out.rows.push(Row::new(Some(n), "density", num(r.value / host.num_cells() as f64), EXACT, &tag).nodes(r.nodes));
        out.rows.push(Row::new(Some(n), "proved", Value::Bool(proved), 0.0, oracle).nodes(r.nodes));
        details.push(json!({
            "n": n,
            "value": r.value,
            "witness": r.witness.to_json(),
            "nodes": r.nodes,
            "proved": proved,
            "optimality": if proved { "proved" } else { "lower-bound-only" },
        }));
        out.partial |= !proved;
    }
    out.detail = single_or_list(details);
    Ok(out)
}

fn speed(spec: &ExperimentSpec) -> Result<Outcome, RunError> {
    let p = property(spec)?;
    let mut out = Outcome::default();
    let mut details = Vec::new();
    for n in spec.orders()? {
        let host = host_for(&p, n)?;
        match speed_on(&p, &host, spec.budget) {
            Ok(s) => {
                out.rows.push(Row::new(Some(n), "speed", count_value(s.count), 0.0, "enumeration").nodes(s.nodes));
                details.push(json!({"n": n, "count": count_value(s.count), "nodes": s.nodes, "complete": true}));
            }
            Err(Error::ResourceLimit { explored, partial }) => {
                out.rows.push(
                    Row::new(Some(n), "speed-partial", count_value(partial), 0.0, "enumeration (truncated)").nodes(explored),
                );
                details.push(json!({"n": n, "count": count_value(partial), "nodes": explored, "complete": false}));
                out.partial = true;
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    out.detail = single_or_list(details);
    Ok(out)
}

fn badpairs(spec: &ExperimentSpec) -> Result<Outcome, RunError> {
    let p = property(spec)?;
    let path = spec.path_param("template")?;
    let text = std::fs::read_to_string(&path).map_err(|e| RunError::Io(format!("cannot read {}: {e}", path.display())))?;
    let tj: TemplateJson =
        serde_json::from_str(&text).map_err(|e| RunError::Io(format!("{}: malformed template: {e}", path.display())))?;
    let t = Template::from_json(&tj)?;
    let order = t.host().complete_order().unwrap_or(t.order());
    let fam = p
        .forbidden_at(order)?
        .ok_or_else(|| SpecError::field("property", "property has no forbidden family at this order"))?;
    let b = bad_pairs(&t, &fam)?;
    let n = Some(t.order());
    let mut out = Outcome::default();
    out.rows.push(Row::new(n, "bad-pairs", Value::from(b), 0.0, "constraint check"));
    out.rows.push(Row::new(n, "entropy", num(t.entropy()), EXACT, "closed form"));
    out.detail = json!({"bad_pairs": b, "entropy": t.entropy(), "n": t.order()});
    Ok(out)
}

fn containers(spec: &ExperimentSpec) -> Result<Outcome, RunError> {
    let p = property(spec)?;
    let f = p
        .forbidden_at(p.defining_order())?
        .ok_or_else(|| SpecError::field("property", "container pipeline needs a forbidden family"))?;
    let samples = spec.u64_param("samples")?;
    let defaults = PipelineOptions::default();
    let mut out = Outcome::default();
    let mut details = Vec::new();
    for n in spec.orders()? {
        let opts = PipelineOptions {
            eps: spec.f64_param("eps")?.unwrap_or(defaults.eps),
            eps1: spec.f64_param("eps1")?,
            delta: spec.f64_param("delta")?,
            sparsify: spec.bool_param("sparsify")?.unwrap_or(true),
            p: spec.f64_param("p")?,
            transversal: spec.bool_param("transversal")?.unwrap_or(true),
            seed: spec.seed,
            budget: spec.budget,
            coverage: Some(match samples {
                Some(s) => CoverageMode::Sampled { samples: s, seed: spec.seed },
                None => CoverageMode::Exact { budget: spec.budget },
            }),
            ex: None,
        };
        let host = host_for(&p, n)?;
        let (family, rep) = match container_pipeline(&f, host, opts) {
            Ok(r) => r,
            Err(Error::ResourceLimit { explored, .. }) => {
                out.rows.push(Row::new(Some(n), "nodes-before-limit", Value::from(explored), 0.0, "container pipeline"));
                out.partial = true;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let sn = Some(n);
        out.rows.push(Row::new(sn, "family-size", Value::from(family.len()), 0.0, "container pipeline").nodes(rep.nodes));
        out.rows.push(Row::new(sn, "max-entropy", num(rep.max_entropy), EXACT, "container pipeline"));
        let max_bad = rep.bad_counts.iter().copied().max().unwrap_or(0);
        out.rows.push(Row::new(sn, "max-bad", Value::from(max_bad), 0.0, "constraint check"));
        out.rows.push(Row::new(sn, "bad-threshold", num(rep.bad_threshold), EXACT, "closed form"));
        out.rows.push(Row::new(sn, "threshold-held", Value::Bool(rep.threshold_held), 0.0, "postcondition check"));
        if let Some(c) = &rep.coverage {
            let (tol, oracle) = match c {
                chroma_core::containers::Coverage::Exact { .. } => (0.0, "enumeration"),
                chroma_core::containers::Coverage::Sampled { low, high, .. } => ((high - low) / 2.0, "monte carlo (wilson 95%)"),
            };
            out.rows.push(Row::new(sn, "coverage", num(c.fraction()), tol, oracle));
        }
        details.push(serde_json::to_value(&rep).map_err(|e| RunError::Io(e.to_string()))?);
    }
    out.detail = single_or_list(details);
    Ok(out)
}

fn transfer(spec: &ExperimentSpec) -> Result<Outcome, RunError> {
    let p = property(spec)?;
    let prob = spec.f64_param("p")?.unwrap_or(0.5);
    let trials = spec.u64_param("trials")?.unwrap_or(20) as usize;
    let eps = spec.f64_param("eps")?.unwrap_or(0.05);
    let base = match spec.u64_param("base_colour")? {
        Some(c) => c as u8,
        None => p
            .monotone_colours()
            .colours()
            .next()
            .ok_or_else(|| SpecError::field("property", "property is not monotone in any colour"))?,
    };
    let opts = SearchOptions { budget: spec.budget, parallel: spec.parallel };
    let mut out = Outcome::default();
    let mut details = Vec::new();
    for n in spec.orders()? {
        let s = match transference_experiment(&p, n, prob, base, trials, spec.seed, eps, opts) {
            Ok(s) => s,
            Err(Error::ResourceLimit { explored, .. }) => {
                out.rows.push(Row::new(Some(n), "nodes-before-limit", Value::from(explored), 0.0, "branch-and-bound"));
                out.partial = true;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let sn = Some(n);
        out.rows.push(Row::new(sn, "ex", num(s.ex_full), EXACT, "branch-and-bound"));
        for t in &s.trials {
            if let Some(r) = t.ratio {
                out.rows.push(Row::new(sn, "ratio", num(r), EXACT, "branch-and-bound").seed(t.seed).nodes(t.nodes));
            }
        }
        let ratios: Vec<f64> = s.trials.iter().filter_map(|t| t.ratio).collect();
        if let Some(mean) = s.mean_ratio {
            let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (ratios.len().max(2) - 1) as f64;
            let se = (var / ratios.len() as f64).sqrt();
            out.rows.push(Row::new(sn, "mean-ratio", num(mean), se, "monte carlo (standard error)"));
        }
        out.rows.push(Row::new(sn, "dominance-violations", Value::from(s.dominance_violations), 0.0, "check"));
        details.push(serde_json::to_value(&s).map_err(|e| RunError::Io(e.to_string()))?);
    }
    out.detail = single_or_list(details);
    Ok(out)
}

fn typical(spec: &ExperimentSpec) -> Result<Outcome, RunError> {
    let p = property(spec)?;
    let samples = spec.u64_param("samples")?.unwrap_or(200) as usize;
    let mut out = Outcome::default();
    let mut details = Vec::new();
    for n in spec.orders()? {
        if p.host_family() != HostFamily::Complete {
            return Err(SpecError::field("property", "typical structure runs on K_n properties").into());
        }
        let family = constant_pair_templates(n, p.k());
        let s = match typical_structure_experiment(&p, n, &family, samples, spec.seed) {
            Ok(s) => s,
            Err(Error::ResourceLimit { explored, .. }) => {
                out.rows.push(Row::new(Some(n), "draws-before-limit", Value::from(explored), 0.0, "rejection sampling"));
                out.partial = true;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let sn = Some(n);
        let oracle = "monte carlo";
        let se = {
            let v = s.distances.iter().map(|&d| (d as f64 - s.mean).powi(2)).sum::<f64>() / s.distances.len().max(1) as f64;
            (v / s.distances.len().max(1) as f64).sqrt()
        };
        out.rows.push(Row::new(sn, "mean-distance", num(s.mean), se, oracle));
        out.rows.push(Row::new(sn, "median-distance", num(s.median), 0.0, oracle));
        out.rows.push(Row::new(sn, "relative-mean-distance", num(s.mean / binomial(n, 2) as f64), se / binomial(n, 2) as f64, oracle));
        details.push(json!({"n": n, "stats": s}));
    }
    out.detail = single_or_list(details);
    Ok(out)
}

fn goodness(spec: &ExperimentSpec) -> Result<Outcome, RunError> {
    let kind = spec.str_param("kind")?.unwrap_or("hypercube");
    let family = HostFamily::parse(kind).map_err(|_| SpecError::field("params.kind", format!("unknown host kind `{kind}`")))?;
    let small = spec.u64_param("N")?.unwrap_or(2) as usize;
    let table = goodness_diagnostic(family, small, spec.orders()?)?;
    let mut out = Outcome::default();
    for (n, r) in spec.orders()?.into_iter().zip(&table.rows) {
        let sn = Some(n);
        out.rows.push(Row::new(sn, "embeddings", count_value(r.count), 0.0, "enumeration"));
        out.rows.push(Row::new(sn, "edge-ratio", num(r.edge_ratio), EXACT, "enumeration"));
        out.rows.push(Row::new(sn, "vertex-ratio", num(r.vertex_ratio), EXACT, "enumeration"));
    }
    out.rows.push(Row::new(None, "edge-ratio-decreasing", Value::Bool(table.edge_ratio_strictly_decreasing), 0.0, "enumeration"));
    out.rows.push(Row::new(None, "min-edge-ratio", num(table.min_edge_ratio), EXACT, "enumeration"));
    out.detail = serde_json::to_value(&table).map_err(|e| RunError::Io(e.to_string()))?;
    Ok(out)
}

fn graphon_cutdist(spec: &ExperimentSpec) -> Result<Outcome, RunError> {
    let u = load_graphon(&spec.path_param("a")?)?;
    let w = load_graphon(&spec.path_param("b")?)?;
    let metric = spec.str_param("metric")?.unwrap_or("dk");
    let mut out = Outcome::default();
    match metric {
        "dk" | "l1" => {
            let m = if metric == "dk" { Metric::Dk } else { Metric::L1 };
            let r = cut_distance(&u, &w, m)?;
            let (tol, oracle) = if r.exact { (EXACT, "vertex enumeration (exact)") } else { (r.upper - r.value, "local search (interval)") };
            out.rows.push(Row::new(None, "distance", num(r.value), tol, oracle));
            out.detail = serde_json::to_value(&r).map_err(|e| RunError::Io(e.to_string()))?;
        }
        "delta" => {
            let grid = spec.u64_param("grid")?.unwrap_or(u.parts().max(w.parts()) as u64) as usize;
            let r = delta_cut_upper(&u, &w, grid)?;
            out.rows.push(Row::new(None, "distance-upper", num(r.value), EXACT, "part permutations (upper bound)"));
            out.detail = serde_json::to_value(&r).map_err(|e| RunError::Io(e.to_string()))?;
        }
        other => return Err(SpecError::field("params.metric", format!("unknown metric `{other}` (dk, l1 or delta)")).into()),
    }
    Ok(out)
}

fn graphon_entropy(spec: &ExperimentSpec) -> Result<Outcome, RunError> {
    let w = load_graphon(&spec.path_param("a")?)?;
    let ent = entropy_graphon(&w);
    let mut out = Outcome::default();
    out.rows.push(Row::new(None, "entropy", num(ent), EXACT, "closed form"));
    let mut samples = Vec::new();
    if let Some(ns) = &spec.n {
        let ns = ns.expand().map_err(|e| SpecError::field("n", e))?;
        let reps = spec.u64_param("samples")?.unwrap_or(10);
        for n in ns {
            let vals = (0..reps)
                .map(|i| conditional_entropy_sample(&w, n, spec.seed.wrapping_add(i)).map(|e| e / binomial(n, 2) as f64))
                .collect::<Result<Vec<_>, _>>()?;
            let mean = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len().max(2) - 1) as f64;
            let se = (var / vals.len().max(1) as f64).sqrt();
            out.rows.push(Row::new(Some(n), "sample-entropy-density", num(mean), se, "monte carlo (standard error)"));
            samples.push(json!({"n": n, "mean_density": mean, "values": vals}));
        }
    }
    out.detail = json!({"entropy": ent, "k": w.k(), "parts": w.parts(), "samples": samples});
    Ok(out)
}

fn graphon_weakreg(spec: &ExperimentSpec) -> Result<Outcome, RunError> {
    let w = load_graphon(&spec.path_param("a")?)?;
    let m = spec.u64_param("m")?.unwrap_or(4) as usize;
    let r = weak_regularity(&w, m)?;
    let mut out = Outcome::default();
    let oracle = if r.exact { "vertex enumeration (exact)" } else { "local search (lower bound)" };
    out.rows.push(Row::new(None, "classes", Value::from(r.classes.len()), 0.0, "greedy refinement"));
    out.rows.push(Row::new(None, "distance", num(r.distance), EXACT, oracle));
    out.rows.push(Row::new(None, "entropy-conditional", num(entropy_graphon(&r.conditional)), EXACT, "closed form"));
    out.detail = json!({
        "classes": r.classes,
        "distance": r.distance,
        "exact": r.exact,
        "conditional": r.conditional.to_json(),
    });
    Ok(out)
}

fn graphon_sample(spec: &ExperimentSpec) -> Result<Outcome, RunError> {
    let w = load_graphon(&spec.path_param("a")?)?;
    let mode = match spec.str_param("mode")?.unwrap_or("g") {
        "g" | "G" => SampleMode::G,
        "h" | "H" => SampleMode::H,
        other => return Err(SpecError::field("params.mode", format!("unknown mode `{other}` (h or g)")).into()),
    };
    let ns = spec.orders()?;
    let mut out = Outcome::default();
    let mut details = Vec::new();
    for n in ns {
        let s = sample(&w, n, mode, spec.seed)?;
        out.rows.push(Row::new(Some(n), "decorated-entropy", num(s.decorated.entropy()), EXACT, "closed form").seed(spec.seed));
        details.push(json!({
            "n": n,
            "mode": s.mode,
            "points": s.points,
            "parts": s.parts,
            "decorated": s.decorated,
            "colouring": s.colouring.as_ref().map(|c| c.to_json()),
        }));
    }
    out.detail = single_or_list(details);
    Ok(out)
}

#[derive(Deserialize)]
struct LabelledGraph {
    vertices: usize,
    edges: Vec<(usize, usize, Vec<f64>)>,
}

fn graphon_homdensity(spec: &ExperimentSpec) -> Result<Outcome, RunError> {
    let w = load_graphon(&spec.path_param("a")?)?;
    let g: LabelledGraph = match spec.param("graph") {
        Some(v @ Value::Object(_)) => serde_json::from_value(v.clone()).map_err(|e| SpecError::field("params.graph", e.to_string()))?,
        _ => {
            let path = spec.path_param("graph")?;
            let text = std::fs::read_to_string(&path).map_err(|e| RunError::Io(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| RunError::Io(format!("{}: malformed graph: {e}", path.display())))?
        }
    };
    let t = hom_density(g.vertices, &g.edges, &w)?;
    let mut out = Outcome::default();
    out.rows.push(Row::new(None, "hom-density", num(t), EXACT, "part assignment sum (exact)"));
    out.detail = json!({"density": t});
    Ok(out)
}

fn graphon_count(spec: &ExperimentSpec) -> Result<Outcome, RunError> {
    let w = load_graphon(&spec.path_param("a")?)?;
    let delta = spec.f64_param("delta")?.ok_or_else(|| SpecError::field("params.delta", "delta required"))?;
    let metric = match spec.str_param("metric")?.unwrap_or("dk") {
        "dk" => NeighborhoodMetric::Dk,
        "delta" => NeighborhoodMetric::DeltaK,
        other => return Err(SpecError::field("params.metric", format!("unknown metric `{other}` (dk or delta)")).into()),
    };
    let mut out = Outcome::default();
    let mut details = Vec::new();
    for n in spec.orders()? {
        let c = match neighborhood_count(&w, delta, n, metric, spec.budget) {
            Ok(c) => c,
            Err(Error::ResourceLimit { .. }) => {
                out.partial = true;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let oracle = if c.lower_bound_only { "enumeration (lower bound)" } else { "enumeration" };
        out.rows.push(Row::new(Some(n), "neighbourhood-count", count_value(c.count), 0.0, oracle));
        details.push(json!({"n": n, "result": c}));
    }
    out.detail = single_or_list(details);
    Ok(out)
}
