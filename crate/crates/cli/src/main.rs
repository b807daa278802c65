use std::path::PathBuf;
use std::process::ExitCode;

use chroma_cli::report::rows_csv;
use chroma_cli::spec::{parse_range, Orders};
use chroma_cli::{exec, parse_spec, render, run, ExperimentSpec, Format, RunError};
use chroma_core::properties::registry;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

/// Multicolour templates, extremal entropy, containers and step graphons.
#[derive(Parser)]
#[command(name = "chroma", version, arg_required_else_help = true)]
struct Cli {
    /// Print the property registry and exit.
    #[arg(long)]
    list_properties: bool,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Args, Clone)]
struct Out {
    /// json (native payload) or csv (one row per quantity).
    #[arg(long, default_value = "json")]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Node budget; exceeding it exits with code 3.
    #[arg(long)]
    budget: Option<u64>,
    /// Split searches across threads (witnesses may differ from single-thread runs).
    #[arg(long)]
    parallel: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a JSON experiment spec and emit its report.
    Run {
        spec: PathBuf,
        /// Overrides the spec's format.
        #[arg(long)]
        format: Option<Format>,
        /// Overrides the spec's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extremal entropy ex(n, P) with its witness template.
    Extremal {
        #[arg(long)]
        property: String,
        /// Order, or an inclusive range A..B.
        #[arg(long)]
        n: String,
        /// Search to completion (the default unless --budget is given).
        #[arg(long, conflicts_with = "budget")]
        exact: bool,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: Out,
    },
    /// |P_n| by exhaustive enumeration.
    Speed {
        #[arg(long)]
        property: String,
        #[arg(long)]
        n: String,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: Out,
    },
    /// Bad pairs B(t) of a template file against the property's forbidden family.
    Badpairs {
        #[arg(long)]
        property: String,
        #[arg(long)]
        template: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Container pipeline: hypergraph, sparsification, containers, validation.
    Containers {
        #[arg(long)]
        family: String,
        #[arg(long)]
        n: String,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        eps1: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Overrides the sparsification probability.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        no_sparsify: bool,
        /// Cover all independent sets, not only colourings.
        #[arg(long)]
        general: bool,
        /// Estimate coverage from this many uniform members instead of enumerating.
        #[arg(long)]
        samples: Option<u64>,
        /// Also write the full validation report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: Out,
    },
    /// Transference: relative extremal entropy of p-random templates.
    Transfer {
        #[arg(long)]
        property: String,
        #[arg(long)]
        n: String,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 20)]
        trials: u64,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long)]
        base_colour: Option<u8>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: Out,
    },
    /// Edit distance of uniform members of P_n to the constant-pair templates.
    Typical {
        #[arg(long)]
        property: String,
        #[arg(long)]
        n: String,
        #[arg(long, default_value_t = 200)]
        samples: u64,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: Out,
    },
    /// Overlap ratios of small embeddings in a host sequence.
    Goodness {
        #[arg(long, default_value = "hypercube")]
        kind: String,
        #[arg(long = "N", default_value_t = 2)]
        small: u64,
        #[arg(long)]
        n: String,
        #[command(flatten)]
        out: Out,
    },
    /// Step k-graphon tools.
    Graphon {
        #[command(subcommand)]
        cmd: GraphonCmd,
    },
}

#[derive(Subcommand)]
enum GraphonCmd {
    /// Cut distance between two graphon files.
    Cutdist {
        a: PathBuf,
        b: PathBuf,
        /// dk, l1 or delta (upper bound over part rearrangements).
        #[arg(long, default_value = "dk")]
        metric: String,
        #[arg(long)]
        grid: Option<u64>,
        #[command(flatten)]
        out: Out,
    },
    /// Entropy of a graphon, optionally with sampled densities at orders --n.
    Entropy {
        a: PathBuf,
        #[arg(long)]
        n: Option<String>,
        #[arg(long, default_value_t = 10)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Out,
    },
    /// Greedy weak-regularity partition into at most --m classes.
    Weakreg {
        a: PathBuf,
        #[arg(long, default_value_t = 4)]
        m: u64,
        #[command(flatten)]
        out: Out,
    },
    /// Draw H(n, W) or G(n, W).
    Sample {
        a: PathBuf,
        #[arg(long)]
        n: String,
        #[arg(long, default_value = "g")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Out,
    },
    /// Homomorphism density of a labelled graph file {vertices, edges: [[i, j, [w..]]]}.
    Homdensity {
        a: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Colourings of K_n whose graphon lies within --delta of the file.
    Count {
        a: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        n: String,
        /// dk, or delta (permutation bound, so a lower-bound count).
        #[arg(long, default_value = "dk")]
        metric: String,
        #[arg(long)]
        budget: Option<u64>,
        #[command(flatten)]
        out: Out,
    },
}

fn orders(s: &str) -> Result<Orders, RunError> {
    let ns = parse_range(s).map_err(|e| chroma_cli::SpecError::field("n", e))?;
    Ok(Orders::List(ns))
}

fn path_str(p: &std::path::Path) -> Value {
    Value::String(p.to_string_lossy().into_owned())
}

fn with_common(mut s: ExperimentSpec, c: &Common) -> ExperimentSpec {
    s.seed = c.seed;
    s.budget = c.budget;
    s.parallel = c.parallel;
    s
}

fn set(s: &mut ExperimentSpec, key: &str, v: impl Into<Value>) {
    s.params.insert(key.to_string(), v.into());
}

fn set_opt<T: Into<Value>>(s: &mut ExperimentSpec, key: &str, v: Option<T>) {
    if let Some(v) = v {
        set(s, key, v);
    }
}

/// Turns a direct subcommand into the equivalent spec.
fn build(cmd: Cmd) -> Result<(ExperimentSpec, Out, Option<PathBuf>), RunError> {
    let mut extra = None;
    let (spec, out) = match cmd {
        Cmd::Run { .. } => unreachable!("handled by the caller"),
        Cmd::Extremal { property, n, exact: _, common, out } => {
            let mut s = with_common(ExperimentSpec::new("extremal", 0), &common);
            s.property = Some(property);
            s.n = Some(orders(&n)?);
            (s, out)
        }
        Cmd::Speed { property, n, common, out } => {
            let mut s = with_common(ExperimentSpec::new("speed", 0), &common);
            s.property = Some(property);
            s.n = Some(orders(&n)?);
            (s, out)
        }
        Cmd::Badpairs { property, template, out } => {
            let mut s = ExperimentSpec::new("badpairs", 0);
            s.property = Some(property);
            set(&mut s, "template", path_str(&template));
            (s, out)
        }
        Cmd::Containers { family, n, eps, eps1, delta, p, no_sparsify, general, samples, report, common, out } => {
            let mut s = with_common(ExperimentSpec::new("containers", 0), &common);
            s.property = Some(family);
            s.n = Some(orders(&n)?);
            set_opt(&mut s, "eps", eps);
            set_opt(&mut s, "eps1", eps1);
            set_opt(&mut s, "delta", delta);
            set_opt(&mut s, "p", p);
            set_opt(&mut s, "samples", samples);
            set(&mut s, "sparsify", !no_sparsify);
            set(&mut s, "transversal", !general);
            extra = report;
            (s, out)
        }
        Cmd::Transfer { property, n, p, trials, eps, base_colour, common, out } => {
            let mut s = with_common(ExperimentSpec::new("transfer", 0), &common);
            s.property = Some(property);
            s.n = Some(orders(&n)?);
            set(&mut s, "p", p);
            set(&mut s, "trials", trials);
            set(&mut s, "eps", eps);
            set_opt(&mut s, "base_colour", base_colour);
            (s, out)
        }
        Cmd::Typical { property, n, samples, common, out } => {
            let mut s = with_common(ExperimentSpec::new("typical", 0), &common);
            s.property = Some(property);
            s.n = Some(orders(&n)?);
            set(&mut s, "samples", samples);
            (s, out)
        }
        Cmd::Goodness { kind, small, n, out } => {
            let mut s = ExperimentSpec::new("goodness", 0);
            s.n = Some(orders(&n)?);
            set(&mut s, "kind", kind);
            set(&mut s, "N", small);
            (s, out)
        }
        Cmd::Graphon { cmd } => match cmd {
            GraphonCmd::Cutdist { a, b, metric, grid, out } => {
                let mut s = ExperimentSpec::new("graphon-cutdist", 0);
                set(&mut s, "a", path_str(&a));
                set(&mut s, "b", path_str(&b));
                set(&mut s, "metric", metric);
                set_opt(&mut s, "grid", grid);
                (s, out)
            }
            GraphonCmd::Entropy { a, n, samples, seed, out } => {
                let mut s = ExperimentSpec::new("graphon-entropy", seed);
                set(&mut s, "a", path_str(&a));
                set(&mut s, "samples", samples);
                s.n = n.map(|n| orders(&n)).transpose()?;
                (s, out)
            }
            GraphonCmd::Weakreg { a, m, out } => {
                let mut s = ExperimentSpec::new("graphon-weakreg", 0);
                set(&mut s, "a", path_str(&a));
                set(&mut s, "m", m);
                (s, out)
            }
            GraphonCmd::Sample { a, n, mode, seed, out } => {
                let mut s = ExperimentSpec::new("graphon-sample", seed);
                set(&mut s, "a", path_str(&a));
                set(&mut s, "mode", mode);
                s.n = Some(orders(&n)?);
                (s, out)
            }
            GraphonCmd::Homdensity { a, graph, out } => {
                let mut s = ExperimentSpec::new("graphon-homdensity", 0);
                set(&mut s, "a", path_str(&a));
                set(&mut s, "graph", path_str(&graph));
                (s, out)
            }
            GraphonCmd::Count { a, delta, n, metric, budget, out } => {
                let mut s = ExperimentSpec::new("graphon-count", 0);
                set(&mut s, "a", path_str(&a));
                set(&mut s, "delta", delta);
                set(&mut s, "metric", metric);
                s.n = Some(orders(&n)?);
                s.budget = budget;
                (s, out)
            }
        },
    };
    spec.validate()?;
    Ok((spec, out, extra))
}

fn write_text(text: &str, out: &Option<PathBuf>) -> Result<(), RunError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| RunError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn error_code(e: &RunError) -> u8 {
    match e {
        RunError::Spec(_) => 4,
        RunError::Core(chroma_core::Error::ResourceLimit { .. }) => 3,
        RunError::Core(_) | RunError::Io(_) => 1,
    }
}

fn list_properties() {
    for p in registry() {
        let mono: Vec<String> = p.monotone_colours().colours().map(|c| c.to_string()).collect();
        println!(
            "{}\tk={}\thost={:?}\tmonotone=[{}]\t{}",
            p.id(),
            p.k(),
            p.host_family(),
            mono.join(","),
            p.description()
        );
    }
}

fn main_inner(cli: Cli) -> Result<u8, RunError> {
    if cli.list_properties {
        list_properties();
        return Ok(0);
    }
    let Some(cmd) = cli.command else {
        return Ok(0);
    };
    if let Cmd::Run { spec, format, out } = cmd {
        let spec = parse_spec(&spec)?;
        let report = run(&spec)?;
        let format = format.unwrap_or(spec.format);
        write_text(&render(&report, format)?, &out.or(spec.output.clone()))?;
        for e in report.expectations.iter().filter(|e| !e.pass) {
            eprintln!("expectation failed: {} ({})", e.expectation.quantity, e.reason.as_deref().unwrap_or(""));
        }
        return Ok(report.exit_code() as u8);
    }
    let (spec, out, extra) = build(cmd)?;
    let outcome = exec(&spec)?;
    if let Some(path) = extra {
        let text = serde_json::to_string_pretty(&outcome.detail).map_err(|e| RunError::Io(e.to_string()))? + "\n";
        write_text(&text, &Some(path))?;
    }
    let text = match out.format {
        Format::Json => {
            let body = if outcome.partial { json!({"partial": true, "result": outcome.detail}) } else { outcome.detail };
            serde_json::to_string_pretty(&body).map_err(|e| RunError::Io(e.to_string()))? + "\n"
        }
        Format::Csv => {
            let status = if outcome.partial { "partial" } else { "ok" };
            rows_csv(&spec.command, spec.property.as_deref(), &outcome.rows, status)?
        }
    };
    write_text(&text, &out.out)?;
    Ok(if outcome.partial { 3 } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
