//! Experiment specs, dispatch and reports behind the `chroma` binary.

pub mod exec;
pub mod report;
pub mod spec;

pub use exec::{exec, Outcome, Row, RunError};
pub use report::{emit, render, run, Report, CSV_HEADER};
pub use spec::{parse_spec, parse_spec_str, ExperimentSpec, Format, SpecError};
