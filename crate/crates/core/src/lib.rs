//! Multicolour templates, entropy and containers for ordered colourings,
//! with a step-graphon layer for decorated limits.

pub mod colouring_number;
pub mod combin;
pub mod constraint;
pub mod containers;
pub mod embed;
pub mod encoding;
pub mod error;
pub mod extremal;
pub mod graphon;
pub mod host;
pub mod hostgraphs;
pub mod par;
pub mod properties;
pub mod rng;
mod search;
pub mod template;

pub use error::{Error, Result};
pub use host::{HostFamily, HostGraph, HostKind};
pub use template::{Colour, Colouring, Palette, Template};
