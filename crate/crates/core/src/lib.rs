//! Two-terminal connectivity on weighted networks under classical and
//! concurrence percolation rules.
//!
//! * [`netcore`]: link weights, networks, generators, terminal contraction
//! * [`rules`]: series/parallel composition in both rule systems
//! * [`exactsc`]: exhaustive classical oracle and path enumeration
//! * [`spreduce`]: exact series-parallel reduction with a replayable trace
//! * [`starmesh`]: star-mesh elimination for non-series-parallel networks
//! * [`fastapprox`]: shortest-path-class parallel approximation
//! * [`analysis`]: thresholds, closed forms, scaling fits, exponent tables

pub mod analysis;
pub mod error;
pub mod exactsc;
pub mod fastapprox;
pub mod netcore;
pub mod rules;
pub mod solver;
pub mod spreduce;
pub mod starmesh;

pub use error::{Error, Result};
pub use fastapprox::{Method, SweepCurve};
pub use netcore::{LinkWeight, Network, NodeId, Topology};
pub use rules::RuleSystem;
