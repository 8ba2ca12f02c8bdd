//! Cost-optimal multicast routing in sparse-splitting WDM mesh networks.
//!
//! The crate builds the exact integer program for light-hierarchy (LH) and
//! light-tree (LT) routing of a multicast session, solves it with a
//! deterministic branch-and-bound over a bounded-variable simplex, and checks
//! the resulting per-wavelength structures against the light-hierarchy rules.

pub mod experiment;
pub mod flow;
pub mod hierarchy;
pub mod model;
pub mod network;
pub mod oracle;
pub mod simplex;
pub mod solver;

pub use hierarchy::{LightStructure, LightStructureSet, Mode, ValidationReport};
pub use model::{build_model, IlpModel};
pub use network::{builtin_topology, parse_network, Builtin, MulticastSession, Network, NodeKind};
pub use solver::{solve, SolveOptions, SolveReport, SolveStatus};
