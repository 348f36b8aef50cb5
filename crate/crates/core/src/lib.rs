//! Finite/fixed-time scaled consensus of first-order multi-agent systems.
//!
//! Each agent integrates `x_i' = u_i`; the protocols drive the *scaled*
//! states `g_i(x_i, t)` to agreement within a settling time that is bounded
//! independently of the initial condition. The crate provides:
//!
//! - [`graph`]: Laplacians, algebraic connectivity, detail balance and mirror
//!   graphs for directed topologies.
//! - [`attracting_law`]: the scalar generic attracting law, its settling-time
//!   bounds and the network-to-scalar parameter transformation.
//! - [`scales`]: scaling functions with symbolic partial derivatives.
//! - [`protocol`]: the distributed control laws.
//! - [`simulator`]: fixed-step RK4 closed-loop runs and settling measurement.
//! - [`config`] and [`report`]: scenario files, bundled examples and run
//!   reports used by the `scaled-consensus` binary.

pub mod attracting_law;
pub mod config;
pub mod graph;
pub mod linalg;
pub mod plot;
pub mod protocol;
pub mod report;
pub mod scales;
pub mod simulator;

pub use attracting_law::{AlParams, OddRatio, SettlingBounds};
pub use graph::{DetailBalance, WeightedGraph};
pub use protocol::{ProtocolKind, ProtocolSpec};
pub use scales::ScaleFunction;
pub use simulator::{Scenario, Trajectory};
