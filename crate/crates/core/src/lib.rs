//! Joint WAN + data-centre workload placement.
//!
//! The crate models a wide-area network interconnecting access POPs and
//! data-centre sites, a slot-based capacity model for each DC cluster, and a
//! placement controller that runs admission control (slot headroom, link
//! utilization threshold, path latency bound) before choosing among the
//! feasible DCs with an optimisation policy. A tabular Q-learning agent
//! learns which policy to apply per workload, and the [`harness`] module runs
//! the train / evaluate / compare experiments on top of all of it.
//!
//! ```text
//!  workload stream ──▶ controller ──▶ policy (fixed heuristic or Q-table)
//!                         │
//!              ┌──────────┴──────────┐
//!              ▼                     ▼
//!          topology               resources
//!   (ECMP paths, link reserve)  (slots per DC)
//! ```

pub mod controller;
pub mod error;
pub mod harness;
pub mod resources;
pub mod rl;
pub mod topology;
pub mod workload;

pub use controller::{
    CandidateEvaluation, ControllerConfig, Environment, InfeasibleReason, PlacementOutcome, Policy,
};
pub use error::{Error, Result};
pub use harness::{Algorithm, ComparisonConfig, ComparisonReport, IterationResult, StopReason};
pub use resources::{AllocationHandle, ClusterState, DcInventory, SlotQuantum};
pub use rl::{Hyperparams, QTable, RewardLog, StateKey};
pub use topology::{Link, Node, NodeRole, PathSet, ReservationHandle, RoutingMode, Topology};
pub use workload::{WorkloadGenConfig, WorkloadSpec, WorkloadStream};

/// Bandwidth in bits per second.
pub type Bps = u64;

pub const MBPS: Bps = 1_000_000;
pub const GBPS: Bps = 1_000_000_000;
