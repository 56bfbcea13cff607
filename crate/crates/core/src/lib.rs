// SPDX-License-Identifier: Apache-2.0

//! # spt-core
//!
//! Compiles a high-level access policy (a list of `subject -> object`
//! authorizations with no data-plane detail) into exact-match flow entries
//! for the switches of a software-defined network, and keeps a simulated data
//! plane consistent with the policy while links fail and the policy is edited.
//!
//! The pipeline is:
//!
//! 1. [`policy`]: parse the policy file into a [`SecurityPolicy`].
//! 2. [`topology`]: parse the switch/host/link description into a [`Topology`].
//! 3. [`pathfinder`]: hop-count shortest path between two switches over live
//!    links, computed on a dense cost matrix.
//! 4. [`transform`]: resolve each rule's endpoints to hosts, route between
//!    them and decompose the route into one [`FlowEntry`] per switch.
//! 5. [`dataplane`]: install flow entries, forward packets, run all-pairs
//!    reachability probes and compare them with the policy.
//! 6. [`monitor`]: the packet-in driven reconciliation loop.
//! 7. [`scenario`]: scripted discrete-tick experiments and metrics.
//!
//! [`bench`] measures operation counts of the transformation as the network
//! and policy grow, and [`generate`] builds seeded random inputs for it and
//! for property tests.
//!
//! ```
//! use spt_core::{fixtures, parse_policy, parse_topology, transform_spm};
//!
//! let topo = parse_topology(fixtures::REF11_TOPO).unwrap();
//! let spm = parse_policy(fixtures::TWO_PAIRS_POLICY).unwrap();
//! let out = transform_spm(&spm, &topo);
//! assert_eq!(out.delta.len(), 14);
//! ```

pub mod bench;
pub mod dataplane;
pub mod fixtures;
pub mod generate;
mod ids;
pub mod monitor;
pub mod pathfinder;
pub mod policy;
pub mod scenario;
pub mod topology;
pub mod transform;

pub use dataplane::{
    forward, pingall, verify_reachability, DataPlane, DataPlaneError, FlowTable, ForwardOutcome,
    Packet, ReachabilityMatrix, Violation,
};
pub use ids::{HostId, PortNo, SwitchId};
pub use monitor::{Monitor, ReconcileReason, ReconcileReport};
pub use pathfinder::{bfs_distance, djk_route, RouteError, SwitchPath};
pub use policy::{parse_policy, serialize_policy, AccessRule, PolicyError, SecurityPolicy};
pub use scenario::{
    parse_scenario, run_scenario, MetricsRecord, RunOptions, Scenario, ScenarioError, Simulation,
};
pub use topology::{
    parse_topology, serialize_topology, CostMatrix, DirectedEdge, HostBinding, Topology,
    TopologyError,
};
pub use transform::{
    authorize_path, path_to_flow_entries, transform_rule, transform_spm, ConnectedPath, Delta,
    FlowEntry, RuleStatus, TransformError, TransformOutput,
};
