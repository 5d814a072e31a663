//! Global placement decision: admission control over DC slots, link
//! utilization and path latency, then policy-based choice among the feasible
//! DCs.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resources::{AllocationHandle, ClusterState, DcInventory, SlotQuantum};
use crate::topology::{LoadOverlay, PathSet, ReservationHandle, Topology};
use crate::workload::WorkloadSpec;
use crate::Bps;

pub const DEFAULT_THRESHOLD: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Maximum acceptable post-placement link utilization `T`.
    pub threshold: f64,
    /// Require one free slot to remain after placement (`F >= 1`). When
    /// off, a cluster may be filled completely (`F >= 0`).
    pub strict_headroom: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            threshold: DEFAULT_THRESHOLD,
            strict_headroom: true,
        }
    }
}

impl ControllerConfig {
    pub fn with_threshold(threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Config(format!(
                "utilization threshold must be in [0, 1], got {threshold}"
            )));
        }
        Ok(ControllerConfig {
            threshold,
            ..ControllerConfig::default()
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Policy {
    Random,
    /// Most slots free after placement.
    DataCentreOpt,
    /// Lowest worst-link utilization over the workload's paths.
    PathUtilOpt,
    /// Lowest mean leg latency.
    LatencyOpt,
}

impl Policy {
    /// The optimisation policies an agent chooses between, in action order.
    pub const ACTIONS: [Policy; 3] = [
        Policy::DataCentreOpt,
        Policy::PathUtilOpt,
        Policy::LatencyOpt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Random => "Random",
            Policy::DataCentreOpt => "DataCentreOpt",
            Policy::PathUtilOpt => "PathUtilOpt",
            Policy::LatencyOpt => "LatencyOpt",
        }
    }

    pub fn action_index(self) -> Option<usize> {
        Policy::ACTIONS.iter().position(|&p| p == self)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "random" => Ok(Policy::Random),
            "datacentreopt" | "datacenteropt" | "dcopt" => Ok(Policy::DataCentreOpt),
            "pathutilopt" | "utilopt" => Ok(Policy::PathUtilOpt),
            "latencyopt" => Ok(Policy::LatencyOpt),
            _ => Err(Error::Config(format!("unknown policy `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibleReason {
    DcCapacity,
    Bandwidth,
    Latency,
    NoCandidates,
}

impl InfeasibleReason {
    pub fn as_str(self) -> &'static str {
        match self {
            InfeasibleReason::DcCapacity => "dc_capacity",
            InfeasibleReason::Bandwidth => "bandwidth",
            InfeasibleReason::Latency => "latency",
            InfeasibleReason::NoCandidates => "no_candidates",
        }
    }
}

/// What placing the workload at one DC would look like.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateEvaluation {
    pub dc_node: usize,
    /// `F`: slots left in the cluster after placement.
    pub slots_free_after: u32,
    /// Worst link utilization across all legs with the workload added.
    pub worst_util_after: f64,
    pub avg_latency_ms: f64,
    /// `L_pmax`: the slowest leg.
    pub max_latency_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PlacementOutcome {
    Placed {
        dc_node: usize,
        evaluation: CandidateEvaluation,
        allocation: AllocationHandle,
        /// One per leg that leaves the DC site; co-located legs use no links.
        reservations: Vec<ReservationHandle>,
    },
    Infeasible {
        reason: InfeasibleReason,
    },
}

impl PlacementOutcome {
    pub fn is_placed(&self) -> bool {
        matches!(self, PlacementOutcome::Placed { .. })
    }
}

/// Result of evaluating every DC for one workload.
#[derive(Clone, Debug, Default)]
pub struct SiteScan {
    pub feasible: Vec<CandidateEvaluation>,
    pub rejected: Vec<(usize, InfeasibleReason)>,
}

impl SiteScan {
    /// Single failure indication when nothing is feasible: slot capacity if
    /// every DC failed that check, else bandwidth if any DC failed on it,
    /// else latency.
    pub fn dominant_reason(&self) -> InfeasibleReason {
        if self.rejected.is_empty() {
            return InfeasibleReason::NoCandidates;
        }
        if self
            .rejected
            .iter()
            .all(|(_, r)| *r == InfeasibleReason::DcCapacity)
        {
            InfeasibleReason::DcCapacity
        } else if self
            .rejected
            .iter()
            .any(|(_, r)| *r == InfeasibleReason::Bandwidth)
        {
            InfeasibleReason::Bandwidth
        } else {
            InfeasibleReason::Latency
        }
    }
}

/// `F = free - S`; accepted iff `F >= 1` (or `F >= 0` without strict
/// headroom).
pub fn dc_admission(cluster: &ClusterState, slots: u32, strict_headroom: bool) -> bool {
    let after = cluster.free_slots as i64 - slots as i64;
    after >= if strict_headroom { 1 } else { 0 }
}

/// Accepted iff every link on the paths stays at or below `threshold` once
/// `demand` is added.
pub fn network_admission(
    topology: &Topology,
    paths: &PathSet,
    demand: Bps,
    threshold: f64,
) -> bool {
    topology.max_path_utilization(paths, demand) <= threshold
}

pub fn latency_admission(max_latency_ms: f64, l_max_ms: Option<f64>) -> bool {
    l_max_ms.is_none_or(|bound| max_latency_ms <= bound)
}

/// Runs admission control for every DC. Legs of one workload are checked
/// cumulatively in A-end order, so links they share see the combined load.
pub fn evaluate_sites(
    topology: &Topology,
    inventory: &DcInventory,
    workload: &WorkloadSpec,
    config: &ControllerConfig,
) -> Result<SiteScan> {
    let pops = workload.pop_indices(topology)?;
    let slots = workload.slots(inventory.quantum());
    let routes = topology.route_table();
    let demand = workload.demand_bw_bps;
    let mut scan = SiteScan::default();
    let mut overlay = LoadOverlay::default();
    let mut touched: Vec<usize> = Vec::new();

    'dc: for cluster in inventory.clusters() {
        let dc = cluster.dc_node;
        if !dc_admission(cluster, slots, config.strict_headroom) {
            scan.rejected.push((dc, InfeasibleReason::DcCapacity));
            continue;
        }
        overlay.clear();
        touched.clear();
        let mut latency_sum = 0.0;
        let mut latency_max: f64 = 0.0;
        for &pop in &pops {
            let Some(ps) = routes.route(pop, dc) else {
                // co-located leg: no links, no latency
                continue;
            };
            if topology.utilization_with(ps, demand, &overlay) > config.threshold {
                scan.rejected.push((dc, InfeasibleReason::Bandwidth));
                continue 'dc;
            }
            overlay.add(&ps.link_loads(demand));
            touched.extend_from_slice(ps.links());
            latency_sum += ps.common_latency_ms();
            latency_max = latency_max.max(ps.common_latency_ms());
        }
        if !latency_admission(latency_max, workload.l_max_ms) {
            scan.rejected.push((dc, InfeasibleReason::Latency));
            continue;
        }
        let worst_util_after = touched
            .iter()
            .map(|&li| {
                let l = topology.link(li);
                (l.reserved() + overlay.get(li)) as f64 / l.capacity() as f64
            })
            .fold(0.0, f64::max);
        scan.feasible.push(CandidateEvaluation {
            dc_node: dc,
            slots_free_after: cluster.free_slots - slots,
            worst_util_after,
            avg_latency_ms: latency_sum / pops.len() as f64,
            max_latency_ms: latency_max,
        });
    }
    Ok(scan)
}

/// Feasible DCs in canonical (node id) order.
pub fn feasible_sites(
    topology: &Topology,
    inventory: &DcInventory,
    workload: &WorkloadSpec,
    config: &ControllerConfig,
) -> Result<Vec<CandidateEvaluation>> {
    Ok(evaluate_sites(topology, inventory, workload, config)?.feasible)
}

/// Picks one candidate; exact ties go to the earliest candidate.
pub fn select_by_policy<'a, R: Rng + ?Sized>(
    policy: Policy,
    candidates: &'a [CandidateEvaluation],
    rng: &mut R,
) -> Result<&'a CandidateEvaluation> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let best = |better: &dyn Fn(&CandidateEvaluation, &CandidateEvaluation) -> bool| {
        candidates.iter().skip(1).fold(
            &candidates[0],
            |acc, c| if better(c, acc) { c } else { acc },
        )
    };
    Ok(match policy {
        Policy::Random => &candidates[rng.gen_range(0..candidates.len())],
        Policy::DataCentreOpt => best(&|c, acc| c.slots_free_after > acc.slots_free_after),
        Policy::PathUtilOpt => best(&|c, acc| c.worst_util_after < acc.worst_util_after),
        Policy::LatencyOpt => best(&|c, acc| c.avg_latency_ms < acc.avg_latency_ms),
    })
}

/// The mutable simulation state: network reservations plus DC slots.
#[derive(Clone, Debug)]
pub struct Environment {
    pub topology: Topology,
    pub inventory: DcInventory,
}

impl Environment {
    pub fn new(topology: Topology, quantum: SlotQuantum) -> Environment {
        let inventory = DcInventory::from_topology(&topology, quantum);
        Environment {
            topology,
            inventory,
        }
    }

    /// Clears every reservation and allocation.
    pub fn reset(&mut self) {
        self.topology.reset_network();
        self.inventory.reset_inventory();
    }

    pub fn place<R: Rng + ?Sized>(
        &mut self,
        workload: &WorkloadSpec,
        policy: Policy,
        config: &ControllerConfig,
        rng: &mut R,
    ) -> Result<PlacementOutcome> {
        place(self, workload, policy, config, rng)
    }
}

/// Admission control, policy choice, then commit of slots and per-leg
/// bandwidth. Infeasible outcomes leave the environment untouched.
pub fn place<R: Rng + ?Sized>(
    env: &mut Environment,
    workload: &WorkloadSpec,
    policy: Policy,
    config: &ControllerConfig,
    rng: &mut R,
) -> Result<PlacementOutcome> {
    let scan = evaluate_sites(&env.topology, &env.inventory, workload, config)?;
    if scan.feasible.is_empty() {
        return Ok(PlacementOutcome::Infeasible {
            reason: scan.dominant_reason(),
        });
    }
    let chosen = select_by_policy(policy, &scan.feasible, rng)?.clone();
    let dc = chosen.dc_node;
    let allocation = env
        .inventory
        .allocate(dc, workload.slots(env.inventory.quantum()))?;
    let routes = env.topology.route_table();
    let mut reservations = Vec::with_capacity(workload.access_pops.len());
    for pop in workload.pop_indices(&env.topology)? {
        if let Some(ps) = routes.route(pop, dc) {
            reservations.push(env.topology.reserve(ps, workload.demand_bw_bps));
        }
    }
    Ok(PlacementOutcome::Placed {
        dc_node: dc,
        evaluation: chosen,
        allocation,
        reservations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{NodeRole, RoutingMode};
    use crate::{GBPS, MBPS};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cluster(free: u32) -> ClusterState {
        ClusterState {
            dc_node: 0,
            total_slots: 100,
            free_slots: free,
        }
    }

    fn candidate(dc: usize, free: u32, util: f64, lat: f64) -> CandidateEvaluation {
        CandidateEvaluation {
            dc_node: dc,
            slots_free_after: free,
            worst_util_after: util,
            avg_latency_ms: lat,
            max_latency_ms: lat,
        }
    }

    fn one_link(reserved: Bps) -> (Topology, PathSet) {
        let mut topo = Topology::build(
            vec![
                ("a".into(), NodeRole::Access, None),
                ("b".into(), NodeRole::Dc, Some(10)),
            ],
            vec![("a".into(), "b".into(), 10 * GBPS, 1000)],
            RoutingMode::Ecmp,
        )
        .unwrap();
        let ps = topo.compute_paths("a", "b").unwrap();
        topo.reserve(&ps, reserved);
        (topo, ps)
    }

    #[test]
    fn slot_headroom() {
        assert!(dc_admission(&cluster(5), 4, true));
        assert!(!dc_admission(&cluster(4), 4, true));
        assert!(!dc_admission(&cluster(0), 1, true));
        assert!(dc_admission(&cluster(4), 4, false));
        assert!(!dc_admission(&cluster(3), 4, false));
    }

    #[test]
    fn utilization_threshold() {
        let (topo, ps) = one_link(8 * GBPS);
        assert!((topo.max_path_utilization(&ps, 512 * MBPS) - 0.8512).abs() < 1e-12);
        assert!(network_admission(&topo, &ps, 512 * MBPS, 0.9));
        let (topo, ps) = one_link(8_500 * MBPS);
        assert!(!network_admission(&topo, &ps, 512 * MBPS, 0.9));
        let (topo, ps) = one_link(0);
        assert!(network_admission(&topo, &ps, 10 * GBPS, 1.0));
        assert!(!network_admission(&topo, &ps, 10 * GBPS + 1, 1.0));
    }

    #[test]
    fn latency_bound() {
        assert!(!latency_admission(12.0, Some(10.0)));
        assert!(latency_admission(10.0, Some(10.0)));
        assert!(latency_admission(1e9, None));
    }

    #[test]
    fn policies_pick_their_criterion() {
        let cands = [candidate(1, 96, 0.5, 10.0), candidate(2, 76, 0.3, 20.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pick = |p, rng: &mut ChaCha8Rng| select_by_policy(p, &cands, rng).unwrap().dc_node;
        assert_eq!(pick(Policy::DataCentreOpt, &mut rng), 1);
        assert_eq!(pick(Policy::PathUtilOpt, &mut rng), 2);
        assert_eq!(pick(Policy::LatencyOpt, &mut rng), 1);
    }

    #[test]
    fn single_candidate_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let one = [candidate(4, 1, 0.1, 1.0)];
        for p in [
            Policy::Random,
            Policy::DataCentreOpt,
            Policy::PathUtilOpt,
            Policy::LatencyOpt,
        ] {
            assert_eq!(select_by_policy(p, &one, &mut rng).unwrap().dc_node, 4);
        }
        let tied = [candidate(1, 5, 0.2, 3.0), candidate(2, 5, 0.2, 3.0)];
        for p in Policy::ACTIONS {
            assert_eq!(select_by_policy(p, &tied, &mut rng).unwrap().dc_node, 1);
        }
        assert!(matches!(
            select_by_policy(Policy::Random, &[], &mut rng),
            Err(Error::NoCandidates)
        ));
    }

    #[test]
    fn random_policy_covers_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cands = [
            candidate(1, 5, 0.2, 3.0),
            candidate(2, 5, 0.2, 3.0),
            candidate(3, 1, 0.9, 9.0),
        ];
        let mut seen = [0; 4];
        for _ in 0..300 {
            seen[select_by_policy(Policy::Random, &cands, &mut rng)
                .unwrap()
                .dc_node] += 1;
        }
        assert!(seen[1..].iter().all(|&c| c > 50));
    }

    #[test]
    fn policy_names() {
        for p in [
            Policy::Random,
            Policy::DataCentreOpt,
            Policy::PathUtilOpt,
            Policy::LatencyOpt,
        ] {
            assert_eq!(p.as_str().parse::<Policy>().unwrap(), p);
        }
        assert!("best".parse::<Policy>().is_err());
        assert_eq!(Policy::PathUtilOpt.action_index(), Some(1));
        assert_eq!(Policy::Random.action_index(), None);
    }

    #[test]
    fn threshold_validation() {
        assert!(ControllerConfig::with_threshold(1.2).is_err());
        assert!(ControllerConfig::with_threshold(-0.1).is_err());
        assert_eq!(
            ControllerConfig::with_threshold(0.5).unwrap().threshold,
            0.5
        );
    }
}
