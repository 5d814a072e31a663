//! Test-only oracles. They read raw link and slot state through the public
//! accessors and recompute everything by brute force, without going through
//! the routing, split or admission code they check.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use wleng::resources::SlotQuantum;
use wleng::topology::{NodeRole, RoutingMode, Topology};
use wleng::workload::WorkloadSpec;
use wleng::{Bps, DcInventory};

/// Random connected graph on `n` nodes: a random tree plus each remaining
/// pair with probability `extra_p`. Latencies (ms) come from `latencies`.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    n: usize,
    extra_p: f64,
    latencies: &[u64],
    capacity: Bps,
    roles: &[(NodeRole, Option<u32>)],
) -> Topology {
    assert_eq!(roles.len(), n);
    let ids: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
    let mut present = vec![vec![false; n]; n];
    let mut links = Vec::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        present[i][j] = true;
        present[j][i] = true;
        links.push((ids[j].clone(), ids[i].clone()));
    }
    for a in 0..n {
        for b in a + 1..n {
            if !present[a][b] && rng.gen_bool(extra_p) {
                links.push((ids[a].clone(), ids[b].clone()));
            }
        }
    }
    let links = links
        .into_iter()
        .map(|(a, b)| {
            let lat = latencies[rng.gen_range(0..latencies.len())];
            (a, b, capacity, lat * 1000)
        })
        .collect();
    let nodes = ids
        .iter()
        .zip(roles)
        .map(|(id, &(role, slots))| (id.clone(), role, slots))
        .collect();
    Topology::build(nodes, links, RoutingMode::Ecmp).expect("valid random graph")
}

/// Every simple path `src -> dst` with its total latency (µs), by DFS over
/// the raw link list.
pub fn all_simple_paths(topo: &Topology, src: usize, dst: usize) -> Vec<(Vec<usize>, u64)> {
    let n = topo.nodes().len();
    let mut adj: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
    for l in topo.links() {
        let (a, b) = l.endpoints();
        adj[a].push((b, l.latency_us()));
        adj[b].push((a, l.latency_us()));
    }
    let mut out = Vec::new();
    let mut path = vec![src];
    let mut used = vec![false; n];
    used[src] = true;
    fn dfs(
        adj: &[Vec<(usize, u64)>],
        at: usize,
        dst: usize,
        cost: u64,
        path: &mut Vec<usize>,
        used: &mut [bool],
        out: &mut Vec<(Vec<usize>, u64)>,
    ) {
        if at == dst {
            out.push((path.clone(), cost));
            return;
        }
        for &(v, w) in &adj[at] {
            if !used[v] {
                used[v] = true;
                path.push(v);
                dfs(adj, v, dst, cost + w, path, used, out);
                path.pop();
                used[v] = false;
            }
        }
    }
    dfs(&adj, src, dst, 0, &mut path, &mut used, &mut out);
    out
}

/// Minimum-latency simple paths in lexicographic order, plus their latency.
pub fn min_latency_paths(topo: &Topology, src: usize, dst: usize) -> (Vec<Vec<usize>>, u64) {
    let all = all_simple_paths(topo, src, dst);
    let best = all.iter().map(|(_, c)| *c).min().expect("connected");
    let mut paths: Vec<Vec<usize>> = all
        .into_iter()
        .filter(|(_, c)| *c == best)
        .map(|(p, _)| p)
        .collect();
    paths.sort();
    (paths, best)
}

fn link_index(topo: &Topology, u: usize, v: usize) -> usize {
    let (a, b) = if u < v { (u, v) } else { (v, u) };
    topo.links()
        .iter()
        .position(|l| l.endpoints() == (a, b))
        .expect("consecutive nodes are linked")
}

pub fn oracle_slots(w: &WorkloadSpec, q: &SlotQuantum) -> u32 {
    // smallest s whose s quanta cover every component
    (1..)
        .find(|&s: &u32| {
            s * q.vcpus >= w.vcpus
                && s * q.memory_gb >= w.memory_gb
                && s * q.storage_gb >= w.storage_gb
        })
        .unwrap()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCandidate {
    pub dc: usize,
    pub free_after: u32,
    pub worst_util: f64,
    pub avg_latency_ms: f64,
    pub max_latency_ms: f64,
}

/// Tries every DC independently against slot headroom, per-link threshold
/// (legs added one after another in A-end order) and the latency bound.
pub fn oracle_feasible(
    topo: &Topology,
    inv: &DcInventory,
    w: &WorkloadSpec,
    threshold: f64,
) -> Vec<OracleCandidate> {
    let slots = oracle_slots(w, inv.quantum());
    let pops: Vec<usize> = w
        .access_pops
        .iter()
        .map(|id| topo.node_index(id).unwrap())
        .collect();
    let mut out = Vec::new();
    for dc in 0..topo.nodes().len() {
        if !topo.node(dc).role().is_dc() {
            continue;
        }
        let cluster = inv.cluster(dc).unwrap();
        if cluster.free_slots < slots + 1 {
            continue;
        }
        let mut added: BTreeMap<usize, Bps> = BTreeMap::new();
        let mut ok = true;
        let mut lats = Vec::new();
        for &pop in &pops {
            if pop == dc {
                lats.push(0.0);
                continue;
            }
            let (paths, latency) = min_latency_paths(topo, pop, dc);
            let n = paths.len() as Bps;
            for (i, p) in paths.iter().enumerate() {
                let share = w.demand_bw_bps / n + if i == 0 { w.demand_bw_bps % n } else { 0 };
                for pair in p.windows(2) {
                    *added.entry(link_index(topo, pair[0], pair[1])).or_default() += share;
                }
            }
            for p in &paths {
                for pair in p.windows(2) {
                    let li = link_index(topo, pair[0], pair[1]);
                    let l = topo.link(li);
                    if (l.reserved() + added[&li]) as f64 / l.capacity() as f64 > threshold {
                        ok = false;
                    }
                }
            }
            lats.push(latency as f64 / 1000.0);
        }
        if !ok {
            continue;
        }
        let max_lat = lats.iter().copied().fold(0.0, f64::max);
        if let Some(bound) = w.l_max_ms {
            if max_lat > bound {
                continue;
            }
        }
        let worst = added
            .iter()
            .map(|(&li, &extra)| {
                let l = topo.link(li);
                (l.reserved() + extra) as f64 / l.capacity() as f64
            })
            .fold(0.0, f64::max);
        out.push(OracleCandidate {
            dc,
            free_after: cluster.free_slots - slots,
            worst_util: worst,
            avg_latency_ms: lats.iter().sum::<f64>() / lats.len() as f64,
            max_latency_ms: max_lat,
        });
    }
    out
}

/// Random workload over the topology's access POPs.
pub fn random_workload<R: Rng>(rng: &mut R, topo: &Topology, max_demand: Bps) -> WorkloadSpec {
    let access: Vec<usize> = topo.access_nodes().collect();
    let mut pops: Vec<usize> = access
        .iter()
        .copied()
        .filter(|_| rng.gen_bool(0.5))
        .collect();
    if pops.is_empty() {
        pops.push(access[rng.gen_range(0..access.len())]);
    }
    WorkloadSpec {
        vcpus: [2, 4, 8][rng.gen_range(0..3)],
        memory_gb: [4, 8, 16][rng.gen_range(0..3)],
        storage_gb: [256, 512, 1024][rng.gen_range(0..3)],
        access_pops: pops
            .iter()
            .map(|&i| topo.node(i).id().to_string())
            .collect(),
        demand_bw_bps: rng.gen_range(1..=max_demand),
        l_max_ms: if rng.gen_bool(0.3) {
            Some(rng.gen_range(0..8) as f64)
        } else {
            None
        },
    }
}
