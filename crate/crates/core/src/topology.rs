//! Network graph, equal-cost shortest-path routing and link bandwidth
//! accounting.
//!
//! Nodes are stored sorted by id, so a node index order is the same as the
//! lexicographic id order. Path lists use that order as their canonical
//! ordering. Latencies are kept in integer microseconds so that equal-cost
//! comparisons are exact, and bandwidth is integer bits/s so reservation
//! accounting is bit-exact.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Bps;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Access,
    /// A POP that also hosts a DC cluster. DC POPs originate access traffic
    /// like any other POP.
    Dc,
    Transit,
}

impl NodeRole {
    pub fn is_access(self) -> bool {
        matches!(self, NodeRole::Access | NodeRole::Dc)
    }

    pub fn is_dc(self) -> bool {
        self == NodeRole::Dc
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    id: String,
    role: NodeRole,
    slots: Option<u32>,
}

impl Node {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn role(&self) -> NodeRole {
        self.role
    }

    /// Cluster capacity in slots; present exactly on DC nodes.
    pub fn slots(&self) -> Option<u32> {
        self.slots
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    a: usize,
    b: usize,
    capacity: Bps,
    latency_us: u64,
    reserved: Bps,
}

impl Link {
    /// Endpoint node indices, `a < b`.
    pub fn endpoints(&self) -> (usize, usize) {
        (self.a, self.b)
    }

    pub fn capacity(&self) -> Bps {
        self.capacity
    }

    pub fn latency_us(&self) -> u64 {
        self.latency_us
    }

    pub fn latency_ms(&self) -> f64 {
        self.latency_us as f64 / 1000.0
    }

    pub fn reserved(&self) -> Bps {
        self.reserved
    }

    pub fn utilization(&self) -> f64 {
        self.reserved as f64 / self.capacity as f64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingMode {
    /// Every minimum-latency path, demand split equally.
    #[default]
    Ecmp,
    /// Only the canonically-first minimum-latency path.
    SinglePath,
}

/// The minimum-latency paths between two nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSet {
    src: usize,
    dst: usize,
    paths: Vec<Vec<usize>>,
    path_links: Vec<Vec<usize>>,
    links: Vec<usize>,
    latency_us: u64,
}

impl PathSet {
    pub fn src(&self) -> usize {
        self.src
    }

    pub fn dst(&self) -> usize {
        self.dst
    }

    /// Node index sequences in canonical (lexicographic) order.
    pub fn paths(&self) -> &[Vec<usize>] {
        &self.paths
    }

    /// Every link used by at least one path, ascending.
    pub fn links(&self) -> &[usize] {
        &self.links
    }

    pub fn latency_us(&self) -> u64 {
        self.latency_us
    }

    pub fn common_latency_ms(&self) -> f64 {
        self.latency_us as f64 / 1000.0
    }

    /// Per-link load added by splitting `demand` across the paths.
    ///
    /// Each path carries `demand / n`, the canonically-first path also takes
    /// the remainder. Links shared by several paths accumulate their shares.
    /// The returned list covers every link of the set (zero entries included)
    /// and is sorted by link index.
    pub fn link_loads(&self, demand: Bps) -> Vec<(usize, Bps)> {
        let n = self.paths.len() as Bps;
        let share = demand / n;
        let remainder = demand % n;
        let mut loads: Vec<(usize, Bps)> = self.links.iter().map(|&l| (l, 0)).collect();
        for (i, links) in self.path_links.iter().enumerate() {
            let amount = if i == 0 { share + remainder } else { share };
            for l in links {
                let slot = loads
                    .binary_search_by_key(l, |&(k, _)| k)
                    .expect("link in union");
                loads[slot].1 += amount;
            }
        }
        loads
    }

    fn truncate_to_first(&mut self) {
        self.paths.truncate(1);
        self.path_links.truncate(1);
        let mut links = self.path_links[0].clone();
        links.sort_unstable();
        self.links = links;
    }
}

/// Handle to one committed bandwidth reservation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReservationHandle {
    id: u64,
}

impl ReservationHandle {
    pub fn id(&self) -> u64 {
        self.id
    }
}

/// Uncommitted per-link load used for what-if admission checks.
#[derive(Clone, Debug, Default)]
pub struct LoadOverlay {
    extra: BTreeMap<usize, Bps>,
}

impl LoadOverlay {
    pub fn add(&mut self, loads: &[(usize, Bps)]) {
        for &(link, amount) in loads {
            *self.extra.entry(link).or_default() += amount;
        }
    }

    pub fn get(&self, link: usize) -> Bps {
        self.extra.get(&link).copied().unwrap_or(0)
    }

    pub fn clear(&mut self) {
        self.extra.clear();
    }
}

/// Cached path sets between every access POP and every DC, plus the link
/// sets they touch.
#[derive(Debug)]
pub struct RouteTable {
    routes: HashMap<(usize, usize), PathSet>,
    dc_links: HashMap<usize, Vec<usize>>,
    tracked_links: Vec<usize>,
}

impl RouteTable {
    /// Path set from access POP `access` to DC `dc`. `None` when they are the
    /// same node, i.e. the leg never leaves the site.
    pub fn route(&self, access: usize, dc: usize) -> Option<&PathSet> {
        self.routes.get(&(access, dc))
    }

    /// Union of links on all paths between `dc` and every access POP.
    pub fn dc_links(&self, dc: usize) -> &[usize] {
        self.dc_links.get(&dc).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Union of links on all tracked DC to access-POP paths.
    pub fn tracked_links(&self) -> &[usize] {
        &self.tracked_links
    }
}

#[derive(Clone, Debug)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    index: HashMap<String, usize>,
    adjacency: Vec<Vec<(usize, usize)>>,
    routing: RoutingMode,
    routes: Arc<RouteTable>,
    live: HashMap<u64, Vec<(usize, Bps)>>,
    next_handle: u64,
}

// ---------------------------------------------------------------------------
// File schema

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    nodes: Vec<NodeRecord>,
    links: Vec<LinkRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: String,
    role: NodeRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slots: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkRecord {
    a: String,
    b: String,
    capacity_bps: u64,
    latency_ms: f64,
}

/// Parses and validates a topology file. All reservations start at zero.
pub fn load_topology(contents: &str) -> Result<Topology> {
    load_topology_with(contents, RoutingMode::Ecmp)
}

pub fn load_topology_with(contents: &str, routing: RoutingMode) -> Result<Topology> {
    let file: TopologyFile =
        serde_json::from_str(contents).map_err(|e| Error::Schema(e.to_string()))?;
    let nodes = file
        .nodes
        .into_iter()
        .map(|n| (n.id, n.role, n.slots))
        .collect::<Vec<_>>();
    let mut links = Vec::with_capacity(file.links.len());
    for l in file.links {
        if !l.latency_ms.is_finite() || l.latency_ms < 0.0 {
            return Err(Error::InvalidLink {
                a: l.a,
                b: l.b,
                reason: format!("latency must be finite and >= 0, got {}", l.latency_ms),
            });
        }
        let latency_us = (l.latency_ms * 1000.0).round() as u64;
        links.push((l.a, l.b, l.capacity_bps, latency_us));
    }
    Topology::build(nodes, links, routing)
}

impl Topology {
    /// Builds and validates a topology from `(id, role, slots)` nodes and
    /// `(a, b, capacity_bps, latency_us)` links.
    pub fn build(
        nodes: Vec<(String, NodeRole, Option<u32>)>,
        links: Vec<(String, String, Bps, u64)>,
        routing: RoutingMode,
    ) -> Result<Topology> {
        let mut nodes: Vec<Node> = nodes
            .into_iter()
            .map(|(id, role, slots)| Node { id, role, slots })
            .collect();
        nodes.sort_by(|x, y| x.id.cmp(&y.id));
        for pair in nodes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::DuplicateNode(pair[0].id.clone()));
            }
        }
        for n in &nodes {
            match (n.role, n.slots) {
                (NodeRole::Dc, None) => {
                    return Err(Error::Schema(format!(
                        "dc node `{}` is missing `slots`",
                        n.id
                    )))
                }
                (NodeRole::Dc, Some(0)) => {
                    return Err(Error::Schema(format!("dc node `{}` has zero slots", n.id)))
                }
                (NodeRole::Access | NodeRole::Transit, Some(_)) => {
                    return Err(Error::Schema(format!(
                        "node `{}` carries `slots` but is not a dc",
                        n.id
                    )))
                }
                _ => {}
            }
        }
        if !nodes.iter().any(|n| n.role.is_access()) {
            return Err(Error::MissingRole("access"));
        }
        if !nodes.iter().any(|n| n.role.is_dc()) {
            return Err(Error::MissingRole("dc"));
        }
        let index: HashMap<String, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();

        let mut built = Vec::with_capacity(links.len());
        for (a, b, capacity, latency_us) in links {
            let invalid = |reason: &str| Error::InvalidLink {
                a: a.clone(),
                b: b.clone(),
                reason: reason.to_string(),
            };
            let ia = *index.get(&a).ok_or_else(|| Error::UnknownNode(a.clone()))?;
            let ib = *index.get(&b).ok_or_else(|| Error::UnknownNode(b.clone()))?;
            if ia == ib {
                return Err(invalid("self-loop"));
            }
            if capacity == 0 {
                return Err(invalid("capacity must be positive"));
            }
            let (lo, hi) = if ia < ib { (ia, ib) } else { (ib, ia) };
            built.push(Link {
                a: lo,
                b: hi,
                capacity,
                latency_us,
                reserved: 0,
            });
        }
        built.sort_by_key(|l| (l.a, l.b));
        for pair in built.windows(2) {
            if (pair[0].a, pair[0].b) == (pair[1].a, pair[1].b) {
                return Err(Error::InvalidLink {
                    a: nodes[pair[0].a].id.clone(),
                    b: nodes[pair[0].b].id.clone(),
                    reason: "duplicate link".into(),
                });
            }
        }

        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (li, l) in built.iter().enumerate() {
            adjacency[l.a].push((l.b, li));
            adjacency[l.b].push((l.a, li));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }

        // connectivity
        let mut seen = vec![false; nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Disconnected(nodes[i].id.clone()));
        }

        let mut topo = Topology {
            nodes,
            links: built,
            index,
            adjacency,
            routing,
            routes: Arc::new(RouteTable {
                routes: HashMap::new(),
                dc_links: HashMap::new(),
                tracked_links: Vec::new(),
            }),
            live: HashMap::new(),
            next_handle: 0,
        };
        topo.routes = Arc::new(topo.build_routes());
        Ok(topo)
    }

    fn build_routes(&self) -> RouteTable {
        let mut routes = HashMap::new();
        let mut dc_links = HashMap::new();
        let mut tracked = Vec::new();
        for dc in self.dc_nodes() {
            let mut links = Vec::new();
            for access in self.access_nodes() {
                if access == dc {
                    continue;
                }
                let ps = self.paths_between(access, dc);
                links.extend_from_slice(ps.links());
                routes.insert((access, dc), ps);
            }
            links.sort_unstable();
            links.dedup();
            tracked.extend_from_slice(&links);
            dc_links.insert(dc, links);
        }
        tracked.sort_unstable();
        tracked.dedup();
        RouteTable {
            routes,
            dc_links,
            tracked_links: tracked,
        }
    }

    /// Canonical JSON text of this topology (nodes by id, links by `(a, b)`).
    pub fn to_json(&self) -> String {
        let file = TopologyFile {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id.clone(),
                    role: n.role,
                    slots: n.slots,
                })
                .collect(),
            links: self
                .links
                .iter()
                .map(|l| LinkRecord {
                    a: self.nodes[l.a].id.clone(),
                    b: self.nodes[l.b].id.clone(),
                    capacity_bps: l.capacity,
                    latency_ms: l.latency_ms(),
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("topology serializes");
        out.push('\n');
        out
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, idx: usize) -> &Link {
        &self.links[idx]
    }

    pub fn routing(&self) -> RoutingMode {
        self.routing
    }

    pub fn node_index(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    /// Access POP indices (access and dc roles), ascending.
    pub fn access_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.role.is_access())
            .map(|(i, _)| i)
    }

    /// DC node indices, ascending.
    pub fn dc_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.role.is_dc())
            .map(|(i, _)| i)
    }

    pub fn route_table(&self) -> Arc<RouteTable> {
        Arc::clone(&self.routes)
    }

    /// Every minimum-latency path between two node ids.
    pub fn compute_paths(&self, src: &str, dst: &str) -> Result<PathSet> {
        let s = self.node_index(src)?;
        let d = self.node_index(dst)?;
        if s == d {
            return Err(Error::Config(format!(
                "path endpoints must differ, got `{src}` twice"
            )));
        }
        Ok(self.paths_between(s, d))
    }

    fn paths_between(&self, src: usize, dst: usize) -> PathSet {
        let n = self.nodes.len();
        let mut dist = vec![u64::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[src] = 0;
        heap.push(Reverse((0u64, src)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, li) in &self.adjacency[u] {
                let nd = d + self.links[li].latency_us;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((nd, v)));
                }
            }
        }

        // Walk back from dst over tight edges; a visited mask keeps paths
        // simple when zero-latency links create tight cycles.
        let mut paths = Vec::new();
        let mut stack = vec![dst];
        let mut on_path = vec![false; n];
        on_path[dst] = true;
        self.collect_tight_paths(src, dst, &dist, &mut stack, &mut on_path, &mut paths);
        for p in &mut paths {
            p.reverse();
        }
        paths.sort();

        let path_links: Vec<Vec<usize>> = paths
            .iter()
            .map(|p| {
                p.windows(2)
                    .map(|w| self.link_between(w[0], w[1]).expect("tight edge exists"))
                    .collect()
            })
            .collect();
        let mut links: Vec<usize> = path_links.iter().flatten().copied().collect();
        links.sort_unstable();
        links.dedup();
        let mut ps = PathSet {
            src,
            dst,
            paths,
            path_links,
            links,
            latency_us: dist[dst],
        };
        if self.routing == RoutingMode::SinglePath {
            ps.truncate_to_first();
        }
        ps
    }

    fn collect_tight_paths(
        &self,
        src: usize,
        at: usize,
        dist: &[u64],
        stack: &mut Vec<usize>,
        on_path: &mut [bool],
        out: &mut Vec<Vec<usize>>,
    ) {
        if at == src {
            out.push(stack.clone());
            return;
        }
        for &(prev, li) in &self.adjacency[at] {
            if on_path[prev] || dist[prev] == u64::MAX {
                continue;
            }
            if dist[prev] + self.links[li].latency_us != dist[at] {
                continue;
            }
            on_path[prev] = true;
            stack.push(prev);
            self.collect_tight_paths(src, prev, dist, stack, on_path, out);
            stack.pop();
            on_path[prev] = false;
        }
    }

    pub fn link_between(&self, u: usize, v: usize) -> Option<usize> {
        self.adjacency[u]
            .iter()
            .find(|&&(w, _)| w == v)
            .map(|&(_, li)| li)
    }

    /// Node id sequences of a path set, for display and comparison.
    pub fn path_ids(&self, ps: &PathSet) -> Vec<Vec<String>> {
        ps.paths
            .iter()
            .map(|p| p.iter().map(|&i| self.nodes[i].id.clone()).collect())
            .collect()
    }

    /// Worst link utilization over the path set after adding `extra_demand`,
    /// split as [`PathSet::link_loads`] describes.
    pub fn max_path_utilization(&self, ps: &PathSet, extra_demand: Bps) -> f64 {
        self.utilization_with(ps, extra_demand, &LoadOverlay::default())
    }

    /// Like [`Topology::max_path_utilization`] with uncommitted load from
    /// `overlay` stacked on the committed reservations.
    pub fn utilization_with(&self, ps: &PathSet, extra_demand: Bps, overlay: &LoadOverlay) -> f64 {
        ps.link_loads(extra_demand)
            .into_iter()
            .map(|(li, add)| {
                let l = &self.links[li];
                (l.reserved + overlay.get(li) + add) as f64 / l.capacity as f64
            })
            .fold(0.0, f64::max)
    }

    /// Current worst utilization among `links`; 0 for an empty set.
    pub fn max_link_utilization(&self, links: &[usize]) -> f64 {
        links
            .iter()
            .map(|&li| self.links[li].utilization())
            .fold(0.0, f64::max)
    }

    pub fn reserve(&mut self, ps: &PathSet, demand: Bps) -> ReservationHandle {
        let loads: Vec<(usize, Bps)> = ps
            .link_loads(demand)
            .into_iter()
            .filter(|&(_, amount)| amount > 0)
            .collect();
        for &(li, amount) in &loads {
            self.links[li].reserved += amount;
        }
        let id = self.next_handle;
        self.next_handle += 1;
        self.live.insert(id, loads);
        ReservationHandle { id }
    }

    pub fn release(&mut self, handle: &ReservationHandle) -> Result<()> {
        let loads = self
            .live
            .remove(&handle.id)
            .ok_or(Error::StaleHandle(handle.id))?;
        for (li, amount) in loads {
            self.links[li].reserved -= amount;
        }
        Ok(())
    }

    /// Zeroes every reservation and invalidates all outstanding handles.
    pub fn reset_network(&mut self) {
        for l in &mut self.links {
            l.reserved = 0;
        }
        self.live.clear();
    }

    pub fn live_reservations(&self) -> usize {
        self.live.len()
    }
}

/// Parameters for the synthetic topology generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub pop_count: usize,
    pub dc_count: usize,
    pub link_capacity: Bps,
    pub latency_ms: (f64, f64),
    pub avg_degree: f64,
    pub slots_per_dc: u32,
    pub seed: u64,
}

impl GeneratorParams {
    /// 11 POPs, 7 of them DCs, 10 Gb/s links.
    pub fn global_sp() -> Self {
        GeneratorParams {
            pop_count: 11,
            dc_count: 7,
            link_capacity: 10 * crate::GBPS,
            latency_ms: (1.0, 30.0),
            avg_degree: 3.0,
            slots_per_dc: crate::resources::DEFAULT_SLOTS_PER_DC,
            seed: 42,
        }
    }

    /// 5 POPs, 2 of them DCs, 80 Gb/s links.
    pub fn in_country_sp() -> Self {
        GeneratorParams {
            pop_count: 5,
            dc_count: 2,
            link_capacity: 80 * crate::GBPS,
            latency_ms: (1.0, 5.0),
            avg_degree: 3.0,
            slots_per_dc: crate::resources::DEFAULT_SLOTS_PER_DC,
            seed: 7,
        }
    }
}

/// Random connected topology: a random spanning tree plus uniformly chosen
/// extra links until the target average degree is reached.
pub fn generate_topology(params: &GeneratorParams) -> Result<Topology> {
    let n = params.pop_count;
    if n == 0 {
        return Err(Error::InfeasibleParams(
            "pop_count must be at least 1".into(),
        ));
    }
    if params.dc_count == 0 || params.dc_count > n {
        return Err(Error::InfeasibleParams(format!(
            "dc_count must be in 1..={n}, got {}",
            params.dc_count
        )));
    }
    if params.avg_degree.is_nan() || params.avg_degree < 2.0 {
        return Err(Error::InfeasibleParams(format!(
            "avg_degree must be >= 2, got {}",
            params.avg_degree
        )));
    }
    let (lat_lo, lat_hi) = params.latency_ms;
    if !(lat_lo.is_finite() && lat_hi.is_finite() && 0.0 <= lat_lo && lat_lo <= lat_hi) {
        return Err(Error::InfeasibleParams(format!(
            "latency range [{lat_lo}, {lat_hi}] is invalid"
        )));
    }
    if params.link_capacity == 0 {
        return Err(Error::InfeasibleParams(
            "link capacity must be positive".into(),
        ));
    }
    if params.slots_per_dc == 0 {
        return Err(Error::InfeasibleParams(
            "slots_per_dc must be positive".into(),
        ));
    }
    let max_edges = n * (n - 1) / 2;
    let target_edges = (params.avg_degree * n as f64 / 2.0).round() as usize;
    if target_edges > max_edges {
        return Err(Error::InfeasibleParams(format!(
            "average degree {} needs {target_edges} links but {n} nodes allow at most {max_edges}",
            params.avg_degree
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let width = (n - 1).to_string().len().max(2);
    let ids: Vec<String> = (0..n).map(|i| format!("pop{i:0width$}")).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut dcs = order[..params.dc_count].to_vec();
    dcs.sort_unstable();

    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(target_edges);
    let mut present = vec![vec![false; n]; n];
    let mut tree: Vec<usize> = (0..n).collect();
    tree.shuffle(&mut rng);
    for i in 1..n {
        let u = tree[i];
        let v = tree[rng.gen_range(0..i)];
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        present[a][b] = true;
        edges.push((a, b));
    }
    let mut missing: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| !present[a][b])
        .collect();
    missing.shuffle(&mut rng);
    let extra = target_edges.saturating_sub(edges.len());
    edges.extend(missing.into_iter().take(extra));
    edges.sort_unstable();

    let lo_us = (lat_lo * 1000.0).round() as u64;
    let hi_us = (lat_hi * 1000.0).round() as u64;
    let links = edges
        .into_iter()
        .map(|(a, b)| {
            let latency_us = rng.gen_range(lo_us..=hi_us);
            (
                ids[a].clone(),
                ids[b].clone(),
                params.link_capacity,
                latency_us,
            )
        })
        .collect();
    let nodes = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            if dcs.binary_search(&i).is_ok() {
                (id.clone(), NodeRole::Dc, Some(params.slots_per_dc))
            } else {
                (id.clone(), NodeRole::Access, None)
            }
        })
        .collect();
    Topology::build(nodes, links, RoutingMode::Ecmp)
}

impl Topology {
    /// Same graph and reservations with a different routing mode.
    pub fn with_routing(&self, routing: RoutingMode) -> Topology {
        let mut topo = self.clone();
        topo.routing = routing;
        topo.routes = Arc::new(topo.build_routes());
        topo
    }
}
