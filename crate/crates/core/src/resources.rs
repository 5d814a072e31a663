//! Slot-based DC capacity model.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Topology;

pub const DEFAULT_SLOTS_PER_DC: u32 = 500;

/// One slot: the bundle of vCPU, memory and storage a workload consumes in
/// whole units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotQuantum {
    pub vcpus: u32,
    pub memory_gb: u32,
    pub storage_gb: u32,
}

impl Default for SlotQuantum {
    fn default() -> Self {
        SlotQuantum {
            vcpus: 2,
            memory_gb: 4,
            storage_gb: 256,
        }
    }
}

impl SlotQuantum {
    pub fn new(vcpus: u32, memory_gb: u32, storage_gb: u32) -> Result<Self> {
        if vcpus == 0 || memory_gb == 0 || storage_gb == 0 {
            return Err(Error::Config(format!(
                "slot quantum components must be positive, got ({vcpus}, {memory_gb}, {storage_gb})"
            )));
        }
        Ok(SlotQuantum {
            vcpus,
            memory_gb,
            storage_gb,
        })
    }

    /// Parses `V,M,H`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        let bad = || Error::Config(format!("quantum must look like V,M,H, got `{text}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut vals = [0u32; 3];
        for (v, p) in vals.iter_mut().zip(&parts) {
            *v = p.parse().map_err(|_| bad())?;
        }
        SlotQuantum::new(vals[0], vals[1], vals[2])
    }
}

/// Slots needed for a `(vcpus, memory, storage)` request: the largest
/// per-resource ceiling, at least 1.
pub fn slots_required(vcpus: u32, memory_gb: u32, storage_gb: u32, quantum: &SlotQuantum) -> u32 {
    vcpus
        .div_ceil(quantum.vcpus)
        .max(memory_gb.div_ceil(quantum.memory_gb))
        .max(storage_gb.div_ceil(quantum.storage_gb))
        .max(1)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterState {
    pub dc_node: usize,
    pub total_slots: u32,
    pub free_slots: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocationHandle {
    id: u64,
}

impl AllocationHandle {
    pub fn id(&self) -> u64 {
        self.id
    }
}

/// One cluster per DC node, in ascending node order.
#[derive(Clone, Debug)]
pub struct DcInventory {
    clusters: Vec<ClusterState>,
    names: Vec<String>,
    quantum: SlotQuantum,
    live: HashMap<u64, (usize, u32)>,
    next_handle: u64,
}

impl DcInventory {
    /// Builds the inventory from the slot capacities on the topology's DC
    /// nodes.
    pub fn from_topology(topology: &Topology, quantum: SlotQuantum) -> DcInventory {
        let mut clusters = Vec::new();
        let mut names = Vec::new();
        for dc in topology.dc_nodes() {
            let node = topology.node(dc);
            let total = node.slots().expect("dc nodes carry slots");
            clusters.push(ClusterState {
                dc_node: dc,
                total_slots: total,
                free_slots: total,
            });
            names.push(node.id().to_string());
        }
        DcInventory {
            clusters,
            names,
            quantum,
            live: HashMap::new(),
            next_handle: 0,
        }
    }

    pub fn quantum(&self) -> &SlotQuantum {
        &self.quantum
    }

    pub fn clusters(&self) -> &[ClusterState] {
        &self.clusters
    }

    pub fn cluster(&self, dc_node: usize) -> Option<&ClusterState> {
        self.position(dc_node).map(|i| &self.clusters[i])
    }

    fn position(&self, dc_node: usize) -> Option<usize> {
        self.clusters
            .binary_search_by_key(&dc_node, |c| c.dc_node)
            .ok()
    }

    /// Free slots over total slots, summed across all clusters.
    pub fn slots_free_fraction(&self) -> f64 {
        let (free, total) = self.clusters.iter().fold((0u64, 0u64), |(f, t), c| {
            (f + c.free_slots as u64, t + c.total_slots as u64)
        });
        if total == 0 {
            return 0.0;
        }
        free as f64 / total as f64
    }

    pub fn allocate(&mut self, dc_node: usize, slots: u32) -> Result<AllocationHandle> {
        let pos = self
            .position(dc_node)
            .ok_or_else(|| Error::UnknownNode(format!("#{dc_node} (not a dc)")))?;
        let cluster = &mut self.clusters[pos];
        if cluster.free_slots < slots {
            return Err(Error::InsufficientSlots {
                dc: self.names[pos].clone(),
                free: cluster.free_slots,
                requested: slots,
            });
        }
        cluster.free_slots -= slots;
        let id = self.next_handle;
        self.next_handle += 1;
        self.live.insert(id, (pos, slots));
        Ok(AllocationHandle { id })
    }

    pub fn release(&mut self, handle: &AllocationHandle) -> Result<()> {
        let (pos, slots) = self
            .live
            .remove(&handle.id)
            .ok_or(Error::StaleHandle(handle.id))?;
        self.clusters[pos].free_slots += slots;
        Ok(())
    }

    /// Frees every cluster and invalidates all outstanding handles.
    pub fn reset_inventory(&mut self) {
        for c in &mut self.clusters {
            c.free_slots = c.total_slots;
        }
        self.live.clear();
    }

    pub fn live_allocations(&self) -> usize {
        self.live.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{NodeRole, RoutingMode};
    use proptest::prelude::*;

    fn two_dcs(a: u32, b: u32) -> (Topology, DcInventory) {
        let topo = Topology::build(
            vec![
                ("a".into(), NodeRole::Dc, Some(a)),
                ("b".into(), NodeRole::Dc, Some(b)),
            ],
            vec![("a".into(), "b".into(), 1000, 1000)],
            RoutingMode::Ecmp,
        )
        .unwrap();
        let inv = DcInventory::from_topology(&topo, SlotQuantum::default());
        (topo, inv)
    }

    #[test]
    fn slot_counts() {
        let q = SlotQuantum::default();
        assert_eq!(slots_required(2, 4, 256, &q), 1);
        assert_eq!(slots_required(8, 4, 512, &q), 4);
        assert_eq!(slots_required(8, 16, 1024, &q), 4);
        assert_eq!(slots_required(3, 1, 1, &q), 2);
    }

    #[test]
    fn quantum_parsing() {
        assert_eq!(
            SlotQuantum::parse("2,4,256").unwrap(),
            SlotQuantum::default()
        );
        assert!(SlotQuantum::parse("2,0,256").is_err());
        assert!(SlotQuantum::parse("2,4").is_err());
        assert!(SlotQuantum::parse("a,b,c").is_err());
    }

    #[test]
    fn free_fraction() {
        let (_, mut inv) = two_dcs(100, 200);
        assert_eq!(inv.slots_free_fraction(), 1.0);
        inv.allocate(0, 50).unwrap();
        inv.allocate(1, 50).unwrap();
        assert!((inv.slots_free_fraction() - 200.0 / 300.0).abs() < 1e-12);
        inv.allocate(0, 50).unwrap();
        inv.allocate(1, 150).unwrap();
        assert_eq!(inv.slots_free_fraction(), 0.0);
    }

    #[test]
    fn allocate_and_release() {
        let (_, mut inv) = two_dcs(10, 10);
        let h = inv.allocate(0, 4).unwrap();
        assert_eq!(inv.cluster(0).unwrap().free_slots, 6);
        inv.release(&h).unwrap();
        assert_eq!(inv.cluster(0).unwrap().free_slots, 10);
        assert!(matches!(inv.release(&h), Err(Error::StaleHandle(_))));
    }

    #[test]
    fn insufficient_slots() {
        let (_, mut inv) = two_dcs(3, 10);
        let err = inv.allocate(0, 4).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientSlots {
                free: 3,
                requested: 4,
                ..
            }
        ));
        assert_eq!(inv.cluster(0).unwrap().free_slots, 3);
    }

    #[test]
    fn partial_release_and_reset() {
        let (_, mut inv) = two_dcs(10, 10);
        let h1 = inv.allocate(1, 2).unwrap();
        let _h2 = inv.allocate(1, 3).unwrap();
        inv.release(&h1).unwrap();
        assert_eq!(inv.cluster(1).unwrap().free_slots, 7);
        inv.reset_inventory();
        assert!(inv.clusters().iter().all(|c| c.free_slots == c.total_slots));
        assert_eq!(inv.live_allocations(), 0);
    }

    proptest! {
        #[test]
        fn slots_cover_request_minimally(
            v in 1u32..64, m in 1u32..256, h in 1u32..8192,
            qv in 1u32..8, qm in 1u32..16, qh in 1u32..1024,
        ) {
            let q = SlotQuantum::new(qv, qm, qh).unwrap();
            let s = slots_required(v, m, h, &q);
            prop_assert!(s >= 1);
            prop_assert!(s * qv >= v && s * qm >= m && s * qh >= h);
            let t = s - 1;
            prop_assert!(t * qv < v || t * qm < m || t * qh < h);
        }
    }
}
