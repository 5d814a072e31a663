//! Workload model, the seeded workload generator and stream files.

use std::hash::{DefaultHasher, Hash, Hasher};

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resources::{slots_required, SlotQuantum};
use crate::topology::Topology;
use crate::{Bps, MBPS};

pub const VCPU_CHOICES: [u32; 3] = [2, 4, 8];
pub const MEMORY_GB_CHOICES: [u32; 3] = [4, 8, 16];
pub const STORAGE_GB_CHOICES: [u32; 3] = [256, 512, 1024];
pub const DEMAND_CHOICES: [Bps; 3] = [128 * MBPS, 256 * MBPS, 512 * MBPS];

/// A workload: DC resources plus one equal-bandwidth demand leg from each
/// access POP to whichever DC hosts it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub vcpus: u32,
    pub memory_gb: u32,
    pub storage_gb: u32,
    /// A-end node ids, ascending.
    pub access_pops: Vec<String>,
    pub demand_bw_bps: Bps,
    pub l_max_ms: Option<f64>,
}

impl WorkloadSpec {
    pub fn slots(&self, quantum: &SlotQuantum) -> u32 {
        slots_required(self.vcpus, self.memory_gb, self.storage_gb, quantum)
    }

    /// Node indices of the access POPs.
    pub fn pop_indices(&self, topology: &Topology) -> Result<Vec<usize>> {
        self.access_pops
            .iter()
            .map(|id| {
                let i = topology.node_index(id)?;
                if topology.node(i).role().is_access() {
                    Ok(i)
                } else {
                    Err(Error::Schema(format!("`{id}` is not an access POP")))
                }
            })
            .collect()
    }

    fn validate(&self, topology: &Topology) -> Result<()> {
        if self.vcpus == 0 || self.memory_gb == 0 || self.storage_gb == 0 {
            return Err(Error::Schema("workload resources must be positive".into()));
        }
        if self.access_pops.is_empty() {
            return Err(Error::Schema("workload has no access POPs".into()));
        }
        if let Some(l) = self.l_max_ms {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::Schema(format!("l_max_ms must be >= 0, got {l}")));
            }
        }
        self.pop_indices(topology)?;
        Ok(())
    }
}

/// How many access POPs each workload is accessed from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PopSelection {
    /// Size drawn uniformly from `1..=A`, then a uniform subset of that size.
    #[default]
    Subset,
    /// Uniform subset of exactly `k` POPs (capped at `A`).
    Fixed(usize),
    /// Every access POP.
    All,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkloadGenConfig {
    pub pop_selection: PopSelection,
    /// Latency bound stamped on every generated workload.
    pub l_max_ms: Option<f64>,
}

pub fn generate_workload<R: Rng + ?Sized>(
    rng: &mut R,
    topology: &Topology,
    config: &WorkloadGenConfig,
) -> WorkloadSpec {
    let vcpus = VCPU_CHOICES[rng.gen_range(0..3)];
    let memory_gb = MEMORY_GB_CHOICES[rng.gen_range(0..3)];
    let storage_gb = STORAGE_GB_CHOICES[rng.gen_range(0..3)];
    let demand_bw_bps = DEMAND_CHOICES[rng.gen_range(0..3)];

    let access: Vec<usize> = topology.access_nodes().collect();
    let k = match config.pop_selection {
        PopSelection::Subset => rng.gen_range(1..=access.len()),
        PopSelection::Fixed(k) => k.clamp(1, access.len()),
        PopSelection::All => access.len(),
    };
    let mut picked: Vec<usize> = sample(rng, access.len(), k)
        .into_iter()
        .map(|i| access[i])
        .collect();
    picked.sort_unstable();

    WorkloadSpec {
        vcpus,
        memory_gb,
        storage_gb,
        access_pops: picked
            .into_iter()
            .map(|i| topology.node(i).id().to_string())
            .collect(),
        demand_bw_bps,
        l_max_ms: config.l_max_ms,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadStream {
    pub seed: u64,
    pub workloads: Vec<WorkloadSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StreamHeader {
    seed: u64,
    count: usize,
}

/// `count` workloads from a generator seeded with `seed`.
pub fn generate_stream(
    seed: u64,
    count: usize,
    topology: &Topology,
    config: &WorkloadGenConfig,
) -> Result<WorkloadStream> {
    if count == 0 {
        return Err(Error::Config("workload count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let workloads = (0..count)
        .map(|_| generate_workload(&mut rng, topology, config))
        .collect();
    Ok(WorkloadStream { seed, workloads })
}

impl WorkloadStream {
    pub fn len(&self) -> usize {
        self.workloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.workloads.is_empty()
    }

    /// Line-delimited JSON: a `{"seed","count"}` header, then one workload
    /// per line.
    pub fn to_text(&self) -> String {
        let mut out = serde_json::to_string(&StreamHeader {
            seed: self.seed,
            count: self.workloads.len(),
        })
        .expect("header serializes");
        out.push('\n');
        for w in &self.workloads {
            out.push_str(&serde_json::to_string(w).expect("workload serializes"));
            out.push('\n');
        }
        out
    }

    /// Stable fingerprint of the stream content.
    pub fn digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.to_text().hash(&mut h);
        h.finish()
    }
}

pub fn save_stream(stream: &WorkloadStream) -> String {
    stream.to_text()
}

/// Parses a stream file and checks every access POP against `topology`.
pub fn load_stream(text: &str, topology: &Topology) -> Result<WorkloadStream> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Schema("stream file is empty".into()))?;
    let header: StreamHeader =
        serde_json::from_str(header).map_err(|e| Error::Schema(format!("line 1 (header): {e}")))?;
    let mut workloads = Vec::with_capacity(header.count);
    for (n, line) in lines {
        let w: WorkloadSpec = serde_json::from_str(line)
            .map_err(|e| Error::Schema(format!("line {}: {e}", n + 1)))?;
        w.validate(topology).map_err(|e| match e {
            Error::UnknownNode(id) => Error::UnknownNode(id),
            other => Error::Schema(format!("line {}: {other}", n + 1)),
        })?;
        workloads.push(w);
    }
    if workloads.is_empty() {
        return Err(Error::Schema("stream holds no workloads".into()));
    }
    if workloads.len() != header.count {
        return Err(Error::Schema(format!(
            "header announces {} workloads, found {}",
            header.count,
            workloads.len()
        )));
    }
    Ok(WorkloadStream {
        seed: header.seed,
        workloads,
    })
}
