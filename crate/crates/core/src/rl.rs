//! Tabular Q-learning over discretized network/DC state. The agent does not
//! pick a DC directly: each action is one of the optimisation policies, and
//! the controller then applies that policy to the feasible sites.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{ControllerConfig, Environment, PlacementOutcome, Policy};
use crate::error::{Error, Result};
use crate::resources::SlotQuantum;
use crate::workload::{generate_workload, WorkloadGenConfig, WorkloadSpec, DEMAND_CHOICES};

pub const ACTION_COUNT: usize = Policy::ACTIONS.len();
pub const FAILURE_REWARD: f64 = -1000.0;
/// Placements per reward-log window.
pub const LOG_WINDOW: usize = 1000;

/// Which links the reward's max-path-utilization term looks at.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardScope {
    /// Every tracked DC to access-POP path in the network.
    #[default]
    Global,
    /// Only the paths of the workload just placed.
    Workload,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Steps over which epsilon falls linearly from start to end.
    pub epsilon_decay_steps: u64,
    pub util_bins: u16,
    pub slot_bins: u16,
    /// Append the workload's demand class and slot count to the state.
    pub workload_features: bool,
    pub reward_scope: RewardScope,
    /// Policy used in states the table has never visited.
    pub fallback: Policy,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            alpha: 0.1,
            gamma: 0.9,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 80_000,
            util_bins: 4,
            slot_bins: 4,
            workload_features: true,
            reward_scope: RewardScope::Global,
            fallback: Policy::PathUtilOpt,
        }
    }
}

impl Hyperparams {
    /// Defaults with epsilon decaying over the first 80% of `workload_count`.
    pub fn for_workloads(workload_count: u64) -> Self {
        Hyperparams {
            epsilon_decay_steps: (workload_count * 4 / 5).max(1),
            ..Hyperparams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must be in (0, 1], got {}", self.alpha));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must be in [0, 1), got {}", self.gamma));
        }
        for (name, e) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&e) {
                return bad(format!("{name} must be in [0, 1], got {e}"));
            }
        }
        if self.util_bins == 0 || self.slot_bins == 0 {
            return bad("bin counts must be positive".into());
        }
        if self.fallback.action_index().is_none() {
            return bad(format!(
                "fallback must be an optimisation policy, got {}",
                self.fallback
            ));
        }
        Ok(())
    }

    pub fn epsilon_at(&self, step: u64) -> f64 {
        if step >= self.epsilon_decay_steps {
            return self.epsilon_end;
        }
        let frac = step as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// Discretized state: per DC a utilization bin and a slots-free bin, then
/// optionally the workload's demand class and slot count.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateKey(pub Vec<u16>);

/// Equal-width bin on `[0, 1]`; 1.0 (and anything above) lands in the top bin.
pub fn bin(value: f64, bins: u16) -> u16 {
    let v = value.clamp(0.0, 1.0);
    ((v * bins as f64).floor() as u16).min(bins - 1)
}

/// Index of the demand in the generator's bandwidth menu, or of the nearest
/// menu entry not below it.
pub fn demand_class(demand: u64) -> u16 {
    DEMAND_CHOICES
        .iter()
        .position(|&d| demand <= d)
        .unwrap_or(DEMAND_CHOICES.len() - 1) as u16
}

pub fn encode_state(env: &Environment, workload: &WorkloadSpec, hp: &Hyperparams) -> StateKey {
    let routes = env.topology.route_table();
    let clusters = env.inventory.clusters();
    let mut key = Vec::with_capacity(clusters.len() * 2 + 2);
    for c in clusters {
        let util = env
            .topology
            .max_link_utilization(routes.dc_links(c.dc_node));
        key.push(bin(util, hp.util_bins));
    }
    for c in clusters {
        key.push(bin(
            c.free_slots as f64 / c.total_slots as f64,
            hp.slot_bins,
        ));
    }
    if hp.workload_features {
        key.push(demand_class(workload.demand_bw_bps));
        key.push(workload.slots(env.inventory.quantum()).min(u16::MAX as u32) as u16);
    }
    StateKey(key)
}

/// Worst current utilization over all tracked DC to access-POP paths.
pub fn global_max_utilization(env: &Environment) -> f64 {
    let routes = env.topology.route_table();
    env.topology.max_link_utilization(routes.tracked_links())
}

fn score(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// `score(1 - max path utilization) + score(slots free fraction)` after a
/// placement, or [`FAILURE_REWARD`] when nothing could be placed.
pub fn reward(outcome: &PlacementOutcome, env: &Environment, scope: RewardScope) -> f64 {
    match outcome {
        PlacementOutcome::Infeasible { .. } => FAILURE_REWARD,
        PlacementOutcome::Placed { evaluation, .. } => {
            let util = match scope {
                RewardScope::Global => global_max_utilization(env),
                RewardScope::Workload => evaluation.worst_util_after,
            };
            score(1.0 - util) + score(env.inventory.slots_free_fraction())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QEntry {
    pub values: [f64; ACTION_COUNT],
    pub visits: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    pub hyperparams: Hyperparams,
    pub quantum: SlotQuantum,
    /// DC node ids in the order the state key lists them.
    pub dc_order: Vec<String>,
    entries: BTreeMap<StateKey, QEntry>,
}

fn greedy_index(values: &[f64; ACTION_COUNT]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl QTable {
    pub fn new(hyperparams: Hyperparams, env: &Environment) -> QTable {
        QTable {
            hyperparams,
            quantum: *env.inventory.quantum(),
            dc_order: env
                .inventory
                .clusters()
                .iter()
                .map(|c| env.topology.node(c.dc_node).id().to_string())
                .collect(),
            entries: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&StateKey, &QEntry)> {
        self.entries.iter()
    }

    pub fn entry(&self, state: &StateKey) -> Option<&QEntry> {
        self.entries.get(state)
    }

    /// Action values; all zero for unvisited states.
    pub fn values(&self, state: &StateKey) -> [f64; ACTION_COUNT] {
        self.entries
            .get(state)
            .map(|e| e.values)
            .unwrap_or([0.0; ACTION_COUNT])
    }

    /// One-step Q-learning update of `(state, action)`. Terminal transitions
    /// bootstrap from zero.
    pub fn update(
        &mut self,
        state: &StateKey,
        action: usize,
        reward: f64,
        next: &StateKey,
        terminal: bool,
    ) -> f64 {
        let future = if terminal {
            0.0
        } else {
            let v = self.values(next);
            v[greedy_index(&v)]
        };
        let alpha = self.hyperparams.alpha;
        let gamma = self.hyperparams.gamma;
        let entry = self.entries.entry(state.clone()).or_insert(QEntry {
            values: [0.0; ACTION_COUNT],
            visits: 0,
        });
        let q = &mut entry.values[action];
        *q += alpha * (reward + gamma * future - *q);
        entry.visits += 1;
        *q
    }

    /// Greedy policy; unvisited states use the configured fallback.
    pub fn act_greedy(&self, state: &StateKey) -> Policy {
        match self.entries.get(state) {
            Some(e) => Policy::ACTIONS[greedy_index(&e.values)],
            None => self.hyperparams.fallback,
        }
    }

    /// Errors unless the table was trained for the same DC set, slot quantum
    /// and (when given) bin counts.
    pub fn check_compatible(&self, env: &Environment, bins: Option<(u16, u16)>) -> Result<()> {
        let expected = QTable::new(self.hyperparams.clone(), env);
        if expected.dc_order != self.dc_order {
            return Err(Error::QTableMismatch(format!(
                "table covers DCs {:?}, topology has {:?}",
                self.dc_order, expected.dc_order
            )));
        }
        if expected.quantum != self.quantum {
            return Err(Error::QTableMismatch(format!(
                "table uses slot quantum {:?}, evaluation uses {:?}",
                self.quantum, expected.quantum
            )));
        }
        if let Some((u, s)) = bins {
            if (u, s) != (self.hyperparams.util_bins, self.hyperparams.slot_bins) {
                return Err(Error::QTableMismatch(format!(
                    "table bins (util {}, slots {}), expected (util {u}, slots {s})",
                    self.hyperparams.util_bins, self.hyperparams.slot_bins
                )));
            }
        }
        Ok(())
    }
}

/// Epsilon-greedy: uniform action with probability `epsilon`, else the
/// greedy one (lowest index on ties).
pub fn select_action<R: Rng + ?Sized>(
    qtable: &QTable,
    state: &StateKey,
    epsilon: f64,
    rng: &mut R,
) -> usize {
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..ACTION_COUNT)
    } else {
        greedy_index(&qtable.values(state))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QTableHeader {
    hyperparams: Hyperparams,
    quantum: SlotQuantum,
    dc_order: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QTableFile {
    header: QTableHeader,
    entries: Vec<(StateKey, [f64; ACTION_COUNT], u64)>,
}

pub fn save_qtable(table: &QTable) -> String {
    let file = QTableFile {
        header: QTableHeader {
            hyperparams: table.hyperparams.clone(),
            quantum: table.quantum,
            dc_order: table.dc_order.clone(),
        },
        entries: table
            .entries
            .iter()
            .map(|(k, e)| (k.clone(), e.values, e.visits))
            .collect(),
    };
    let mut out = serde_json::to_string(&file).expect("q-table serializes");
    out.push('\n');
    out
}

/// Parses a Q-table file without checking it against any environment.
pub fn parse_qtable(text: &str) -> Result<QTable> {
    let file: QTableFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    file.header.hyperparams.validate()?;
    let dcs = file.header.dc_order.len();
    let key_len = dcs * 2
        + if file.header.hyperparams.workload_features {
            2
        } else {
            0
        };
    let mut entries = BTreeMap::new();
    for (key, values, visits) in file.entries {
        if key.0.len() != key_len {
            return Err(Error::Schema(format!(
                "state {:?} has length {}, expected {key_len}",
                key.0,
                key.0.len()
            )));
        }
        entries.insert(key, QEntry { values, visits });
    }
    Ok(QTable {
        hyperparams: file.header.hyperparams,
        quantum: file.header.quantum,
        dc_order: file.header.dc_order,
        entries,
    })
}

/// Parses a Q-table and rejects it unless it matches `env` (and `bins`).
pub fn load_qtable(text: &str, env: &Environment, bins: Option<(u16, u16)>) -> Result<QTable> {
    let table = parse_qtable(text)?;
    table.check_compatible(env, bins)?;
    Ok(table)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardWindow {
    pub window_index: usize,
    pub total_reward: f64,
    pub placements_failed: u64,
}

/// Total reward per [`LOG_WINDOW`] placement attempts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RewardLog {
    pub windows: Vec<RewardWindow>,
}

impl RewardLog {
    fn record(&mut self, step: usize, reward: f64, failed: bool) {
        let idx = step / LOG_WINDOW;
        if self.windows.len() <= idx {
            self.windows.push(RewardWindow {
                window_index: idx,
                total_reward: 0.0,
                placements_failed: 0,
            });
        }
        let w = &mut self.windows[idx];
        w.total_reward += reward;
        w.placements_failed += failed as u64;
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        for w in &self.windows {
            wtr.serialize(w)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

const WORKLOAD_STREAM: u64 = 0;
const EXPLORE_STREAM: u64 = 1;
const POLICY_STREAM: u64 = 2;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trains a Q-table on `workload_count` generated workloads.
///
/// A failed placement is a terminal transition with reward −1000, after
/// which the environment is cleared and training continues on the empty
/// network. A placement that drives some tracked path to 100% utilization
/// also ends the episode.
pub fn train(
    template: &Environment,
    workload_count: usize,
    hyperparams: &Hyperparams,
    controller: &ControllerConfig,
    generator: &WorkloadGenConfig,
    seed: u64,
) -> Result<(QTable, RewardLog)> {
    hyperparams.validate()?;
    if workload_count == 0 {
        return Err(Error::Config("training needs at least one workload".into()));
    }
    let mut env = template.clone();
    env.reset();
    let mut table = QTable::new(hyperparams.clone(), &env);
    let mut log = RewardLog::default();
    let mut workload_rng = rng_for(seed, WORKLOAD_STREAM);
    let mut explore_rng = rng_for(seed, EXPLORE_STREAM);
    let mut policy_rng = rng_for(seed, POLICY_STREAM);

    let mut current = generate_workload(&mut workload_rng, &env.topology, generator);
    for step in 0..workload_count {
        let state = encode_state(&env, &current, hyperparams);
        let epsilon = hyperparams.epsilon_at(step as u64);
        let action = select_action(&table, &state, epsilon, &mut explore_rng);
        let outcome = env.place(
            &current,
            Policy::ACTIONS[action],
            controller,
            &mut policy_rng,
        )?;
        let r = reward(&outcome, &env, hyperparams.reward_scope);
        let placed = outcome.is_placed();
        let next = generate_workload(&mut workload_rng, &env.topology, generator);
        let terminal = !placed || global_max_utilization(&env) >= 1.0;
        if terminal {
            table.update(&state, action, r, &state, true);
            env.reset();
        } else {
            let next_state = encode_state(&env, &next, hyperparams);
            table.update(&state, action, r, &next_state, false);
        }
        log.record(step, r, !placed);
        current = next;
    }
    Ok((table, log))
}
