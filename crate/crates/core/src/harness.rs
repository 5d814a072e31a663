//! Experiment orchestration: single placement runs, multi-algorithm
//! comparisons over shared workload streams, training campaigns and report
//! emission.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{
    ControllerConfig, Environment, InfeasibleReason, PlacementOutcome, Policy,
};
use crate::error::{Error, Result};
use crate::rl::{self, encode_state, Hyperparams, QTable, RewardLog};
use crate::workload::{generate_stream, WorkloadGenConfig, WorkloadStream};

pub const DEFAULT_ITERATIONS: usize = 100;
pub const DEFAULT_STREAM_LENGTH: usize = 2000;
pub const DEFAULT_TRAINING_WORKLOADS: usize = 100_000;

/// Ties in an iteration credit every tied algorithm with a win.
pub const TIE_RULE: &str = "ties credit every tied algorithm";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    Random,
    DataCentreOpt,
    PathUtilOpt,
    LatencyOpt,
    QLearning,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Random,
        Algorithm::DataCentreOpt,
        Algorithm::PathUtilOpt,
        Algorithm::LatencyOpt,
        Algorithm::QLearning,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::QLearning => "QLearning",
            other => other.fixed_policy().expect("heuristic").as_str(),
        }
    }

    /// The policy a heuristic applies to every workload.
    pub fn fixed_policy(self) -> Option<Policy> {
        match self {
            Algorithm::Random => Some(Policy::Random),
            Algorithm::DataCentreOpt => Some(Policy::DataCentreOpt),
            Algorithm::PathUtilOpt => Some(Policy::PathUtilOpt),
            Algorithm::LatencyOpt => Some(Policy::LatencyOpt),
            Algorithm::QLearning => None,
        }
    }

    /// Parses a comma-separated list such as `random,pathutilopt,qlearning`.
    pub fn parse_list(text: &str) -> Result<Vec<Algorithm>> {
        let algs = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Algorithm>>>()?;
        if algs.is_empty() {
            return Err(Error::Config("algorithm list is empty".into()));
        }
        Ok(algs)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['-', '_'], "");
        if matches!(norm.as_str(), "qlearning" | "q" | "rl") {
            return Ok(Algorithm::QLearning);
        }
        let policy: Policy = s
            .parse()
            .map_err(|_| Error::Config(format!("unknown algorithm `{s}`")))?;
        Ok(match policy {
            Policy::Random => Algorithm::Random,
            Policy::DataCentreOpt => Algorithm::DataCentreOpt,
            Policy::PathUtilOpt => Algorithm::PathUtilOpt,
            Policy::LatencyOpt => Algorithm::LatencyOpt,
        })
    }
}

impl Serialize for StopReason {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for StopReason {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "stream_exhausted" => Ok(StopReason::StreamExhausted),
            "dc_capacity" => Ok(StopReason::Infeasible(InfeasibleReason::DcCapacity)),
            "bandwidth" => Ok(StopReason::Infeasible(InfeasibleReason::Bandwidth)),
            "latency" => Ok(StopReason::Infeasible(InfeasibleReason::Latency)),
            "no_candidates" => Ok(StopReason::Infeasible(InfeasibleReason::NoCandidates)),
            other => Err(serde::de::Error::custom(format!(
                "unknown stop reason `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Infeasible(InfeasibleReason),
    StreamExhausted,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Infeasible(r) => r.as_str(),
            StopReason::StreamExhausted => "stream_exhausted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationResult {
    pub algorithm: Algorithm,
    pub iteration: usize,
    pub placed_count: usize,
    pub stop_reason: StopReason,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Keep going past infeasible workloads instead of stopping.
    pub skip_infeasible: bool,
}

/// Places the stream in order on a fresh copy of `template` until the first
/// infeasible workload (or the end of the stream).
#[allow(clippy::too_many_arguments)]
pub fn run_iteration(
    template: &Environment,
    stream: &WorkloadStream,
    algorithm: Algorithm,
    qtable: Option<&QTable>,
    controller: &ControllerConfig,
    options: RunOptions,
    iteration: usize,
    seed: u64,
) -> Result<IterationResult> {
    let table = match (algorithm, qtable) {
        (Algorithm::QLearning, None) => {
            return Err(Error::Config("QLearning needs a trained q-table".into()))
        }
        (Algorithm::QLearning, Some(t)) => {
            t.check_compatible(template, None)?;
            Some(t)
        }
        _ => None,
    };
    let mut env = template.clone();
    env.reset();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let mut placed_count = 0;
    let mut stop_reason = StopReason::StreamExhausted;
    for workload in &stream.workloads {
        let policy = match (algorithm.fixed_policy(), table) {
            (Some(p), _) => p,
            (None, Some(t)) => t.act_greedy(&encode_state(&env, workload, &t.hyperparams)),
            (None, None) => unreachable!("checked above"),
        };
        match env.place(workload, policy, controller, &mut rng)? {
            PlacementOutcome::Placed { .. } => placed_count += 1,
            PlacementOutcome::Infeasible { reason } => {
                if !options.skip_infeasible {
                    stop_reason = StopReason::Infeasible(reason);
                    break;
                }
            }
        }
    }
    Ok(IterationResult {
        algorithm,
        iteration,
        placed_count,
        stop_reason,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub iterations: usize,
    pub stream_length: usize,
    pub base_seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub controller: ControllerConfig,
    pub generator: WorkloadGenConfig,
    pub options: RunOptions,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            iterations: DEFAULT_ITERATIONS,
            stream_length: DEFAULT_STREAM_LENGTH,
            base_seed: 0,
            algorithms: Algorithm::ALL.to_vec(),
            controller: ControllerConfig::default(),
            generator: WorkloadGenConfig::default(),
            options: RunOptions::default(),
        }
    }
}

impl ComparisonConfig {
    pub fn validate(&self, has_qtable: bool) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.stream_length == 0 {
            return Err(Error::Config("stream length must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("algorithm set is empty".into()));
        }
        let mut seen = self.algorithms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return Err(Error::Config(
                "algorithm set lists an algorithm twice".into(),
            ));
        }
        if self.algorithms.contains(&Algorithm::QLearning) && !has_qtable {
            return Err(Error::Config("QLearning needs a trained q-table".into()));
        }
        Ok(())
    }

    pub fn iteration_seed(&self, iteration: usize) -> u64 {
        self.base_seed.wrapping_add(iteration as u64)
    }
}

/// Runs every algorithm on the same generated stream per iteration.
/// Iterations run in parallel; results come back ordered by iteration, then
/// by the configured algorithm order.
pub fn run_comparison(
    template: &Environment,
    config: &ComparisonConfig,
    qtable: Option<&QTable>,
) -> Result<(ComparisonReport, Vec<IterationResult>)> {
    config.validate(qtable.is_some())?;
    if let Some(t) = qtable {
        t.check_compatible(template, None)?;
    }
    let options = config.options;
    let per_iteration: Vec<Vec<IterationResult>> = (0..config.iterations)
        .into_par_iter()
        .map(|i| {
            let seed = config.iteration_seed(i);
            let stream = generate_stream(
                seed,
                config.stream_length,
                &template.topology,
                &config.generator,
            )?;
            config
                .algorithms
                .iter()
                .map(|&alg| {
                    run_iteration(
                        template,
                        &stream,
                        alg,
                        qtable,
                        &config.controller,
                        options,
                        i,
                        seed,
                    )
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let results: Vec<IterationResult> = per_iteration.into_iter().flatten().collect();
    let report = emit_report(&results)?;
    Ok((report, results))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub iterations: usize,
    pub mean: f64,
    pub min: usize,
    pub max: usize,
    /// Mean divided by the Random mean; absent without a Random baseline.
    pub normalized_mean: Option<f64>,
    pub normalized_min: Option<f64>,
    pub normalized_max: Option<f64>,
    /// Fraction of iterations in which this algorithm placed the most.
    pub win_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub tie_rule: String,
    pub iterations: usize,
    pub algorithms: Vec<AlgorithmSummary>,
}

impl ComparisonReport {
    pub fn summary(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|s| s.algorithm == algorithm)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    /// One row per `(algorithm, iteration)` with the count normalized by the
    /// Random mean.
    pub fn plot_csv(&self, results: &[IterationResult]) -> Result<String> {
        let random_mean = self
            .summary(Algorithm::Random)
            .map(|s| s.mean)
            .filter(|&m| m > 0.0);
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["algorithm", "iteration", "placed_count", "normalized"])?;
        for r in results {
            let normalized = random_mean
                .map(|m| format!("{}", r.placed_count as f64 / m))
                .unwrap_or_default();
            wtr.write_record([
                r.algorithm.as_str(),
                &r.iteration.to_string(),
                &r.placed_count.to_string(),
                &normalized,
            ])?;
        }
        Ok(String::from_utf8(wtr.into_inner().map_err(|e| e.into_error())?).expect("utf-8"))
    }
}

/// Aggregates raw results: mean/min/max per algorithm, normalization by the
/// Random mean, and win rates.
pub fn emit_report(results: &[IterationResult]) -> Result<ComparisonReport> {
    if results.is_empty() {
        return Err(Error::Config("no iteration results to report".into()));
    }
    let mut order: Vec<Algorithm> = Vec::new();
    let mut counts: HashMap<Algorithm, Vec<usize>> = HashMap::new();
    let mut best: HashMap<usize, usize> = HashMap::new();
    for r in results {
        if !order.contains(&r.algorithm) {
            order.push(r.algorithm);
        }
        counts.entry(r.algorithm).or_default().push(r.placed_count);
        let b = best.entry(r.iteration).or_insert(0);
        *b = (*b).max(r.placed_count);
    }
    let mut wins: HashMap<Algorithm, usize> = HashMap::new();
    for r in results {
        if r.placed_count == best[&r.iteration] {
            *wins.entry(r.algorithm).or_default() += 1;
        }
    }
    let mean_of = |v: &[usize]| v.iter().sum::<usize>() as f64 / v.len() as f64;
    let random_mean = counts
        .get(&Algorithm::Random)
        .map(|v| mean_of(v))
        .filter(|&m| m > 0.0);
    let algorithms = order
        .into_iter()
        .map(|alg| {
            let v = &counts[&alg];
            let mean = mean_of(v);
            let min = *v.iter().min().expect("non-empty");
            let max = *v.iter().max().expect("non-empty");
            let norm = |x: f64| random_mean.map(|m| x / m);
            AlgorithmSummary {
                algorithm: alg,
                iterations: v.len(),
                mean,
                min,
                max,
                normalized_mean: norm(mean),
                normalized_min: norm(min as f64),
                normalized_max: norm(max as f64),
                win_rate: wins.get(&alg).copied().unwrap_or(0) as f64 / v.len() as f64,
            }
        })
        .collect();
    Ok(ComparisonReport {
        tie_rule: TIE_RULE.to_string(),
        iterations: best.len(),
        algorithms,
    })
}

pub fn results_to_csv(results: &[IterationResult]) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for r in results {
        wtr.serialize(r)?;
    }
    Ok(String::from_utf8(wtr.into_inner().map_err(|e| e.into_error())?).expect("utf-8"))
}

pub fn results_from_csv(text: &str) -> Result<Vec<IterationResult>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub workload_count: usize,
    pub hyperparams: Hyperparams,
    pub controller: ControllerConfig,
    pub generator: WorkloadGenConfig,
    pub seed: u64,
}

impl TrainingConfig {
    pub fn new(workload_count: usize, seed: u64) -> Self {
        TrainingConfig {
            workload_count,
            hyperparams: Hyperparams::for_workloads(workload_count as u64),
            controller: ControllerConfig::default(),
            generator: WorkloadGenConfig::default(),
            seed,
        }
    }
}

pub fn run_training(
    template: &Environment,
    config: &TrainingConfig,
) -> Result<(QTable, RewardLog)> {
    rl::train(
        template,
        config.workload_count,
        &config.hyperparams,
        &config.controller,
        &config.generator,
        config.seed,
    )
}

/// Writes the Q-table and reward log produced by [`run_training`].
pub fn write_training_outputs(
    table: &QTable,
    log: &RewardLog,
    qtable_path: &Path,
    reward_log_path: &Path,
) -> Result<()> {
    fs::write(qtable_path, rl::save_qtable(table))?;
    fs::write(reward_log_path, log.to_csv())?;
    Ok(())
}

/// Writes the raw results CSV, the JSON summary and, next to the summary, a
/// plot-ready CSV (`<summary stem>.plot.csv`).
pub fn write_comparison_outputs(
    report: &ComparisonReport,
    results: &[IterationResult],
    results_path: &Path,
    summary_path: &Path,
) -> Result<()> {
    fs::write(results_path, results_to_csv(results)?)?;
    fs::write(summary_path, report.to_json())?;
    fs::write(
        summary_path.with_extension("plot.csv"),
        report.plot_csv(results)?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(alg: Algorithm, iteration: usize, placed: usize) -> IterationResult {
        IterationResult {
            algorithm: alg,
            iteration,
            placed_count: placed,
            stop_reason: StopReason::Infeasible(InfeasibleReason::Bandwidth),
        }
    }

    #[test]
    fn algorithm_names() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!(
            "q-learning".parse::<Algorithm>().unwrap(),
            Algorithm::QLearning
        );
        assert_eq!(
            Algorithm::parse_list("random, PathUtilOpt").unwrap(),
            vec![Algorithm::Random, Algorithm::PathUtilOpt]
        );
        assert!(Algorithm::parse_list("").is_err());
        assert!(Algorithm::parse_list("random,greedy").is_err());
    }

    #[test]
    fn single_result_report() {
        let rep = emit_report(&[r(Algorithm::LatencyOpt, 0, 42)]).unwrap();
        let s = &rep.algorithms[0];
        assert_eq!((s.mean, s.min, s.max), (42.0, 42, 42));
        assert_eq!(s.win_rate, 1.0);
        assert_eq!(s.normalized_mean, None);
    }

    #[test]
    fn random_normalizes_to_one() {
        let rep = emit_report(&[r(Algorithm::Random, 0, 30), r(Algorithm::Random, 1, 41)]).unwrap();
        assert_eq!(rep.algorithms[0].normalized_mean, Some(1.0));
    }

    #[test]
    fn fixture_matches_hand_arithmetic() {
        // mean/min/max and win counts worked out by hand:
        //   Random:      10, 12, 14 -> mean 12
        //   PathUtilOpt: 15, 12, 20 -> mean 47/3, wins iters 0,1(tie),2
        //   QLearning:   11, 12, 13 -> mean 12, win iter 1 (tie)
        let raw = [
            r(Algorithm::Random, 0, 10),
            r(Algorithm::PathUtilOpt, 0, 15),
            r(Algorithm::QLearning, 0, 11),
            r(Algorithm::Random, 1, 12),
            r(Algorithm::PathUtilOpt, 1, 12),
            r(Algorithm::QLearning, 1, 12),
            r(Algorithm::Random, 2, 14),
            r(Algorithm::PathUtilOpt, 2, 20),
            r(Algorithm::QLearning, 2, 13),
        ];
        let rep = emit_report(&raw).unwrap();
        assert_eq!(rep.iterations, 3);
        let pu = rep.summary(Algorithm::PathUtilOpt).unwrap();
        assert!((pu.mean - 47.0 / 3.0).abs() < 1e-12);
        assert_eq!((pu.min, pu.max), (12, 20));
        assert!((pu.normalized_mean.unwrap() - 47.0 / 36.0).abs() < 1e-12);
        assert_eq!(pu.normalized_max, Some(20.0 / 12.0));
        assert_eq!(pu.win_rate, 1.0);
        let q = rep.summary(Algorithm::QLearning).unwrap();
        assert!((q.win_rate - 1.0 / 3.0).abs() < 1e-12);
        let rnd = rep.summary(Algorithm::Random).unwrap();
        assert!((rnd.win_rate - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(rnd.normalized_mean, Some(1.0));
    }

    #[test]
    fn empty_report_is_an_error() {
        assert!(emit_report(&[]).is_err());
    }

    #[test]
    fn results_csv_round_trip() {
        let raw = vec![
            r(Algorithm::Random, 0, 10),
            IterationResult {
                algorithm: Algorithm::QLearning,
                iteration: 0,
                placed_count: 7,
                stop_reason: StopReason::StreamExhausted,
            },
        ];
        let text = results_to_csv(&raw).unwrap();
        assert_eq!(
            text,
            "algorithm,iteration,placed_count,stop_reason\n\
             Random,0,10,bandwidth\nQLearning,0,7,stream_exhausted\n"
        );
        assert_eq!(results_from_csv(&text).unwrap(), raw);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ComparisonConfig::default();
        assert!(cfg.validate(true).is_ok());
        assert!(cfg.validate(false).is_err());
        cfg.algorithms = vec![Algorithm::Random, Algorithm::Random];
        assert!(cfg.validate(false).is_err());
        cfg.algorithms = vec![];
        assert!(cfg.validate(false).is_err());
        cfg.algorithms = vec![Algorithm::Random];
        cfg.iterations = 0;
        assert!(cfg.validate(false).is_err());
    }
}
