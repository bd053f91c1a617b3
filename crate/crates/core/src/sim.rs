//! Seeded synthetic crowd: flip-rate workers answering tasks drawn from an
//! item pool, plus the metrics used to compare estimators across runs.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priority::{self, HeuristicPartition, TaskSampler, DEFAULT_EPSILON};
use crate::trajectory::{trajectory, TrajectoryOptions, TrajectoryRow};
use crate::votes::{Label, Vote, VoteLog};

/// Scores given to simulated items; thresholds below put them in the
/// matching stratum.
const AMBIGUOUS_SCORE: f64 = 0.7;
const LOW_SCORE: f64 = 0.2;
pub const SIM_ALPHA: f64 = 0.5;
pub const SIM_BETA: f64 = 0.9;

// PRNG stream ids, one per concern, all keyed by the scenario seed.
const STREAM_TRUTH: u64 = 0;
const STREAM_TASKS: u64 = 1;
const STREAM_WORKERS: u64 = 2;
const STREAM_PERMUTE: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScenario {
    pub n_items: usize,
    pub n_dirty: usize,
    pub task_size: usize,
    pub n_tasks: usize,
    #[serde(default)]
    pub fp_rate: f64,
    #[serde(default)]
    pub fn_rate: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// `None` disables the heuristic: every item is ambiguous. Otherwise the
    /// probability that a dirty item scores below the band, and that a clean
    /// item scores inside it.
    #[serde(default)]
    pub heuristic_error: Option<f64>,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_permutations() -> usize {
    10
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        let rate = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} = {v} outside [0, 1]")))
            }
        };
        rate("fp_rate", self.fp_rate)?;
        rate("fn_rate", self.fn_rate)?;
        rate("epsilon", self.epsilon)?;
        if let Some(h) = self.heuristic_error {
            rate("heuristic_error", h)?;
        }
        if self.n_dirty > self.n_items {
            return Err(Error::domain(format!(
                "n_dirty {} exceeds n_items {}",
                self.n_dirty, self.n_items
            )));
        }
        if self.task_size > self.n_items {
            return Err(Error::domain(format!(
                "task_size {} exceeds n_items {}",
                self.task_size, self.n_items
            )));
        }
        if self.permutations == 0 {
            return Err(Error::domain("permutations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub dirty: HashSet<usize>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub log: VoteLog,
    pub truth: GroundTruth,
    pub partition: HeuristicPartition,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Generates a vote log. One fresh worker answers each task; every vote
/// reports the true label except with probability `fn_rate` (dirty items)
/// or `fp_rate` (clean items).
pub fn simulate(sc: &SimScenario) -> Result<Simulation> {
    sc.validate()?;
    let mut truth_rng = stream(sc.seed, STREAM_TRUTH);
    let mut ids: Vec<usize> = (0..sc.n_items).collect();
    ids.shuffle(&mut truth_rng);
    let dirty: HashSet<usize> = ids[..sc.n_dirty].iter().copied().collect();

    let scores: Vec<f64> = (0..sc.n_items)
        .map(|i| match sc.heuristic_error {
            None => AMBIGUOUS_SCORE,
            Some(h) => {
                let misplaced = truth_rng.gen_bool(h);
                let in_band = dirty.contains(&i) != misplaced;
                if in_band {
                    AMBIGUOUS_SCORE
                } else {
                    LOW_SCORE
                }
            }
        })
        .collect();
    let partition = priority::partition(scores, SIM_ALPHA, SIM_BETA)?;

    let mut sampler = TaskSampler::with_rng(&partition, sc.epsilon, stream(sc.seed, STREAM_TASKS));
    let mut worker_rng = stream(sc.seed, STREAM_WORKERS);
    let mut votes = Vec::with_capacity(sc.n_tasks * sc.task_size);
    for task in 0..sc.n_tasks {
        let drawn = sampler.draw_task(sc.task_size)?;
        for item in drawn.items {
            let flip_rate = if dirty.contains(&item) {
                sc.fn_rate
            } else {
                sc.fp_rate
            };
            let true_label = if dirty.contains(&item) {
                Label::Dirty
            } else {
                Label::Clean
            };
            let label = if worker_rng.gen_bool(flip_rate) {
                true_label.flip()
            } else {
                true_label
            };
            votes.push(Vote {
                item_id: item,
                worker_id: format!("w{task}"),
                task_id: task as u64,
                label,
                seq: votes.len(),
            });
        }
    }
    Ok(Simulation {
        log: VoteLog::new(votes, sc.n_items)?,
        truth: GroundTruth { dirty },
        partition,
    })
}

/// Scaled root-mean-square error `sqrt(mean((D̂ − D)²)) / D`.
pub fn srmse(estimates: &[f64], truth: f64) -> Result<f64> {
    if truth == 0.0 {
        return Err(Error::domain("true count must be non-zero"));
    }
    if estimates.is_empty() {
        return Err(Error::domain("need at least one estimate"));
    }
    let mse = estimates.iter().map(|d| (d - truth).powi(2)).sum::<f64>() / estimates.len() as f64;
    Ok(mse.sqrt() / truth)
}

/// Tasks needed for three workers to review a sample of `sample_size` items
/// in tasks of `task_size`.
pub fn scm(sample_size: u64, task_size: u64) -> Result<u64> {
    if task_size == 0 {
        return Err(Error::domain("task size must be positive"));
    }
    Ok((3 * sample_size).div_ceil(task_size))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Series {
    Nominal,
    Majority,
    Chao92,
    VChao92,
    Switch,
    XiPos,
    XiNeg,
}

impl Series {
    pub const ALL: [Series; 7] = [
        Series::Nominal,
        Series::Majority,
        Series::Chao92,
        Series::VChao92,
        Series::Switch,
        Series::XiPos,
        Series::XiNeg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Series::Nominal => "nominal",
            Series::Majority => "majority",
            Series::Chao92 => "chao92",
            Series::VChao92 => "vchao92",
            Series::Switch => "switch",
            Series::XiPos => "xi_pos",
            Series::XiNeg => "xi_neg",
        }
    }

    pub fn value(self, row: &TrajectoryRow) -> Option<f64> {
        match self {
            Series::Nominal => Some(row.nominal as f64),
            Series::Majority => Some(row.majority as f64),
            Series::Chao92 => Some(row.chao92_total),
            Series::VChao92 => row.vchao92_total,
            Series::Switch => Some(row.switch_total),
            Series::XiPos => row.xi_pos,
            Series::XiNeg => row.xi_neg,
        }
    }

    /// What the series is estimating, when the truth is known.
    pub fn truth(self, row: &TrajectoryRow) -> Option<f64> {
        match self {
            Series::XiPos => row.needed.map(|n| n.positive as f64),
            Series::XiNeg => row.needed.map(|n| n.negative as f64),
            _ => row.truth.map(|t| t as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population mean and standard deviation; `None` for no values.
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(MeanStd {
            mean,
            std: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedPoint {
    pub task_index: usize,
    pub series: Series,
    pub value: Option<MeanStd>,
    pub truth: Option<f64>,
}

/// Per-permutation trajectories and their per-task aggregate.
#[derive(Debug, Clone)]
pub struct PermutationRuns {
    pub runs: Vec<Vec<TrajectoryRow>>,
    pub points: Vec<AveragedPoint>,
}

/// Task order for permutation `index`: the identity for index 0, a seeded
/// shuffle otherwise.
pub fn task_order(task_count: usize, seed: u64, index: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..task_count).collect();
    if index > 0 {
        let mut rng = stream(seed, STREAM_PERMUTE);
        rng.set_word_pos((index as u128) << 40);
        order.shuffle(&mut rng);
    }
    order
}

/// Replays `r` task orders of the log and aggregates each series per task
/// index. Missing values (estimator undefined) are left out of the
/// aggregate. Permutations run in parallel; the result does not depend on
/// scheduling.
pub fn permute_and_average(
    log: &VoteLog,
    r: usize,
    seed: u64,
    opts: &TrajectoryOptions,
    truth: Option<&HashSet<usize>>,
) -> Result<PermutationRuns> {
    if r == 0 {
        return Err(Error::domain("need at least one permutation"));
    }
    let runs: Vec<Vec<TrajectoryRow>> = (0..r)
        .into_par_iter()
        .map(|p| {
            let permuted = log.reorder_tasks(&task_order(log.task_count(), seed, p))?;
            trajectory(&permuted, opts, truth)
        })
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(log.task_count() * Series::ALL.len());
    for k in 0..log.task_count() {
        for series in Series::ALL {
            let values: Vec<f64> = runs.iter().filter_map(|run| series.value(&run[k])).collect();
            let truths: Vec<f64> = runs.iter().filter_map(|run| series.truth(&run[k])).collect();
            points.push(AveragedPoint {
                task_index: k + 1,
                series,
                value: MeanStd::of(&values),
                truth: MeanStd::of(&truths).map(|m| m.mean),
            });
        }
    }
    Ok(PermutationRuns { runs, points })
}

/// Simulates the scenario and averages every estimator over its permutations.
pub fn run_scenario(sc: &SimScenario, opts: &TrajectoryOptions) -> Result<(Simulation, PermutationRuns)> {
    let sim = simulate(sc)?;
    let runs = permute_and_average(&sim.log, sc.permutations, sc.seed, opts, Some(&sim.truth.dirty))?;
    Ok((sim, runs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario() -> SimScenario {
        SimScenario {
            n_items: 200,
            n_dirty: 20,
            task_size: 10,
            n_tasks: 30,
            fp_rate: 0.0,
            fn_rate: 0.0,
            epsilon: 0.1,
            heuristic_error: None,
            permutations: 3,
            seed: 11,
        }
    }

    #[test]
    fn perfect_workers_report_truth() {
        let sim = simulate(&scenario()).unwrap();
        for v in sim.log.votes() {
            assert_eq!(v.label.is_dirty(), sim.truth.dirty.contains(&v.item_id));
        }
        let rows = trajectory(&sim.log, &TrajectoryOptions::default(), None).unwrap();
        let seen_dirty: HashSet<usize> = sim
            .log
            .votes()
            .iter()
            .filter(|v| sim.truth.dirty.contains(&v.item_id))
            .map(|v| v.item_id)
            .collect();
        assert_eq!(rows.last().unwrap().majority, seen_dirty.len() as u64);
    }

    #[test]
    fn identical_seed_identical_log() {
        let sc = SimScenario {
            fp_rate: 0.05,
            fn_rate: 0.2,
            ..scenario()
        };
        assert_eq!(simulate(&sc).unwrap().log, simulate(&sc).unwrap().log);
        let other = SimScenario { seed: 12, ..sc.clone() };
        assert_ne!(simulate(&sc).unwrap().log, simulate(&other).unwrap().log);
    }

    #[test]
    fn one_worker_per_task_and_no_repeats() {
        let sim = simulate(&scenario()).unwrap();
        assert_eq!(sim.log.task_count(), 30);
        assert!(sim.log.tasks().iter().all(|t| t.len() == 10));
    }

    #[test]
    fn invalid_scenarios() {
        assert!(simulate(&SimScenario { n_dirty: 300, ..scenario() }).is_err());
        assert!(simulate(&SimScenario { fp_rate: 1.5, ..scenario() }).is_err());
        assert!(simulate(&SimScenario { task_size: 201, ..scenario() }).is_err());
        let err = serde_json::from_str::<SimScenario>(
            r#"{"n_items":1,"n_dirty":0,"task_size":1,"n_tasks":1,"bogus":3}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn heuristic_placement() {
        let sc = SimScenario {
            heuristic_error: Some(0.0),
            ..scenario()
        };
        let sim = simulate(&sc).unwrap();
        let amb: HashSet<usize> = sim.partition.ambiguous.iter().copied().collect();
        assert_eq!(amb, sim.truth.dirty);
    }

    #[test]
    fn srmse_cases() {
        assert_eq!(srmse(&[100.0, 100.0], 100.0).unwrap(), 0.0);
        assert!((srmse(&[150.0], 100.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((srmse(&[90.0, 110.0], 100.0).unwrap() - 0.1).abs() < 1e-12);
        assert!(srmse(&[1.0], 0.0).is_err());
    }

    #[test]
    fn scm_cases() {
        assert_eq!(scm(100, 10).unwrap(), 30);
        assert_eq!(scm(63, 10).unwrap(), 19);
        assert_eq!(scm(0, 10).unwrap(), 0);
        assert!(scm(5, 0).is_err());
    }

    #[test]
    fn single_permutation_is_the_plain_trajectory() {
        let sc = SimScenario {
            fp_rate: 0.05,
            fn_rate: 0.1,
            ..scenario()
        };
        let sim = simulate(&sc).unwrap();
        let opts = TrajectoryOptions::default();
        let runs = permute_and_average(&sim.log, 1, 5, &opts, None).unwrap();
        let plain = trajectory(&sim.log, &opts, None).unwrap();
        assert_eq!(runs.runs[0], plain);
        for p in &runs.points {
            if let Some(v) = p.value {
                assert_eq!(v.std, 0.0);
                assert_eq!(Some(v.mean), p.series.value(&plain[p.task_index - 1]));
            }
        }
    }

    #[test]
    fn order_free_estimators_agree_at_the_end() {
        let sc = SimScenario {
            fp_rate: 0.05,
            fn_rate: 0.1,
            permutations: 5,
            ..scenario()
        };
        let (_, runs) = run_scenario(&sc, &TrajectoryOptions::default()).unwrap();
        let last = sc.n_tasks;
        for p in runs.points.iter().filter(|p| p.task_index == last) {
            let v = p.value.unwrap();
            match p.series {
                Series::Nominal | Series::Majority | Series::Chao92 | Series::VChao92 => {
                    assert!(v.std < 1e-9, "{:?} std {}", p.series, v.std)
                }
                _ => assert!(v.std.is_finite()),
            }
        }
        // permutations actually differ
        assert_ne!(task_order(30, 11, 1), task_order(30, 11, 2));
        assert_eq!(task_order(30, 11, 0), (0..30).collect::<Vec<_>>());
    }
}
