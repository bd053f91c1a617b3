//! Heuristic-gated sampling.
//!
//! A confidence score `H(r) ∈ [0, 1]` splits the universe into an ambiguous
//! band `[α, β]` that goes to workers, plus records the heuristic decides on
//! its own. Tasks are drawn mostly from the ambiguous band; with probability
//! ε a slot is drawn from the rest instead.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Stratum {
    AutoDirty,
    Ambiguous,
    AutoClean,
}

impl Stratum {
    pub fn as_str(self) -> &'static str {
        match self {
            Stratum::AutoDirty => "auto_dirty",
            Stratum::Ambiguous => "ambiguous",
            Stratum::AutoClean => "auto_clean",
        }
    }
}

/// Thresholds `α ≤ β` on a score in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub alpha: f64,
    pub beta: f64,
}

impl Thresholds {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
            return Err(Error::domain(format!(
                "thresholds must lie in [0, 1], got alpha={alpha} beta={beta}"
            )));
        }
        if alpha > beta {
            return Err(Error::domain(format!("alpha {alpha} exceeds beta {beta}")));
        }
        Ok(Thresholds { alpha, beta })
    }

    /// Closed band: both thresholds are ambiguous.
    pub fn classify(&self, score: f64) -> Stratum {
        if score > self.beta {
            Stratum::AutoDirty
        } else if score < self.alpha {
            Stratum::AutoClean
        } else {
            Stratum::Ambiguous
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicPartition {
    pub scores: Vec<f64>,
    pub thresholds: Thresholds,
    pub ambiguous: Vec<usize>,
    pub auto_dirty: Vec<usize>,
    pub auto_clean: Vec<usize>,
}

impl HeuristicPartition {
    pub fn universe(&self) -> usize {
        self.scores.len()
    }

    pub fn stratum(&self, item: usize) -> Stratum {
        self.thresholds.classify(self.scores[item])
    }

    /// Items outside the ambiguous band.
    pub fn complement(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .auto_dirty
            .iter()
            .chain(&self.auto_clean)
            .copied()
            .collect();
        out.sort_unstable();
        out
    }
}

pub fn partition(scores: Vec<f64>, alpha: f64, beta: f64) -> Result<HeuristicPartition> {
    let thresholds = Thresholds::new(alpha, beta)?;
    let mut ambiguous = Vec::new();
    let mut auto_dirty = Vec::new();
    let mut auto_clean = Vec::new();
    for (item, &s) in scores.iter().enumerate() {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::domain(format!("score {s} of item {item} outside [0, 1]")));
        }
        match thresholds.classify(s) {
            Stratum::AutoDirty => auto_dirty.push(item),
            Stratum::Ambiguous => ambiguous.push(item),
            Stratum::AutoClean => auto_clean.push(item),
        }
    }
    Ok(HeuristicPartition {
        scores,
        thresholds,
        ambiguous,
        auto_dirty,
        auto_clean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonPolicy {
    pub epsilon: f64,
    pub seed: u64,
}

impl EpsilonPolicy {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::domain(format!("epsilon {epsilon} outside [0, 1]")));
        }
        Ok(EpsilonPolicy { epsilon, seed })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrawnTask {
    pub items: Vec<usize>,
    /// Some slot wanted an empty or exhausted stratum and took the other one.
    pub fell_back: bool,
}

/// Lazily shuffled index range `0..len`: each `take` returns a uniformly
/// chosen index not returned before, touching only the swapped positions.
struct SparseShuffle {
    remaining: usize,
    swaps: HashMap<usize, usize>,
}

impl SparseShuffle {
    fn new(len: usize) -> Self {
        SparseShuffle {
            remaining: len,
            swaps: HashMap::new(),
        }
    }

    fn take<R: Rng>(&mut self, rng: &mut R) -> Option<usize> {
        if self.remaining == 0 {
            return None;
        }
        let k = rng.gen_range(0..self.remaining);
        let last = self.remaining - 1;
        let at_k = self.swaps.get(&k).copied().unwrap_or(k);
        let at_last = self.swaps.get(&last).copied().unwrap_or(last);
        self.swaps.insert(k, at_last);
        self.remaining -= 1;
        Some(at_k)
    }
}

/// Draws tasks from a partition under an ε-policy. Owns its PRNG stream, so
/// the sequence of tasks is a function of the policy seed alone.
pub struct TaskSampler {
    ambiguous: Vec<usize>,
    complement: Vec<usize>,
    epsilon: f64,
    rng: ChaCha8Rng,
}

impl TaskSampler {
    pub fn new(p: &HeuristicPartition, policy: EpsilonPolicy) -> Self {
        Self::with_rng(p, policy.epsilon, ChaCha8Rng::seed_from_u64(policy.seed))
    }

    pub(crate) fn with_rng(p: &HeuristicPartition, epsilon: f64, rng: ChaCha8Rng) -> Self {
        TaskSampler {
            ambiguous: p.ambiguous.clone(),
            complement: p.complement(),
            epsilon,
            rng,
        }
    }

    /// Each of `size` slots picks the ambiguous stratum with probability
    /// `1 − ε`, then an item uniformly among those not yet in the task.
    pub fn draw_task(&mut self, size: usize) -> Result<DrawnTask> {
        let universe = self.ambiguous.len() + self.complement.len();
        if size > universe {
            return Err(Error::domain(format!(
                "task of {size} items exceeds universe of {universe}"
            )));
        }
        let mut amb = SparseShuffle::new(self.ambiguous.len());
        let mut rest = SparseShuffle::new(self.complement.len());
        let mut items = Vec::with_capacity(size);
        let mut fell_back = false;
        for _ in 0..size {
            let want_ambiguous = !self.rng.gen_bool(self.epsilon);
            let (first, second, first_items, second_items) = if want_ambiguous {
                (&mut amb, &mut rest, &self.ambiguous, &self.complement)
            } else {
                (&mut rest, &mut amb, &self.complement, &self.ambiguous)
            };
            let item = match first.take(&mut self.rng) {
                Some(i) => first_items[i],
                None => {
                    fell_back = true;
                    let i = second.take(&mut self.rng).expect("size checked against universe");
                    second_items[i]
                }
            };
            items.push(item);
        }
        Ok(DrawnTask { items, fell_back })
    }
}

/// One-shot draw; see [`TaskSampler::draw_task`].
pub fn draw_task(p: &HeuristicPartition, policy: EpsilonPolicy, size: usize) -> Result<DrawnTask> {
    TaskSampler::new(p, policy).draw_task(size)
}

/// Total errors when the heuristic never errs: the estimate on the ambiguous
/// band plus everything auto-classified as dirty.
pub fn total_with_perfect_heuristic(d_hat_on_ambiguous: f64, p: &HeuristicPartition) -> f64 {
    d_hat_on_ambiguous + p.auto_dirty.len() as f64
}

/// Total errors under an imperfect heuristic: the whole-universe estimate,
/// which is only meaningful when votes were drawn with ε > 0.
pub fn total_with_imperfect_heuristic(d_hat_on_universe: f64) -> f64 {
    d_hat_on_universe
}
