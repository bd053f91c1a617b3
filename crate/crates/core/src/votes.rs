//! Worker-response data model: votes, the vote log, per-item tallies and
//! frequency-of-frequency fingerprints.

use std::collections::{BTreeMap, HashSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A worker's verdict on one item. "Unseen" is the absence of a vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Dirty,
    Clean,
}

impl Label {
    pub fn flip(self) -> Label {
        match self {
            Label::Dirty => Label::Clean,
            Label::Clean => Label::Dirty,
        }
    }

    pub fn is_dirty(self) -> bool {
        self == Label::Dirty
    }

    /// `1` for dirty, `0` for clean, as used in the vote CSV.
    pub fn as_bit(self) -> u8 {
        match self {
            Label::Dirty => 1,
            Label::Clean => 0,
        }
    }

    pub fn from_bit(bit: u8) -> Option<Label> {
        match bit {
            1 => Some(Label::Dirty),
            0 => Some(Label::Clean),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub item_id: usize,
    pub worker_id: String,
    pub task_id: u64,
    pub label: Label,
    /// Global arrival index, 0-based.
    pub seq: usize,
}

/// An ordered, validated sequence of votes over an item universe of size `N`.
///
/// Construction enforces the log invariants: item ids in `[0, N)`, one vote
/// per (item, worker), strictly increasing `seq`, and tasks that arrive whole
/// (votes of one task form a contiguous run).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteLog {
    votes: Vec<Vote>,
    item_count: usize,
    task_size: usize,
    tasks: Vec<Range<usize>>,
}

impl VoteLog {
    pub fn new(votes: Vec<Vote>, item_count: usize) -> Result<Self> {
        let mut seen_pairs: HashSet<(usize, &str)> = HashSet::with_capacity(votes.len());
        let mut closed_tasks: HashSet<u64> = HashSet::new();
        let mut tasks: Vec<Range<usize>> = Vec::new();
        let mut prev_seq: Option<usize> = None;

        for (idx, vote) in votes.iter().enumerate() {
            if vote.item_id >= item_count {
                return Err(Error::malformed(
                    None,
                    format!(
                        "vote {idx}: item_id {} outside universe of {item_count} items",
                        vote.item_id
                    ),
                ));
            }
            if let Some(p) = prev_seq {
                if vote.seq <= p {
                    return Err(Error::malformed(
                        None,
                        format!("vote {idx}: seq {} does not increase past {p}", vote.seq),
                    ));
                }
            }
            prev_seq = Some(vote.seq);
            if !seen_pairs.insert((vote.item_id, vote.worker_id.as_str())) {
                return Err(Error::malformed(
                    None,
                    format!(
                        "vote {idx}: worker {} already voted on item {}",
                        vote.worker_id, vote.item_id
                    ),
                ));
            }
            let continues = idx > 0 && votes[idx - 1].task_id == vote.task_id;
            if continues {
                tasks.last_mut().expect("open task").end = idx + 1;
            } else {
                if idx > 0 {
                    closed_tasks.insert(votes[idx - 1].task_id);
                }
                if closed_tasks.contains(&vote.task_id) {
                    return Err(Error::malformed(
                        None,
                        format!("vote {idx}: task {} is not contiguous", vote.task_id),
                    ));
                }
                tasks.push(idx..idx + 1);
            }
        }

        let task_size = tasks.iter().map(|t| t.len()).max().unwrap_or(0);
        Ok(VoteLog {
            votes,
            item_count,
            task_size,
            tasks,
        })
    }

    /// Builds a log from `(task_id, worker_id, item_id, label)` responses in
    /// arrival order, assigning `seq` from position.
    pub fn from_responses<I, W>(responses: I, item_count: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, W, usize, Label)>,
        W: Into<String>,
    {
        let votes = responses
            .into_iter()
            .enumerate()
            .map(|(seq, (task_id, worker, item_id, label))| Vote {
                item_id,
                worker_id: worker.into(),
                task_id,
                label,
                seq,
            })
            .collect();
        Self::new(votes, item_count)
    }

    pub fn votes(&self) -> &[Vote] {
        &self.votes
    }

    pub fn len(&self) -> usize {
        self.votes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty()
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    /// Largest number of votes in a single task.
    pub fn task_size(&self) -> usize {
        self.task_size
    }

    /// Vote index ranges of each task, in arrival order.
    pub fn tasks(&self) -> &[Range<usize>] {
        &self.tasks
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    /// Prefix length (exclusive `upto_seq`) that ends with task `k` (1-based).
    pub fn prefix_after_tasks(&self, k: usize) -> usize {
        if k == 0 {
            0
        } else {
            self.tasks[k - 1].end
        }
    }

    /// A new log with tasks rearranged into `order` (indices into
    /// [`tasks`](Self::tasks)). Tasks stay whole; `seq` is renumbered.
    pub fn reorder_tasks(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.tasks.len() {
            return Err(Error::domain(format!(
                "task order has {} entries, log has {} tasks",
                order.len(),
                self.tasks.len()
            )));
        }
        let mut votes = Vec::with_capacity(self.votes.len());
        for &t in order {
            let range = self
                .tasks
                .get(t)
                .ok_or_else(|| Error::domain(format!("task index {t} out of range")))?;
            votes.extend(self.votes[range.clone()].iter().cloned());
        }
        for (seq, v) in votes.iter_mut().enumerate() {
            v.seq = seq;
        }
        Self::new(votes, self.item_count)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ItemTally {
    /// Dirty votes.
    pub pos: u32,
    /// Clean votes.
    pub neg: u32,
}

impl ItemTally {
    pub fn total(&self) -> u32 {
        self.pos + self.neg
    }
}

/// Per-item positive / negative vote counts over a log prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TallyState {
    items: Vec<ItemTally>,
}

impl TallyState {
    pub fn new(item_count: usize) -> Self {
        TallyState {
            items: vec![ItemTally::default(); item_count],
        }
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (u32, u32)>) -> Self {
        TallyState {
            items: counts
                .into_iter()
                .map(|(pos, neg)| ItemTally { pos, neg })
                .collect(),
        }
    }

    pub fn record(&mut self, item_id: usize, label: Label) {
        let t = &mut self.items[item_id];
        match label {
            Label::Dirty => t.pos += 1,
            Label::Clean => t.neg += 1,
        }
    }

    pub fn items(&self) -> &[ItemTally] {
        &self.items
    }

    pub fn get(&self, item_id: usize) -> ItemTally {
        self.items[item_id]
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }
}

/// Counts votes over `votes[0..upto_seq)`.
pub fn tally(log: &VoteLog, upto_seq: usize) -> Result<TallyState> {
    if upto_seq > log.len() {
        return Err(Error::domain(format!(
            "prefix {upto_seq} exceeds log length {}",
            log.len()
        )));
    }
    let mut state = TallyState::new(log.item_count());
    for v in &log.votes()[..upto_seq] {
        if v.item_id >= state.item_count() {
            return Err(Error::malformed(None, format!("unknown item {}", v.item_id)));
        }
        state.record(v.item_id, v.label);
    }
    Ok(state)
}

/// Frequency-of-frequencies fingerprint: `f_j` species observed exactly `j`
/// times, the distinct count `c`, and the effective sample size `n`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FStatistics {
    freq: BTreeMap<u64, u64>,
    n: u64,
    c: u64,
}

impl FStatistics {
    /// Fingerprint of a multiset given the multiplicity of each species.
    /// Zero multiplicities are ignored; `n` is the sum of multiplicities.
    pub fn from_multiplicities(mults: impl IntoIterator<Item = u64>) -> Self {
        let mut freq = BTreeMap::new();
        for m in mults.into_iter().filter(|&m| m > 0) {
            *freq.entry(m).or_insert(0) += 1;
        }
        Self::from_freq(freq)
    }

    /// Builds from `(j, f_j)` entries with `n = Σ j·f_j`.
    pub fn from_freq(freq: impl IntoIterator<Item = (u64, u64)>) -> Self {
        let freq: BTreeMap<u64, u64> = freq
            .into_iter()
            .filter(|&(j, f)| j > 0 && f > 0)
            .fold(BTreeMap::new(), |mut acc, (j, f)| {
                *acc.entry(j).or_insert(0) += f;
                acc
            });
        let c = freq.values().sum();
        let n = freq.iter().map(|(j, f)| j * f).sum();
        FStatistics { freq, n, c }
    }

    /// Replaces the sample size with an externally supplied one.
    pub fn with_sample_size(mut self, n: u64) -> Self {
        self.n = n;
        self
    }

    pub fn f(&self, j: u64) -> u64 {
        self.freq.get(&j).copied().unwrap_or(0)
    }

    pub fn singletons(&self) -> u64 {
        self.f(1)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn c(&self) -> u64 {
        self.c
    }

    pub fn freq(&self) -> &BTreeMap<u64, u64> {
        &self.freq
    }

    pub fn is_empty(&self) -> bool {
        self.c == 0
    }

    /// `Σ_j j (j − 1) f_j`
    pub fn second_factorial_moment(&self) -> f64 {
        self.freq
            .iter()
            .map(|(&j, &f)| (j as f64) * (j as f64 - 1.0) * f as f64)
            .sum()
    }
}

/// Error-discovery fingerprint over a prefix: species are items with at least
/// one dirty vote, multiplicity is the dirty-vote count. Clean votes are no-ops.
pub fn error_fstats(log: &VoteLog, upto_seq: usize) -> Result<FStatistics> {
    Ok(error_fstats_from_tally(&tally(log, upto_seq)?))
}

pub fn error_fstats_from_tally(t: &TallyState) -> FStatistics {
    FStatistics::from_multiplicities(t.items().iter().map(|i| u64::from(i.pos)))
}
