//! Consensus-switch estimation.
//!
//! Every item starts with a clean consensus. A switch happens when the first
//! vote on an item is dirty, or when a later vote brings the item's dirty and
//! clean counts to a tie; each switch flips the item's consensus label. Each
//! switch event is a species whose multiplicity is the number of votes (the
//! switching vote included) received before the next switch on that item.
//! Votes on an item before its first switch are no-ops and do not count
//! towards the sample size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{coverage_estimate, majority, EstimatorOutput};
use crate::votes::{FStatistics, Label, TallyState, VoteLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Clean to dirty.
    Positive,
    /// Dirty to clean.
    Negative,
}

/// Which switch events to count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionFilter {
    All,
    Positive,
    Negative,
}

impl DirectionFilter {
    fn admits(self, d: Direction) -> bool {
        match self {
            DirectionFilter::All => true,
            DirectionFilter::Positive => d == Direction::Positive,
            DirectionFilter::Negative => d == Direction::Negative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SwitchEvent {
    pub item_id: usize,
    /// Sequence number of the vote that caused the switch.
    pub seq: usize,
    pub direction: Direction,
    pub multiplicity: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ItemConsensus {
    label: Label,
    pos: u32,
    neg: u32,
    latest_event: Option<usize>,
}

impl Default for ItemConsensus {
    fn default() -> Self {
        ItemConsensus {
            label: Label::Clean,
            pos: 0,
            neg: 0,
            latest_event: None,
        }
    }
}

/// Incremental switch replay, one vote at a time.
#[derive(Debug, Clone)]
pub struct SwitchTracker {
    items: Vec<ItemConsensus>,
    events: Vec<SwitchEvent>,
    total_votes: u64,
    n_switch: u64,
}

impl SwitchTracker {
    pub fn new(item_count: usize) -> Self {
        SwitchTracker {
            items: vec![ItemConsensus::default(); item_count],
            events: Vec::new(),
            total_votes: 0,
            n_switch: 0,
        }
    }

    /// Applies one vote; returns the direction of the switch it caused, if any.
    pub fn record(&mut self, item_id: usize, label: Label, seq: usize) -> Option<Direction> {
        let item = &mut self.items[item_id];
        match label {
            Label::Dirty => item.pos += 1,
            Label::Clean => item.neg += 1,
        }
        self.total_votes += 1;
        let votes = item.pos + item.neg;
        let switched = (votes == 1 && label == Label::Dirty) || (votes >= 2 && item.pos == item.neg);

        if switched {
            let direction = match item.label {
                Label::Clean => Direction::Positive,
                Label::Dirty => Direction::Negative,
            };
            item.label = item.label.flip();
            item.latest_event = Some(self.events.len());
            self.events.push(SwitchEvent {
                item_id,
                seq,
                direction,
                multiplicity: 1,
            });
            self.n_switch += 1;
            Some(direction)
        } else {
            if let Some(e) = item.latest_event {
                self.events[e].multiplicity += 1;
                self.n_switch += 1;
            }
            None
        }
    }

    /// Current consensus label of an item.
    pub fn label(&self, item_id: usize) -> Label {
        self.items[item_id].label
    }

    /// Snapshot of the statistics so far.
    pub fn stats(&self) -> SwitchStats {
        SwitchStats {
            events: self.events.clone(),
            n_switch: self.n_switch,
            total_votes: self.total_votes,
            labels: self.items.iter().map(|i| i.label).collect(),
        }
    }

    pub fn events(&self) -> &[SwitchEvent] {
        &self.events
    }

    pub fn n_switch(&self) -> u64 {
        self.n_switch
    }

    pub fn switch_fstats(&self, filter: DirectionFilter) -> FStatistics {
        fstats_of(&self.events, self.n_switch, filter)
    }
}

/// Switch events and sample size over a log prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchStats {
    pub events: Vec<SwitchEvent>,
    /// Votes minus the per-item no-op prefixes.
    pub n_switch: u64,
    pub total_votes: u64,
    /// Consensus label of every item at the end of the prefix.
    pub labels: Vec<Label>,
}

impl SwitchStats {
    pub fn c_switch(&self) -> u64 {
        self.events.len() as u64
    }

    pub fn count(&self, filter: DirectionFilter) -> u64 {
        self.events
            .iter()
            .filter(|e| filter.admits(e.direction))
            .count() as u64
    }
}

/// Replays `votes[0..upto_seq)` and collects the switch events.
pub fn replay_switches(log: &VoteLog, upto_seq: usize) -> Result<SwitchStats> {
    if upto_seq > log.len() {
        return Err(Error::domain(format!(
            "prefix {upto_seq} exceeds log length {}",
            log.len()
        )));
    }
    let mut tracker = SwitchTracker::new(log.item_count());
    for v in &log.votes()[..upto_seq] {
        tracker.record(v.item_id, v.label, v.seq);
    }
    Ok(tracker.stats())
}

pub fn switch_count(stats: &SwitchStats) -> u64 {
    stats.c_switch()
}

fn fstats_of(events: &[SwitchEvent], n_switch: u64, filter: DirectionFilter) -> FStatistics {
    FStatistics::from_multiplicities(
        events
            .iter()
            .filter(|e| filter.admits(e.direction))
            .map(|e| e.multiplicity),
    )
    .with_sample_size(n_switch)
}

/// Fingerprint of the filtered events. The sample size is always the global
/// `n_switch`, whatever the filter.
pub fn switch_fstats(stats: &SwitchStats, filter: DirectionFilter) -> FStatistics {
    fstats_of(&stats.events, stats.n_switch, filter)
}

/// Total number of switches, estimated with the Chao92 form on switch
/// statistics. `cap` bounds the estimate when coverage is zero.
pub fn d_switch(f: &FStatistics, cap: f64) -> Result<EstimatorOutput> {
    if f.n() == 0 && f.c() > 0 {
        return Err(Error::InsufficientData("switch sample size is zero"));
    }
    Ok(coverage_estimate(f.c() as f64, f, cap))
}

/// Remaining switches ξ: the switch estimate minus the observed switches,
/// floored at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainingSwitches {
    pub xi: f64,
    pub low_coverage: bool,
}

pub fn remaining_switches(
    stats: &SwitchStats,
    filter: DirectionFilter,
    cap: f64,
) -> Result<RemainingSwitches> {
    remaining_from_fstats(&switch_fstats(stats, filter), cap)
}

pub(crate) fn remaining_from_fstats(f: &FStatistics, cap: f64) -> Result<RemainingSwitches> {
    let out = d_switch(f, cap)?;
    Ok(RemainingSwitches {
        xi: (out.total_errors_hat - f.c() as f64).max(0.0),
        low_coverage: out.low_coverage,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Trend {
    Increasing,
    Decreasing,
    Flat,
}

impl Trend {
    /// Sign of `now − before`.
    pub fn between(before: u64, now: u64) -> Trend {
        match now.cmp(&before) {
            std::cmp::Ordering::Greater => Trend::Increasing,
            std::cmp::Ordering::Less => Trend::Decreasing,
            std::cmp::Ordering::Equal => Trend::Flat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchTotal {
    pub total: f64,
    pub xi_pos: Option<f64>,
    pub xi_neg: Option<f64>,
    /// A needed one-sided estimate was unusable and the majority count was
    /// returned instead.
    pub fell_back: bool,
}

/// Majority count corrected by the remaining positive and/or negative switches,
/// chosen by the trend of the majority count. Clamped to `[0, universe]`.
///
/// A one-sided estimate counts as unusable when it lacks data or its coverage
/// is zero (every switch so far is a singleton).
pub fn switch_total_errors(
    t: &TallyState,
    stats: &SwitchStats,
    trend: Trend,
    universe: usize,
) -> SwitchTotal {
    switch_total_from_parts(
        majority(t),
        &switch_fstats(stats, DirectionFilter::Positive),
        &switch_fstats(stats, DirectionFilter::Negative),
        trend,
        universe,
    )
}

pub(crate) fn switch_total_from_parts(
    majority_count: u64,
    pos: &FStatistics,
    neg: &FStatistics,
    trend: Trend,
    universe: usize,
) -> SwitchTotal {
    let cap = universe as f64;
    let usable = |r: Result<RemainingSwitches>| match r {
        Ok(r) if !r.low_coverage => Some(r.xi),
        _ => None,
    };
    let xi_pos = usable(remaining_from_fstats(pos, cap));
    let xi_neg = usable(remaining_from_fstats(neg, cap));
    let base = majority_count as f64;
    let adjusted = match trend {
        Trend::Increasing => xi_pos.map(|p| base + p),
        Trend::Decreasing => xi_neg.map(|n| base - n),
        Trend::Flat => xi_pos.zip(xi_neg).map(|(p, n)| base + p - n),
    };
    SwitchTotal {
        total: adjusted.unwrap_or(base).clamp(0.0, cap),
        xi_pos,
        xi_neg,
        fell_back: adjusted.is_none(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    fn single_item(labels: &[Label]) -> SwitchStats {
        let log = VoteLog::from_responses(
            labels
                .iter()
                .enumerate()
                .map(|(k, &l)| (k as u64, format!("w{k}"), 0usize, l)),
            1,
        )
        .unwrap();
        replay_switches(&log, log.len()).unwrap()
    }

    #[test]
    fn first_dirty_vote_switches() {
        let s = single_item(&[Dirty]);
        assert_eq!(s.events.len(), 1);
        assert_eq!(s.events[0].direction, Direction::Positive);
        assert_eq!(s.events[0].multiplicity, 1);
        assert_eq!(s.n_switch, 1);
    }

    #[test]
    fn dirty_then_clean_switches_twice() {
        let s = single_item(&[Dirty, Clean]);
        let dirs: Vec<_> = s.events.iter().map(|e| e.direction).collect();
        assert_eq!(dirs, [Direction::Positive, Direction::Negative]);
        assert_eq!(s.labels, [Clean]);
    }

    #[test]
    fn leading_clean_vote_is_a_noop() {
        let s = single_item(&[Clean, Dirty, Dirty]);
        assert_eq!(s.events.len(), 1);
        assert_eq!(s.events[0].direction, Direction::Positive);
        assert_eq!(s.events[0].seq, 1);
        assert_eq!(s.events[0].multiplicity, 2);
        assert_eq!(s.n_switch, 2);
        assert_eq!(s.total_votes, 3);
    }

    #[test]
    fn item_without_switch_contributes_nothing() {
        let s = single_item(&[Clean, Clean, Dirty]);
        assert!(s.events.is_empty());
        assert_eq!(s.n_switch, 0);
    }

    #[test]
    fn strict_majority_after_tie_does_not_switch() {
        // tie at vote 2 flips to clean; the clean majority at vote 3 agrees
        let s = single_item(&[Dirty, Clean, Clean]);
        assert_eq!(s.events.len(), 2);
        assert_eq!(s.events[1].multiplicity, 2);
    }

    #[test]
    fn switch_counts() {
        let empty = VoteLog::new(vec![], 3).unwrap();
        assert_eq!(switch_count(&replay_switches(&empty, 0).unwrap()), 0);
        let log = VoteLog::from_responses([(0u64, "a", 0usize, Dirty), (0, "a", 1, Dirty)], 2).unwrap();
        assert_eq!(switch_count(&replay_switches(&log, 2).unwrap()), 2);
    }

    #[test]
    fn fstats_by_direction() {
        // item 0: D D D -> one positive event, multiplicity 3
        // item 1: D     -> one positive event, multiplicity 1
        let log = VoteLog::from_responses(
            [
                (0u64, "a", 0usize, Dirty),
                (0, "a", 1, Dirty),
                (1, "b", 0, Dirty),
                (2, "c", 0, Dirty),
            ],
            2,
        )
        .unwrap();
        let s = replay_switches(&log, 4).unwrap();
        let all = switch_fstats(&s, DirectionFilter::All);
        assert_eq!((all.f(1), all.f(3), all.c(), all.n()), (1, 1, 2, 4));
        let neg = switch_fstats(&s, DirectionFilter::Negative);
        assert!(neg.is_empty());
        assert_eq!(
            s.count(DirectionFilter::Positive) + s.count(DirectionFilter::Negative),
            s.count(DirectionFilter::All)
        );
    }

    #[test]
    fn d_switch_with_skew() {
        let f = FStatistics::from_freq([(1, 1), (3, 1)]);
        let out = d_switch(&f, 100.0).unwrap();
        assert!((out.coverage_hat - 0.75).abs() < 1e-12);
        assert!((out.cv2_hat - 1.0 / 3.0).abs() < 1e-12);
        assert!((out.total_errors_hat - 28.0 / 9.0).abs() < 1e-12);
        let xi = remaining_from_fstats(&f, 100.0).unwrap().xi;
        assert!((xi - 10.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn d_switch_edge_cases() {
        let f = FStatistics::from_freq([(2, 3)]);
        assert_eq!(d_switch(&f, 10.0).unwrap().total_errors_hat, 3.0);
        assert_eq!(remaining_from_fstats(&f, 10.0).unwrap().xi, 0.0);
        assert_eq!(d_switch(&FStatistics::default(), 10.0).unwrap().total_errors_hat, 0.0);
        let orphan = FStatistics::from_freq([(1, 2)]).with_sample_size(0);
        assert!(matches!(d_switch(&orphan, 10.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn total_by_trend() {
        let no_singletons = FStatistics::from_freq([(2, 2)]).with_sample_size(10);
        for trend in [Trend::Increasing, Trend::Decreasing, Trend::Flat] {
            let r = switch_total_from_parts(5, &no_singletons, &no_singletons, trend, 100);
            assert_eq!(r.total, 5.0);
            assert!(!r.fell_back);
        }
        // ξ = 28/9 − 2 on both sides
        let f = FStatistics::from_freq([(1, 1), (3, 1)]);
        let xi = 10.0 / 9.0;
        let r = switch_total_from_parts(5, &f, &no_singletons, Trend::Increasing, 100);
        assert!((r.total - (5.0 + xi)).abs() < 1e-12);
        let r = switch_total_from_parts(10, &no_singletons, &f, Trend::Decreasing, 100);
        assert!((r.total - (10.0 - xi)).abs() < 1e-12);
        let r = switch_total_from_parts(10, &f, &f, Trend::Flat, 100);
        assert!((r.total - 10.0).abs() < 1e-12);
    }

    #[test]
    fn total_falls_back_on_unusable_side() {
        let singletons_only = FStatistics::from_freq([(1, 3)]);
        let fine = FStatistics::from_freq([(2, 1)]).with_sample_size(5);
        let r = switch_total_from_parts(4, &singletons_only, &fine, Trend::Increasing, 100);
        assert!(r.fell_back);
        assert_eq!(r.total, 4.0);
        assert_eq!(r.xi_pos, None);
        let r = switch_total_from_parts(4, &singletons_only, &fine, Trend::Decreasing, 100);
        assert!(!r.fell_back);
    }

    #[test]
    fn total_is_clamped() {
        let f = FStatistics::from_freq([(1, 1), (3, 1)]);
        let none = FStatistics::default();
        let r = switch_total_from_parts(0, &none, &f, Trend::Decreasing, 100);
        assert_eq!(r.total, 0.0);
        let r = switch_total_from_parts(10, &f, &none, Trend::Increasing, 10);
        assert_eq!(r.total, 10.0);
    }

    #[test]
    fn trend_sign() {
        assert_eq!(Trend::between(3, 5), Trend::Increasing);
        assert_eq!(Trend::between(5, 3), Trend::Decreasing);
        assert_eq!(Trend::between(4, 4), Trend::Flat);
    }
}
