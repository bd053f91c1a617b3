//! Task-by-task replay of every estimator over a vote log.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::estimators::{self, chao92, vchao92};
use crate::switch::{switch_total_from_parts, DirectionFilter, SwitchTracker, Trend};
use crate::votes::{error_fstats_from_tally, Label, TallyState, VoteLog};

pub const DEFAULT_SHIFT: u64 = 1;
pub const DEFAULT_TREND_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryOptions {
    pub shift: u64,
    pub trend_window: usize,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions {
            shift: DEFAULT_SHIFT,
            trend_window: DEFAULT_TREND_WINDOW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flag {
    Chao92LowCoverage,
    VChao92InsufficientData,
    VChao92LowCoverage,
    SwitchFallback,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::Chao92LowCoverage => "chao92:low-coverage",
            Flag::VChao92InsufficientData => "vchao92:insufficient-data",
            Flag::VChao92LowCoverage => "vchao92:low-coverage",
            Flag::SwitchFallback => "switch:insufficient-data",
        }
    }
}

/// Distance of the current consensus from the truth, in switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SwitchesNeeded {
    /// Truly dirty items currently labelled clean.
    pub positive: u64,
    /// Truly clean items currently labelled dirty.
    pub negative: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    /// 1-based number of completed tasks.
    pub task_index: usize,
    pub nominal: u64,
    pub majority: u64,
    pub chao92_total: f64,
    pub vchao92_total: Option<f64>,
    pub switch_total: f64,
    pub xi_pos: Option<f64>,
    pub xi_neg: Option<f64>,
    pub coverage_hat: f64,
    pub trend: Trend,
    pub truth: Option<u64>,
    pub needed: Option<SwitchesNeeded>,
    pub flags: Vec<Flag>,
}

impl TrajectoryRow {
    pub fn flags_string(&self) -> String {
        self.flags
            .iter()
            .map(|f| f.as_str())
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Switches needed to move `labels` to the truth given by `dirty`.
pub fn switches_needed(labels: impl IntoIterator<Item = Label>, dirty: &HashSet<usize>) -> SwitchesNeeded {
    let mut out = SwitchesNeeded::default();
    for (item, label) in labels.into_iter().enumerate() {
        match (dirty.contains(&item), label) {
            (true, Label::Clean) => out.positive += 1,
            (false, Label::Dirty) => out.negative += 1,
            _ => {}
        }
    }
    out
}

/// One row per completed task.
///
/// The switch-based total picks its correction from the trend of the
/// majority count over the last `trend_window` tasks (zero change is flat).
pub fn trajectory(
    log: &VoteLog,
    opts: &TrajectoryOptions,
    truth: Option<&HashSet<usize>>,
) -> Result<Vec<TrajectoryRow>> {
    let universe = log.item_count();
    if let Some(dirty) = truth {
        if let Some(bad) = dirty.iter().find(|&&i| i >= universe) {
            return Err(Error::malformed(
                None,
                format!("truth item {bad} outside universe of {universe} items"),
            ));
        }
    }
    let mut tally = TallyState::new(universe);
    let mut switches = SwitchTracker::new(universe);
    let mut majority_history: Vec<u64> = vec![0];
    let mut rows = Vec::with_capacity(log.task_count());

    for (k, range) in log.tasks().iter().enumerate() {
        for v in &log.votes()[range.clone()] {
            tally.record(v.item_id, v.label);
            switches.record(v.item_id, v.label, v.seq);
        }
        let task_index = k + 1;
        let mut flags = Vec::new();

        let nominal = estimators::nominal(&tally);
        let majority = estimators::majority(&tally);
        majority_history.push(majority);

        let fstats = error_fstats_from_tally(&tally);
        let chao = chao92(&fstats, universe);
        if chao.low_coverage {
            flags.push(Flag::Chao92LowCoverage);
        }
        let vchao = match vchao92(&tally, &fstats, opts.shift, universe) {
            Ok(out) => {
                if out.low_coverage {
                    flags.push(Flag::VChao92LowCoverage);
                }
                Some(out.total_errors_hat)
            }
            Err(Error::InsufficientData(_)) => {
                flags.push(Flag::VChao92InsufficientData);
                None
            }
            Err(e) => return Err(e),
        };

        let before = majority_history[task_index.saturating_sub(opts.trend_window)];
        let trend = Trend::between(before, majority);
        let total = switch_total_from_parts(
            majority,
            &switches.switch_fstats(DirectionFilter::Positive),
            &switches.switch_fstats(DirectionFilter::Negative),
            trend,
            universe,
        );
        if total.fell_back {
            flags.push(Flag::SwitchFallback);
        }

        let needed =
            truth.map(|dirty| switches_needed((0..universe).map(|i| switches.label(i)), dirty));

        rows.push(TrajectoryRow {
            task_index,
            nominal,
            majority,
            chao92_total: chao.total_errors_hat,
            vchao92_total: vchao,
            switch_total: total.total,
            xi_pos: total.xi_pos,
            xi_neg: total.xi_neg,
            coverage_hat: chao.coverage_hat,
            trend,
            truth: truth.map(|d| d.len() as u64),
            needed,
            flags,
        });
    }
    Ok(rows)
}
