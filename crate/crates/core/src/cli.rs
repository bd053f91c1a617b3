//! Command-line front end: `estimate`, `simulate` and `pairs`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::csvio;
use crate::error::{Error, Result};
use crate::pairs::{stream_scored_pairs, Normalization};
use crate::priority::{self, Thresholds};
use crate::sim::{self, SimScenario};
use crate::trajectory::{trajectory, TrajectoryOptions, DEFAULT_SHIFT, DEFAULT_TREND_WINDOW};

#[derive(Debug, Parser)]
#[command(name = "dqest", version, about = "Estimate undetected data errors from crowd votes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a vote log task by task and emit every estimator.
    Estimate(EstimateArgs),
    /// Run a simulation scenario and emit per-task mean and std.
    Simulate(SimulateArgs),
    /// Score all record pairs and label them by similarity band.
    Pairs(PairsArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Vote CSV: task_id,worker_id,item_id,label
    pub votes: PathBuf,
    #[arg(long)]
    pub n_items: usize,
    #[arg(long, default_value_t = DEFAULT_SHIFT)]
    pub shift: u64,
    #[arg(long, default_value_t = DEFAULT_TREND_WINDOW)]
    pub trend_window: usize,
    /// True-dirty item ids, one per line.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Heuristic scores (item_id,score); adds a perfect-heuristic total column.
    #[arg(long, requires_all = ["alpha", "beta"])]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON with flat keys.
    pub scenario: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the scenario's permutation count (scenario default 10).
    #[arg(long)]
    pub permutations: Option<usize>,
    /// Overrides the scenario's exploration probability (scenario default 0.1).
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SHIFT)]
    pub shift: u64,
    #[arg(long, default_value_t = DEFAULT_TREND_WINDOW)]
    pub trend_window: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the simulated votes (original task order).
    #[arg(long)]
    pub votes_out: Option<PathBuf>,
    /// Also write the simulated true-dirty item ids.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairsArgs {
    /// Records CSV: record_id,field1,field2,...
    pub records: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::malformed(None, format!("{}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate(a) => run_estimate(&a),
        Command::Simulate(a) => run_simulate(&a),
        Command::Pairs(a) => run_pairs(&a),
    }
}

pub fn run_estimate(a: &EstimateArgs) -> Result<()> {
    let log = csvio::read_votes(open(&a.votes)?, a.n_items)?;
    let truth = a
        .truth
        .as_deref()
        .map(|p| csvio::read_truth(open(p)?))
        .transpose()?;
    let opts = TrajectoryOptions {
        shift: a.shift,
        trend_window: a.trend_window,
    };
    let rows = trajectory(&log, &opts, truth.as_ref())?;

    let partition = match (&a.scores, a.alpha, a.beta) {
        (Some(path), Some(alpha), Some(beta)) => Some(priority::partition(
            csvio::read_scores(open(path)?, a.n_items)?,
            alpha,
            beta,
        )?),
        _ => None,
    };
    let mut out = output(a.out.as_deref())?;
    match &partition {
        Some(p) => {
            let extra = |r: &crate::trajectory::TrajectoryRow| {
                Some(priority::total_with_perfect_heuristic(r.switch_total, p))
            };
            csvio::write_trajectory(&rows, Some(("perfect_heuristic_total", &extra)), &mut out)?
        }
        None => csvio::write_trajectory(&rows, None, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

pub fn load_scenario(path: &Path) -> Result<SimScenario> {
    let sc: SimScenario = serde_json::from_reader(open(path)?).map_err(|e| {
        Error::malformed(Some(e.line() as u64), format!("scenario {}: {e}", path.display()))
    })?;
    Ok(sc)
}

pub fn run_simulate(a: &SimulateArgs) -> Result<()> {
    let mut sc = load_scenario(&a.scenario)?;
    if let Some(s) = a.seed {
        sc.seed = s;
    }
    if let Some(r) = a.permutations {
        sc.permutations = r;
    }
    sc.epsilon = a.epsilon.unwrap_or(sc.epsilon);
    let opts = TrajectoryOptions {
        shift: a.shift,
        trend_window: a.trend_window,
    };
    let (simulation, runs) = sim::run_scenario(&sc, &opts)?;
    if let Some(p) = &a.votes_out {
        csvio::write_votes(&simulation.log, BufWriter::new(File::create(p)?))?;
    }
    if let Some(p) = &a.truth_out {
        let mut w = BufWriter::new(File::create(p)?);
        csvio::write_truth(&simulation.truth.dirty, &mut w)?;
        w.flush()?;
    }
    let mut out = output(a.out.as_deref())?;
    csvio::write_averaged(&runs.points, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn run_pairs(a: &PairsArgs) -> Result<()> {
    let table = csvio::read_records(open(&a.records)?)?;
    let thresholds = Thresholds::new(a.alpha, a.beta)?;
    let mut writer = csvio::PairWriter::new(output(a.out.as_deref())?)?;
    stream_scored_pairs(&table, thresholds, &Normalization::default(), 64, |block| {
        writer.write(block)
    })?;
    writer.finish()
}
