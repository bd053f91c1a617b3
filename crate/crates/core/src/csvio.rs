//! CSV formats: vote logs, truth lists, heuristic scores, record tables,
//! candidate pairs and trajectories.

use std::collections::HashSet;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::pairs::{CandidatePair, Record, RecordTable};
use crate::sim::AveragedPoint;
use crate::trajectory::TrajectoryRow;
use crate::votes::{Label, Vote, VoteLog};

pub const VOTE_HEADER: [&str; 4] = ["task_id", "worker_id", "item_id", "label"];
pub const TRAJECTORY_HEADER: [&str; 11] = [
    "task_index",
    "nominal",
    "majority",
    "chao92_total",
    "vchao92_total",
    "switch_total",
    "xi_pos",
    "xi_neg",
    "coverage_hat",
    "truth",
    "flags",
];
pub const AVERAGED_HEADER: [&str; 5] = ["task_index", "estimator", "mean", "std", "truth"];
pub const PAIRS_HEADER: [&str; 4] = ["left_id", "right_id", "similarity", "stratum"];

/// Nine significant digits in positional notation.
pub fn fmt_real(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

fn line_of(pos: Option<&csv::Position>) -> Option<u64> {
    pos.map(|p| p.line())
}

fn parse_field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T> {
    let line = line_of(rec.position());
    let raw = rec
        .get(idx)
        .ok_or_else(|| Error::malformed(line, format!("missing field {name}")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::malformed(line, format!("bad {name} value {raw:?}")))
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<bool> {
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(Error::malformed(Some(1), e.to_string())),
    };
    if headers.is_empty() {
        return Ok(false);
    }
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::malformed(
            Some(1),
            format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
        ));
    }
    Ok(true)
}

/// Reads a vote log. An empty input is an empty log.
pub fn read_votes(input: impl Read, item_count: usize) -> Result<VoteLog> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(input);
    if !check_header(&mut rdr, &VOTE_HEADER)? {
        return VoteLog::new(Vec::new(), item_count);
    }
    let mut votes = Vec::new();
    let mut seen = HashSet::new();
    let mut closed = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::malformed(line_of(e.position()), e.to_string()))?;
        let line = line_of(rec.position());
        let task_id: u64 = parse_field(&rec, 0, "task_id")?;
        let worker_id = rec.get(1).unwrap_or_default().trim().to_string();
        if worker_id.is_empty() {
            return Err(Error::malformed(line, "empty worker_id"));
        }
        let item_id: usize = parse_field(&rec, 2, "item_id")?;
        let bit: u8 = parse_field(&rec, 3, "label")?;
        let label =
            Label::from_bit(bit).ok_or_else(|| Error::malformed(line, format!("label {bit} not in {{0,1}}")))?;
        if item_id >= item_count {
            return Err(Error::malformed(
                line,
                format!("item_id {item_id} outside universe of {item_count} items"),
            ));
        }
        if !seen.insert((item_id, worker_id.clone())) {
            return Err(Error::malformed(
                line,
                format!("worker {worker_id} already voted on item {item_id}"),
            ));
        }
        if let Some(prev) = votes.last().map(|v: &Vote| v.task_id) {
            if prev != task_id {
                closed.insert(prev);
                if closed.contains(&task_id) {
                    return Err(Error::malformed(line, format!("task {task_id} is not contiguous")));
                }
            }
        }
        votes.push(Vote {
            item_id,
            worker_id,
            task_id,
            label,
            seq: votes.len(),
        });
    }
    VoteLog::new(votes, item_count)
}

pub fn write_votes(log: &VoteLog, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VOTE_HEADER)?;
    for v in log.votes() {
        w.write_record([
            v.task_id.to_string(),
            v.worker_id.clone(),
            v.item_id.to_string(),
            v.label.as_bit().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One true-dirty item id per line. Blank lines are skipped; an optional
/// `item_id` header is accepted.
pub fn read_truth(input: impl Read) -> Result<HashSet<usize>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut out = HashSet::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::malformed(line_of(e.position()), e.to_string()))?;
        let raw = rec.get(0).unwrap_or_default().trim();
        if raw.is_empty() || (k == 0 && raw == "item_id") {
            continue;
        }
        let id = raw
            .parse()
            .map_err(|_| Error::malformed(line_of(rec.position()), format!("bad item id {raw:?}")))?;
        out.insert(id);
    }
    Ok(out)
}

pub fn write_truth(dirty: &HashSet<usize>, mut out: impl Write) -> Result<()> {
    let mut ids: Vec<_> = dirty.iter().copied().collect();
    ids.sort_unstable();
    writeln!(out, "item_id")?;
    for id in ids {
        writeln!(out, "{id}")?;
    }
    Ok(())
}

/// `item_id,score` rows covering every item of the universe exactly once.
pub fn read_scores(input: impl Read, item_count: usize) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(&mut rdr, &["item_id", "score"])?;
    let mut scores = vec![None; item_count];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::malformed(line_of(e.position()), e.to_string()))?;
        let line = line_of(rec.position());
        let item: usize = parse_field(&rec, 0, "item_id")?;
        let score: f64 = parse_field(&rec, 1, "score")?;
        let slot = scores
            .get_mut(item)
            .ok_or_else(|| Error::malformed(line, format!("item_id {item} outside universe")))?;
        if slot.replace(score).is_some() {
            return Err(Error::malformed(line, format!("duplicate score for item {item}")));
        }
    }
    scores
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::malformed(None, format!("no score for item {i}"))))
        .collect()
}

/// `record_id,field1,field2,...` with a header.
pub fn read_records(input: impl Read) -> Result<RecordTable> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::malformed(Some(1), e.to_string()))?
        .clone();
    if headers.get(0).map(str::trim) != Some("record_id") {
        return Err(Error::malformed(Some(1), "first column must be record_id"));
    }
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::malformed(line_of(e.position()), e.to_string()))?;
        let id: u64 = parse_field(&rec, 0, "record_id")?;
        if !seen.insert(id) {
            return Err(Error::malformed(
                line_of(rec.position()),
                format!("duplicate record_id {id}"),
            ));
        }
        rows.push(Record {
            id,
            fields: rec.iter().skip(1).map(str::to_string).collect(),
        });
    }
    RecordTable::new(rows)
}

pub struct PairWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> PairWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(PAIRS_HEADER)?;
        Ok(PairWriter { inner })
    }

    pub fn write(&mut self, pairs: &[CandidatePair]) -> Result<()> {
        for p in pairs {
            self.inner.write_record([
                p.left_id.to_string(),
                p.right_id.to_string(),
                fmt_real(p.similarity),
                p.stratum.as_str().to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// A named column computed from each trajectory row.
pub type ExtraColumn<'a> = (&'a str, &'a dyn Fn(&TrajectoryRow) -> Option<f64>);

/// Per-task estimator table. `extra` appends one named column computed from
/// each row.
pub fn write_trajectory(
    rows: &[TrajectoryRow],
    extra: Option<ExtraColumn<'_>>,
    out: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = TRAJECTORY_HEADER.to_vec();
    if let Some((name, _)) = extra {
        header.insert(header.len() - 1, name);
    }
    w.write_record(&header)?;
    for r in rows {
        let mut fields = vec![
            r.task_index.to_string(),
            r.nominal.to_string(),
            r.majority.to_string(),
            fmt_real(r.chao92_total),
            fmt_opt(r.vchao92_total),
            fmt_real(r.switch_total),
            fmt_opt(r.xi_pos),
            fmt_opt(r.xi_neg),
            fmt_real(r.coverage_hat),
            r.truth.map(|t| t.to_string()).unwrap_or_default(),
        ];
        if let Some((_, f)) = extra {
            fields.push(fmt_opt(f(r)));
        }
        fields.push(r.flags_string());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format mean ± std table, one row per (task, estimator).
pub fn write_averaged(points: &[AveragedPoint], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AVERAGED_HEADER)?;
    for p in points {
        w.write_record([
            p.task_index.to_string(),
            p.series.as_str().to_string(),
            fmt_opt(p.value.map(|v| v.mean)),
            fmt_opt(p.value.map(|v| v.std)),
            fmt_opt(p.truth),
        ])?;
    }
    w.flush()?;
    Ok(())
}
