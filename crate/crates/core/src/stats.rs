//! Per-workload aggregates and high-traffic workload selection.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{Direction, TraceRecord, Workload};

/// 4, 8, 16, 32 and 64 KiB, plus the open tail bucket.
pub const DEFAULT_SIZE_BOUNDS: [u64; 5] = [4096, 8192, 16384, 32768, 65536];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSummary {
    pub volume_id: String,
    pub read_count: u64,
    pub write_count: u64,
    pub total_count: u64,
    pub read_bytes: u64,
    pub write_bytes: u64,
    /// Furthest byte touched, used as the volume-size proxy.
    pub footprint_bytes: u64,
    pub first_ts_us: u64,
    pub last_ts_us: u64,
}

impl WorkloadSummary {
    fn empty(volume_id: &str, ts: u64) -> Self {
        WorkloadSummary {
            volume_id: volume_id.to_string(),
            read_count: 0,
            write_count: 0,
            total_count: 0,
            read_bytes: 0,
            write_bytes: 0,
            footprint_bytes: 0,
            first_ts_us: ts,
            last_ts_us: ts,
        }
    }

    fn add(&mut self, r: &TraceRecord) {
        match r.direction {
            Direction::Read => {
                self.read_count += 1;
                self.read_bytes += r.length_bytes;
            }
            Direction::Write => {
                self.write_count += 1;
                self.write_bytes += r.length_bytes;
            }
        }
        self.total_count += 1;
        self.footprint_bytes = self.footprint_bytes.max(r.end_bytes());
        self.first_ts_us = self.first_ts_us.min(r.timestamp_us);
        self.last_ts_us = self.last_ts_us.max(r.timestamp_us);
    }

    pub fn count(&self, metric: Metric) -> u64 {
        match metric {
            Metric::Read => self.read_count,
            Metric::Write => self.write_count,
            Metric::ReadWrite => self.total_count,
        }
    }

    pub const CSV_HEADER: &'static str = "volume_id,read_count,write_count,total_count,read_bytes,write_bytes,footprint_bytes,first_ts_us,last_ts_us";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.volume_id,
            self.read_count,
            self.write_count,
            self.total_count,
            self.read_bytes,
            self.write_bytes,
            self.footprint_bytes,
            self.first_ts_us,
            self.last_ts_us
        )
    }
}

pub fn summarize(workload: &Workload) -> Result<WorkloadSummary> {
    let first = workload.records().first().ok_or(Error::EmptyWorkload)?;
    let mut s = WorkloadSummary::empty(workload.volume_id(), first.timestamp_us);
    for r in workload.records() {
        s.add(r);
    }
    Ok(s)
}

/// Max of `offset + length` over all records.
pub fn footprint(workload: &Workload) -> Result<u64> {
    workload
        .records()
        .iter()
        .map(TraceRecord::end_bytes)
        .max()
        .ok_or(Error::EmptyWorkload)
}

/// Builds summaries for many volumes in one pass without retaining records.
#[derive(Debug, Default)]
pub struct SummaryAccumulator {
    by_volume: BTreeMap<String, WorkloadSummary>,
}

impl SummaryAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: &TraceRecord) {
        match self.by_volume.get_mut(r.volume_id.as_str()) {
            Some(s) => s.add(r),
            None => {
                let mut s = WorkloadSummary::empty(&r.volume_id, r.timestamp_us);
                s.add(r);
                self.by_volume.insert(r.volume_id.clone(), s);
            }
        }
    }

    pub fn volume_count(&self) -> usize {
        self.by_volume.len()
    }

    /// Summaries ordered by volume id.
    pub fn finish(self) -> Vec<WorkloadSummary> {
        self.by_volume.into_values().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Read,
    Write,
    ReadWrite,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Read, Metric::Write, Metric::ReadWrite];
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("fraction {fraction} not in (0, 1]")))
    }
}

/// Returns the smallest set of busiest volumes whose combined `metric`
/// count strictly exceeds `fraction` of the total, busiest first.
///
/// Equal counts are ordered by volume id. When no prefix can exceed the
/// threshold (e.g. `fraction == 1.0`) every volume is returned.
pub fn select_top_workloads(
    summaries: &[WorkloadSummary],
    fraction: f64,
    metric: Metric,
) -> Result<Vec<String>> {
    check_fraction(fraction)?;
    let mut ranked: Vec<&WorkloadSummary> = summaries.iter().collect();
    ranked.sort_by(|a, b| {
        b.count(metric)
            .cmp(&a.count(metric))
            .then_with(|| a.volume_id.cmp(&b.volume_id))
    });
    let total: u64 = ranked.iter().map(|s| s.count(metric)).sum();
    let threshold = fraction * total as f64;
    let mut cumulative = 0u64;
    let mut out = Vec::new();
    for s in ranked {
        out.push(s.volume_id.clone());
        cumulative += s.count(metric);
        if cumulative as f64 > threshold {
            break;
        }
    }
    Ok(out)
}

/// Union of the read, write and read+write selections, ordered by
/// read+write count descending then volume id.
pub fn select_top_workloads_union(summaries: &[WorkloadSummary], fraction: f64) -> Result<Vec<String>> {
    let mut picked = BTreeSet::new();
    for m in Metric::ALL {
        picked.extend(select_top_workloads(summaries, fraction, m)?);
    }
    let mut chosen: Vec<&WorkloadSummary> =
        summaries.iter().filter(|s| picked.contains(&s.volume_id)).collect();
    chosen.sort_by(|a, b| {
        b.total_count
            .cmp(&a.total_count)
            .then_with(|| a.volume_id.cmp(&b.volume_id))
    });
    Ok(chosen.into_iter().map(|s| s.volume_id.clone()).collect())
}

/// Request counts bucketed by size. `counts` has one more entry than
/// `bounds`; the last is the open tail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeHistogram {
    pub bounds: Vec<u64>,
    pub counts: Vec<u64>,
}

impl SizeHistogram {
    pub fn new(bounds: &[u64]) -> Result<Self> {
        if !bounds.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig("histogram bounds must be strictly increasing".into()));
        }
        Ok(SizeHistogram { bounds: bounds.to_vec(), counts: vec![0; bounds.len() + 1] })
    }

    pub fn add(&mut self, length_bytes: u64) {
        let i = self.bounds.partition_point(|&b| b < length_bytes);
        self.counts[i] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Counts each request in the first bucket whose bound is `>= length`.
pub fn io_size_histogram(workload: &Workload, bounds: &[u64]) -> Result<SizeHistogram> {
    let mut h = SizeHistogram::new(bounds)?;
    for r in workload.records() {
        h.add(r.length_bytes);
    }
    Ok(h)
}

pub fn write_summaries_csv<W: Write + ?Sized>(out: &mut W, summaries: &[WorkloadSummary]) -> io::Result<()> {
    writeln!(out, "{}", WorkloadSummary::CSV_HEADER)?;
    for s in summaries {
        writeln!(out, "{}", s.csv_row())?;
    }
    Ok(())
}
