//! Interval-bucketed request counting and five-number summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::Workload;

pub const DEFAULT_INTERVAL_S: u64 = 15;

/// Request counts per fixed-length interval, from the workload's first
/// record through its last. Empty intervals in between are explicit zeros.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalSeries {
    pub interval_s: u64,
    pub origin_ts_us: u64,
    pub counts: Vec<u64>,
}

impl IntervalSeries {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Buckets requests relative to the workload's first timestamp.
pub fn interval_counts(workload: &Workload, interval_s: u64) -> Result<IntervalSeries> {
    let origin = workload.first_timestamp_us().ok_or(Error::EmptyWorkload)?;
    interval_counts_from(workload, interval_s, origin)
}

/// Buckets requests relative to an explicit origin, which must not be later
/// than the first record.
pub fn interval_counts_from(workload: &Workload, interval_s: u64, origin_ts_us: u64) -> Result<IntervalSeries> {
    if interval_s == 0 {
        return Err(Error::InvalidConfig("interval must be at least 1 second".into()));
    }
    let first = workload.first_timestamp_us().ok_or(Error::EmptyWorkload)?;
    if origin_ts_us > first {
        return Err(Error::InvalidConfig("origin is after the first record".into()));
    }
    let width = interval_s * 1_000_000;
    let last = workload.last_timestamp_us().unwrap_or(first);
    let mut counts = vec![0u64; ((last - origin_ts_us) / width + 1) as usize];
    for r in workload.records() {
        counts[((r.timestamp_us - origin_ts_us) / width) as usize] += 1;
    }
    Ok(IntervalSeries { interval_s, origin_ts_us, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub lower_quartile: f64,
    pub median: f64,
    pub upper_quartile: f64,
    pub max: f64,
}

/// Five-number summary. Quartiles interpolate linearly between the order
/// statistics at rank `q * (n - 1)`; whiskers are the true min and max.
pub fn box_stats(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Ok(BoxStats {
        min: v[0],
        lower_quartile: q(0.25),
        median: q(0.5),
        upper_quartile: q(0.75),
        max: v[v.len() - 1],
    })
}

pub fn box_stats_of_counts(series: &IntervalSeries) -> Result<BoxStats> {
    let values: Vec<f64> = series.counts.iter().map(|&c| c as f64).collect();
    box_stats(&values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{Direction, TraceRecord};

    fn at_seconds(ts: &[u64]) -> Workload {
        let recs = ts
            .iter()
            .map(|&s| TraceRecord::new(s * 1_000_000, "v", Direction::Read, 0, 1))
            .collect();
        Workload::new("v", recs).unwrap()
    }

    #[test]
    fn floor_bucketing() {
        assert_eq!(interval_counts(&at_seconds(&[0, 5, 16, 31]), 15).unwrap().counts, [2, 1, 1]);
        assert_eq!(interval_counts(&at_seconds(&[0, 45]), 15).unwrap().counts, [1, 0, 0, 1]);
        assert_eq!(interval_counts(&at_seconds(&[7]), 15).unwrap().counts, [1]);
    }

    #[test]
    fn origin_is_first_record() {
        let s = interval_counts(&at_seconds(&[100, 114, 115]), 15).unwrap();
        assert_eq!(s.origin_ts_us, 100_000_000);
        assert_eq!(s.counts, [2, 1]);
    }

    #[test]
    fn empty_and_zero_interval_errors() {
        let w = Workload::new("v", vec![]).unwrap();
        assert!(matches!(interval_counts(&w, 15), Err(Error::EmptyWorkload)));
        assert!(interval_counts(&at_seconds(&[1]), 0).is_err());
    }

    #[test]
    fn box_stats_examples() {
        let b = box_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(
            (b.min, b.lower_quartile, b.median, b.upper_quartile, b.max),
            (1.0, 2.0, 3.0, 4.0, 5.0)
        );
        let b = box_stats(&[7.0, 7.0, 7.0]).unwrap();
        assert!([b.min, b.lower_quartile, b.median, b.upper_quartile, b.max]
            .iter()
            .all(|&x| x == 7.0));
        assert_eq!(box_stats(&[100.0, 1.0]).unwrap().median, 50.5);
        assert!(matches!(box_stats(&[]), Err(Error::EmptySeries)));
    }

    #[test]
    fn box_stats_quartiles_interpolate() {
        // rank 0.75 -> between 1 and 2; rank 2.25 -> between 3 and 4
        let b = box_stats(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(b.lower_quartile, 1.75);
        assert_eq!(b.upper_quartile, 3.25);
    }
}
