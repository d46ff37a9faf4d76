//! Macroscopic IO concentration: per-slice access counts on 1-GiB macro
//! pages, the concentrated page set of each slice, how long pages stay
//! concentrated, and how often each page is concentrated at all.
//!
//! A request belongs to the macro page containing its first byte. Slices are
//! fixed-length intervals counted from the workload's first record; slices
//! without any request are kept (with empty counts) because run lengths and
//! predictability ratios are taken over the full observation window.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::Workload;

pub const MACRO_PAGE_BYTES: u64 = 1 << 30;
pub const DEFAULT_UNPREDICTABLE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SliceCounts {
    pub slice_index: u64,
    /// Macro page id to access count. Pages without accesses are absent.
    pub counts: BTreeMap<u64, u64>,
}

impl SliceCounts {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `(page, count)` by count descending, then page ascending.
    pub fn ranked(&self) -> Vec<(u64, u64)> {
        let mut v: Vec<(u64, u64)> = self.counts.iter().map(|(&p, &c)| (p, c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

pub fn slice_page_counts(workload: &Workload, macro_page_bytes: u64, interval_s: u64) -> Result<Vec<SliceCounts>> {
    if macro_page_bytes == 0 || interval_s == 0 {
        return Err(Error::InvalidConfig("macro page size and interval must be positive".into()));
    }
    let origin = workload.first_timestamp_us().ok_or(Error::EmptyWorkload)?;
    let last = workload.last_timestamp_us().unwrap_or(origin);
    let width = interval_s * 1_000_000;
    let n = (last - origin) / width + 1;
    let mut slices: Vec<SliceCounts> = (0..n)
        .map(|slice_index| SliceCounts { slice_index, counts: BTreeMap::new() })
        .collect();
    for r in workload.records() {
        let s = ((r.timestamp_us - origin) / width) as usize;
        *slices[s].counts.entry(r.offset_bytes / macro_page_bytes).or_default() += 1;
    }
    Ok(slices)
}

/// Average share of the rank-`r` busiest page, for ranks `1..=k`, over the
/// slices that saw any access. Ranks beyond a slice's page count add zero.
pub fn top_page_share_profile(slices: &[SliceCounts], k: usize) -> Result<Vec<f64>> {
    let mut sums = vec![0.0f64; k];
    let mut active = 0usize;
    for s in slices.iter().filter(|s| !s.is_empty()) {
        active += 1;
        let total = s.total() as f64;
        for (rank, (_, c)) in s.ranked().into_iter().take(k).enumerate() {
            sums[rank] += c as f64 / total;
        }
    }
    if active == 0 {
        return Err(Error::NoActivity);
    }
    Ok(sums.into_iter().map(|s| s / active as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcentratedSet {
    pub slice_index: u64,
    /// Busiest first.
    pub pages: Vec<u64>,
    pub covered_count: u64,
    pub total_count: u64,
}

/// Takes pages busiest-first until their combined count is strictly more
/// than half of the slice total.
pub fn concentrated_pages(slice: &SliceCounts) -> Result<ConcentratedSet> {
    if slice.is_empty() {
        return Err(Error::EmptySlice);
    }
    let total = slice.total();
    let mut covered = 0u64;
    let mut pages = Vec::new();
    for (page, count) in slice.ranked() {
        pages.push(page);
        covered += count;
        if covered * 2 > total {
            break;
        }
    }
    Ok(ConcentratedSet {
        slice_index: slice.slice_index,
        pages,
        covered_count: covered,
        total_count: total,
    })
}

/// Concentrated sets of all non-empty slices, in slice order.
pub fn concentrated_sets(slices: &[SliceCounts]) -> Vec<ConcentratedSet> {
    slices
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| concentrated_pages(s).expect("non-empty slice"))
        .collect()
}

/// For each page ever concentrated, the lengths (in slices) of its maximal
/// runs of consecutive concentrated slices, in time order.
pub fn concentration_run_lengths(slices: &[SliceCounts]) -> BTreeMap<u64, Vec<u64>> {
    // page -> (last slice index seen, runs)
    let mut state: BTreeMap<u64, (u64, Vec<u64>)> = BTreeMap::new();
    for set in concentrated_sets(slices) {
        let idx = set.slice_index;
        for page in set.pages {
            match state.get_mut(&page) {
                Some((last, runs)) if *last + 1 == idx => {
                    *runs.last_mut().expect("run exists") += 1;
                    *last = idx;
                }
                Some((last, runs)) => {
                    runs.push(1);
                    *last = idx;
                }
                None => {
                    state.insert(page, (idx, vec![1]));
                }
            }
        }
    }
    state.into_iter().map(|(p, (_, runs))| (p, runs)).collect()
}

/// Every run of every page, ascending.
pub fn pooled_run_lengths(runs: &BTreeMap<u64, Vec<u64>>) -> Vec<u64> {
    let mut all: Vec<u64> = runs.values().flatten().copied().collect();
    all.sort_unstable();
    all
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioDenominator {
    /// Every slice in the observation window, including empty ones.
    #[default]
    AllSlices,
    /// Only slices with at least one access.
    ActiveSlices,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PagePredictability {
    pub macro_page_id: u64,
    pub concentration_judgments: u64,
    pub judgment_ratio: f64,
    pub unpredictable: bool,
}

/// Judgment ratio of every page that was concentrated at least once. A page
/// is unpredictable when its ratio is strictly below `threshold`.
pub fn classify_predictability(
    slices: &[SliceCounts],
    threshold: f64,
    denominator: RatioDenominator,
) -> Result<Vec<PagePredictability>> {
    let slice_count = match denominator {
        RatioDenominator::AllSlices => slices.len(),
        RatioDenominator::ActiveSlices => slices.iter().filter(|s| !s.is_empty()).count(),
    };
    if slice_count == 0 {
        return Err(Error::NoActivity);
    }
    let mut judgments: BTreeMap<u64, u64> = BTreeMap::new();
    for set in concentrated_sets(slices) {
        for p in set.pages {
            *judgments.entry(p).or_default() += 1;
        }
    }
    Ok(judgments
        .into_iter()
        .map(|(macro_page_id, n)| {
            let judgment_ratio = n as f64 / slice_count as f64;
            PagePredictability {
                macro_page_id,
                concentration_judgments: n,
                judgment_ratio,
                unpredictable: judgment_ratio < threshold,
            }
        })
        .collect())
}

/// Fraction of classified pages that are unpredictable.
pub fn unpredictable_fraction(pages: &[PagePredictability]) -> Option<f64> {
    if pages.is_empty() {
        return None;
    }
    let n = pages.iter().filter(|p| p.unpredictable).count();
    Some(n as f64 / pages.len() as f64)
}
