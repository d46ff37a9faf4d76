//! Page-level cache simulation: LRU and ARC replacement, hit-ratio curves
//! over cache sizes expressed as a fraction of the workload footprint, and
//! convergence-point search.
//!
//! Requests are expanded into one access per 4-KiB page they cover
//! (configurable page size). Reads and writes are treated identically.

mod arc;
mod list;
mod lru;

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::footprint;
use crate::trace::{Direction, TraceRecord, Workload};

pub use arc::{ArcCache, ArcState};
pub use lru::LruCache;

pub const DEFAULT_PAGE_SIZE: u64 = 4096;
pub const DEFAULT_SIZE_FRACTIONS: [f64; 3] = [0.01, 0.05, 0.10];
pub const DEFAULT_CONVERGENCE_EPSILON_PP: f64 = 2.0;

/// A cache replacement policy over integer page ids.
pub trait ReplacementPolicy {
    /// Touches `page`, returning whether it was resident.
    fn access(&mut self, page: u64) -> bool;
    fn capacity(&self) -> usize;
    /// Number of resident pages.
    fn resident(&self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Lru,
    Arc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::Lru, Algorithm::Arc];

    pub fn build(self, capacity_pages: usize) -> Box<dyn ReplacementPolicy + Send> {
        match self {
            Algorithm::Lru => Box::new(LruCache::new(capacity_pages)),
            Algorithm::Arc => Box::new(ArcCache::new(capacity_pages)),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Lru => "lru",
            Algorithm::Arc => "arc",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lru" => Ok(Algorithm::Lru),
            "arc" => Ok(Algorithm::Arc),
            other => Err(Error::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageAccess {
    pub page_id: u64,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub page_size_bytes: u64,
    pub capacity_pages: usize,
    pub algorithm: Algorithm,
}

impl CacheConfig {
    pub fn new(algorithm: Algorithm, capacity_pages: usize) -> Self {
        CacheConfig {
            page_size_bytes: DEFAULT_PAGE_SIZE,
            capacity_pages,
            algorithm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheResult {
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub hit_ratio: f64,
}

impl CacheResult {
    pub fn from_counts(accesses: u64, hits: u64) -> Self {
        assert!(hits <= accesses);
        CacheResult {
            accesses,
            hits,
            misses: accesses - hits,
            hit_ratio: if accesses == 0 { 0.0 } else { hits as f64 / accesses as f64 },
        }
    }
}

fn check_page_size(page_size: u64) -> Result<()> {
    if page_size.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("page size {page_size} is not a power of two")))
    }
}

/// Page ids covered by one request, ascending.
#[inline]
pub fn request_pages(r: &TraceRecord, page_size: u64) -> std::ops::RangeInclusive<u64> {
    let first = r.offset_bytes / page_size;
    let last = (r.end_bytes() - 1) / page_size;
    first..=last
}

/// Expands requests into per-page accesses, preserving request order.
pub fn to_page_sequence(workload: &Workload, page_size_bytes: u64) -> Result<Vec<PageAccess>> {
    check_page_size(page_size_bytes)?;
    Ok(workload
        .records()
        .iter()
        .flat_map(|r| {
            request_pages(r, page_size_bytes).map(move |page_id| PageAccess {
                page_id,
                direction: r.direction,
            })
        })
        .collect())
}

/// Runs `pages` through a fresh policy and returns the hit/miss outcome of
/// every access.
pub fn hit_sequence<I>(pages: I, algorithm: Algorithm, capacity_pages: usize) -> Vec<bool>
where
    I: IntoIterator<Item = u64>,
{
    let mut cache = algorithm.build(capacity_pages);
    pages.into_iter().map(|p| cache.access(p)).collect()
}

pub fn simulate_pages<I>(pages: I, algorithm: Algorithm, capacity_pages: usize) -> Result<CacheResult>
where
    I: IntoIterator<Item = u64>,
{
    if capacity_pages == 0 {
        return Err(Error::InvalidConfig("cache capacity must be at least one page".into()));
    }
    let mut cache = algorithm.build(capacity_pages);
    let (mut accesses, mut hits) = (0u64, 0u64);
    for p in pages {
        accesses += 1;
        hits += u64::from(cache.access(p));
    }
    Ok(CacheResult::from_counts(accesses, hits))
}

pub fn simulate(accesses: &[PageAccess], config: &CacheConfig) -> Result<CacheResult> {
    simulate_pages(accesses.iter().map(|a| a.page_id), config.algorithm, config.capacity_pages)
}

/// Simulates a workload directly, expanding pages on the fly.
pub fn simulate_workload(workload: &Workload, config: &CacheConfig) -> Result<CacheResult> {
    check_page_size(config.page_size_bytes)?;
    let ps = config.page_size_bytes;
    let pages = workload.records().iter().flat_map(|r| request_pages(r, ps));
    simulate_pages(pages, config.algorithm, config.capacity_pages)
}

/// `max(1, floor(fraction * footprint / page_size))`.
pub fn capacity_for_fraction(footprint_bytes: u64, fraction: f64, page_size: u64) -> usize {
    let pages = (fraction * footprint_bytes as f64 / page_size as f64).floor();
    (pages as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size_fraction: f64,
    pub capacity_pages: usize,
    pub result: CacheResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitRatioCurve {
    pub algorithm: Algorithm,
    pub points: Vec<CurvePoint>,
}

fn check_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.is_empty() {
        return Err(Error::InvalidConfig("at least one size fraction is required".into()));
    }
    if !fractions.iter().all(|&f| f > 0.0 && f <= 1.0) {
        return Err(Error::InvalidConfig("size fractions must lie in (0, 1]".into()));
    }
    if !fractions.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidConfig("size fractions must be strictly increasing".into()));
    }
    Ok(())
}

pub fn hit_ratio_curve(
    workload: &Workload,
    algorithm: Algorithm,
    size_fractions: &[f64],
    page_size_bytes: u64,
) -> Result<HitRatioCurve> {
    check_fractions(size_fractions)?;
    check_page_size(page_size_bytes)?;
    let fp = footprint(workload)?;
    let points = size_fractions
        .iter()
        .map(|&f| {
            let capacity_pages = capacity_for_fraction(fp, f, page_size_bytes);
            let config = CacheConfig { page_size_bytes, capacity_pages, algorithm };
            Ok(CurvePoint {
                size_fraction: f,
                capacity_pages,
                result: simulate_workload(workload, &config)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(HitRatioCurve { algorithm, points })
}

/// Smallest size fraction after which no larger size gains `epsilon_pp`
/// percentage points or more of hit ratio.
///
/// The largest size is never a candidate on its own, so a curve whose last
/// step still gains at least `epsilon_pp` has no convergence point.
pub fn convergence_point(curve: &HitRatioCurve, epsilon_pp: f64) -> Option<f64> {
    let pts = &curve.points;
    if pts.len() < 2 {
        return None;
    }
    let eps = epsilon_pp / 100.0;
    (0..pts.len() - 1)
        .find(|&i| {
            let base = pts[i].result.hit_ratio;
            pts[i + 1..].iter().all(|p| p.result.hit_ratio - base < eps)
        })
        .map(|i| pts[i].size_fraction)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmComparison {
    pub size_fraction: f64,
    pub capacity_pages: usize,
    pub lru: CacheResult,
    pub arc: CacheResult,
    /// ARC only when it is strictly better.
    pub preferred: Algorithm,
}

pub fn compare_algorithms(
    workload: &Workload,
    size_fractions: &[f64],
    page_size_bytes: u64,
) -> Result<Vec<AlgorithmComparison>> {
    let lru = hit_ratio_curve(workload, Algorithm::Lru, size_fractions, page_size_bytes)?;
    let arc = hit_ratio_curve(workload, Algorithm::Arc, size_fractions, page_size_bytes)?;
    Ok(lru
        .points
        .iter()
        .zip(&arc.points)
        .map(|(l, a)| AlgorithmComparison {
            size_fraction: l.size_fraction,
            capacity_pages: l.capacity_pages,
            lru: l.result,
            arc: a.result,
            preferred: if a.result.hits > l.result.hits { Algorithm::Arc } else { Algorithm::Lru },
        })
        .collect())
}

pub const CURVE_CSV_HEADER: &str = "volume_id,algorithm,size_fraction,accesses,hits,hit_ratio";

pub fn write_curve_rows<W: Write + ?Sized>(out: &mut W, volume_id: &str, curve: &HitRatioCurve) -> io::Result<()> {
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            volume_id, curve.algorithm, p.size_fraction, p.result.accesses, p.result.hits, p.result.hit_ratio
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(offset: u64, length: u64) -> Workload {
        Workload::new("v", vec![TraceRecord::new(0, "v", Direction::Read, offset, length)]).unwrap()
    }

    fn ids(w: &Workload) -> Vec<u64> {
        to_page_sequence(w, 4096).unwrap().iter().map(|a| a.page_id).collect()
    }

    #[test]
    fn page_expansion() {
        assert_eq!(ids(&one(0, 4096)), [0]);
        assert_eq!(ids(&one(2048, 4096)), [0, 1]);
        assert_eq!(ids(&one(0, 12288)), [0, 1, 2]);
        assert_eq!(ids(&one(4095, 1)), [0]);
        assert!(to_page_sequence(&one(0, 1), 3000).is_err());
    }

    #[test]
    fn lru_hand_trace() {
        // A B A C B with two slots: only the second A hits.
        let r = simulate_pages([1, 2, 1, 3, 2], Algorithm::Lru, 2).unwrap();
        assert_eq!((r.hits, r.misses), (1, 4));
        assert_eq!(r.hit_ratio, 0.2);
    }

    #[test]
    fn immediate_rereference_hits() {
        for a in Algorithm::ALL {
            assert_eq!(simulate_pages([9, 9], a, 1).unwrap().hits, 1);
        }
    }

    #[test]
    fn zero_capacity_rejected() {
        assert!(simulate_pages([1], Algorithm::Lru, 0).is_err());
    }

    #[test]
    fn capacity_rounding() {
        assert_eq!(capacity_for_fraction(409_600, 0.01, 4096), 1);
        assert_eq!(capacity_for_fraction(4096 * 1000, 0.05, 4096), 50);
        assert_eq!(capacity_for_fraction(4096 * 1999, 0.01, 4096), 19);
        assert_eq!(capacity_for_fraction(100, 0.5, 4096), 1);
    }

    #[test]
    fn curve_rejects_bad_fractions() {
        let w = one(0, 4096);
        assert!(hit_ratio_curve(&w, Algorithm::Lru, &[0.1, 0.05], 4096).is_err());
        assert!(hit_ratio_curve(&w, Algorithm::Lru, &[0.0], 4096).is_err());
        assert!(hit_ratio_curve(&w, Algorithm::Lru, &[], 4096).is_err());
        let empty = Workload::new("v", vec![]).unwrap();
        assert!(matches!(
            hit_ratio_curve(&empty, Algorithm::Lru, &[0.1], 4096),
            Err(Error::EmptyWorkload)
        ));
    }

    fn curve(ratios_pct: &[(f64, u64)]) -> HitRatioCurve {
        HitRatioCurve {
            algorithm: Algorithm::Lru,
            points: ratios_pct
                .iter()
                .map(|&(f, pct)| CurvePoint {
                    size_fraction: f,
                    capacity_pages: 1,
                    result: CacheResult::from_counts(100, pct),
                })
                .collect(),
        }
    }

    #[test]
    fn convergence_examples() {
        assert_eq!(convergence_point(&curve(&[(0.01, 10), (0.05, 40), (0.10, 41)]), 2.0), Some(0.05));
        assert_eq!(convergence_point(&curve(&[(0.01, 15), (0.05, 15), (0.10, 15)]), 2.0), Some(0.01));
        assert_eq!(convergence_point(&curve(&[(0.01, 10), (0.05, 30), (0.10, 50)]), 2.0), None);
        assert_eq!(convergence_point(&curve(&[(0.01, 10)]), 2.0), None);
    }

    #[test]
    fn convergence_requires_all_later_points() {
        // 0.05 -> 0.10 is flat but 0.20 jumps again.
        let c = curve(&[(0.01, 10), (0.05, 40), (0.10, 41), (0.20, 60), (0.5, 61)]);
        assert_eq!(convergence_point(&c, 2.0), Some(0.20));
    }

    #[test]
    fn comparison_tie_prefers_lru() {
        let w = Workload::new(
            "v",
            (0..10).map(|i| TraceRecord::new(i, "v", Direction::Read, 0, 4096)).collect(),
        )
        .unwrap();
        let cmp = compare_algorithms(&w, &DEFAULT_SIZE_FRACTIONS, 4096).unwrap();
        for c in cmp {
            assert_eq!(c.lru.hits, c.arc.hits);
            assert_eq!(c.preferred, Algorithm::Lru);
        }
    }
}
