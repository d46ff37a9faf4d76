//! Discrete-interval simulation of a two-tier (fast/slow) store shared by
//! several workloads.
//!
//! Time advances in decision intervals measured from the earliest request of
//! the whole workload set. Within an interval every request is served at the
//! latency of the tier currently holding it; placement only changes at
//! interval boundaries, using nothing but what has already been observed.
//! Data movement between tiers is a per-interval budget of
//! `migration_bandwidth_bytes_per_s * decision_interval_s` bytes and adds no
//! request latency.
//!
//! Policies:
//!
//! * [`PlacementPolicy::AllSecond`]: everything stays on the slow tier.
//! * [`PlacementPolicy::AllFirst`]: every admitted workload is placed on the
//!   fast tier up front.
//! * [`PlacementPolicy::DynamicPromotion`]: after each interval the
//!   concentrated macro regions of that interval are promoted, evicting the
//!   residents that saw the fewest accesses.
//! * [`PlacementPolicy::MonitoredCache`]: the fast tier acts as a page cache
//!   per workload; a workload whose hit ratio stays low is taken off the
//!   cache and either pinned wholly to the fast tier or sent to the slow one.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::cache::{capacity_for_fraction, request_pages, Algorithm, CacheResult, ReplacementPolicy};
use crate::concentration::{concentrated_pages, SliceCounts, MACRO_PAGE_BYTES};
use crate::error::{Error, Result};
use crate::stats::{footprint, select_top_workloads, summarize, Metric, WorkloadSummary};
use crate::trace::{Direction, TraceRecord, Workload};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierLatency {
    pub read_us: f64,
    pub write_us: f64,
}

impl TierLatency {
    pub fn uniform(us: f64) -> Self {
        TierLatency { read_us: us, write_us: us }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMode {
    /// Reject placements that do not fit with [`Error::CapacityInfeasible`].
    #[default]
    Strict,
    /// Place the busiest regions that fit and leave the rest on tier 2.
    BestEffort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierConfig {
    pub tier1_capacity_bytes: u64,
    pub tier1_latency: TierLatency,
    pub tier2_latency: TierLatency,
    pub migration_bandwidth_bytes_per_s: u64,
    pub decision_interval_s: u64,
    pub promotion_unit_bytes: u64,
    #[serde(default)]
    pub capacity_mode: CapacityMode,
    /// When set, only workloads selected by [`admission_filter`] at this
    /// fraction may use tier 1.
    #[serde(default)]
    pub admission_fraction: Option<f64>,
}

impl Default for TierConfig {
    /// 64 GiB of NVMe-class tier 1 over HDD-class tier 2, 1 GiB/s of
    /// migration bandwidth.
    fn default() -> Self {
        TierConfig {
            tier1_capacity_bytes: 64 * MACRO_PAGE_BYTES,
            tier1_latency: TierLatency::uniform(100.0),
            tier2_latency: TierLatency::uniform(5000.0),
            migration_bandwidth_bytes_per_s: MACRO_PAGE_BYTES,
            decision_interval_s: 15,
            promotion_unit_bytes: MACRO_PAGE_BYTES,
            capacity_mode: CapacityMode::Strict,
            admission_fraction: None,
        }
    }
}

impl TierConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        let (t1, t2) = (&self.tier1_latency, &self.tier2_latency);
        let lat_ok = |l: f64| l.is_finite() && l >= 0.0;
        if ![t1.read_us, t1.write_us, t2.read_us, t2.write_us].into_iter().all(lat_ok) {
            return bad("latencies must be finite and non-negative");
        }
        if !(t1.read_us < t2.read_us && t1.write_us < t2.write_us) {
            return bad("tier-1 latency must be below tier-2 latency");
        }
        if self.tier1_capacity_bytes == 0 || self.migration_bandwidth_bytes_per_s == 0 {
            return bad("capacity and migration bandwidth must be positive");
        }
        if self.decision_interval_s == 0 || self.promotion_unit_bytes == 0 {
            return bad("decision interval and promotion unit must be positive");
        }
        if let Some(f) = self.admission_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return bad("admission fraction must lie in (0, 1]");
            }
        }
        Ok(())
    }

    pub fn capacity_units(&self) -> u64 {
        self.tier1_capacity_bytes / self.promotion_unit_bytes
    }

    pub fn migration_budget_units(&self) -> u64 {
        let bytes = self.migration_bandwidth_bytes_per_s as u128 * self.decision_interval_s as u128;
        (bytes / self.promotion_unit_bytes as u128).min(u64::MAX as u128) as u64
    }

    fn interval_us(&self) -> u64 {
        self.decision_interval_s * 1_000_000
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoredCacheParams {
    pub algorithm: Algorithm,
    /// Cache size per workload as a fraction of its footprint.
    pub cache_fraction: f64,
    pub page_size_bytes: u64,
    pub low_threshold: f64,
    pub consecutive_n: usize,
    /// Workloads that go to tier 1, not tier 2, when their cache is dropped.
    pub performance_critical: BTreeSet<String>,
}

impl Default for MonitoredCacheParams {
    fn default() -> Self {
        MonitoredCacheParams {
            algorithm: Algorithm::Arc,
            cache_fraction: 0.05,
            page_size_bytes: 4096,
            low_threshold: 0.20,
            consecutive_n: 3,
            performance_critical: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementPolicy {
    AllSecond,
    AllFirst,
    DynamicPromotion,
    MonitoredCache(MonitoredCacheParams),
}

impl PlacementPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            PlacementPolicy::AllSecond => "all_second",
            PlacementPolicy::AllFirst => "all_first",
            PlacementPolicy::DynamicPromotion => "dynamic_promotion",
            PlacementPolicy::MonitoredCache(_) => "monitored_cache",
        }
    }
}

/// One promotion unit of one volume.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegionId {
    pub volume_id: String,
    pub page: u64,
}

impl RegionId {
    pub fn new(volume_id: impl Into<String>, page: u64) -> Self {
        RegionId { volume_id: volume_id.into(), page }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MigrationKind {
    Promote,
    Demote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Migration {
    pub region: RegionId,
    pub kind: MigrationKind,
}

/// Outcome of one promotion decision.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PromotionStep {
    pub placement: BTreeSet<RegionId>,
    pub migrations: Vec<Migration>,
}

/// Decides tier-1 residency for the next interval from the counts of the
/// interval that just ended.
///
/// `interval` maps each volume to its macro-region counts for that interval
/// (regions are `promotion_unit_bytes` wide). Candidates are the union of
/// every volume's concentrated set, busiest first with ties by
/// `(volume_id, page)`. A candidate is promoted into free space while the
/// migration budget lasts; when tier 1 is full it replaces the resident with
/// the lowest count in the same interval (never one promoted in this step),
/// provided that resident's count is strictly lower and the budget covers
/// both moves.
pub fn dynamic_promotion_step(
    interval: &BTreeMap<String, SliceCounts>,
    current: &BTreeSet<RegionId>,
    config: &TierConfig,
) -> PromotionStep {
    let count_of = |r: &RegionId| {
        interval
            .get(&r.volume_id)
            .and_then(|s| s.counts.get(&r.page).copied())
            .unwrap_or(0)
    };

    let mut candidates: Vec<(RegionId, u64)> = Vec::new();
    for (vol, slice) in interval {
        if let Ok(set) = concentrated_pages(slice) {
            for page in set.pages {
                candidates.push((RegionId::new(vol.clone(), page), slice.counts[&page]));
            }
        }
    }
    candidates.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let capacity = config.capacity_units();
    let mut budget = config.migration_budget_units();
    let mut placement = current.clone();
    let mut fresh: BTreeSet<RegionId> = BTreeSet::new();
    let mut migrations = Vec::new();

    for (cand, count) in candidates {
        if placement.contains(&cand) {
            continue;
        }
        if (placement.len() as u64) < capacity {
            if budget < 1 {
                break;
            }
            budget -= 1;
        } else {
            if budget < 2 {
                break;
            }
            let victim = placement
                .iter()
                .filter(|r| !fresh.contains(*r))
                .min_by(|a, b| count_of(a).cmp(&count_of(b)).then_with(|| a.cmp(b)))
                .cloned();
            match victim {
                Some(v) if count_of(&v) < count => {
                    placement.remove(&v);
                    migrations.push(Migration { region: v, kind: MigrationKind::Demote });
                    budget -= 2;
                }
                // Later candidates are no busier, so none can displace anyone.
                _ => break,
            }
        }
        placement.insert(cand.clone());
        fresh.insert(cand.clone());
        migrations.push(Migration { region: cand, kind: MigrationKind::Promote });
    }
    PromotionStep { placement, migrations }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheDecision {
    KeepCache,
    BypassToFirstTier,
    BypassToSecondTier,
}

/// Drops the cache once the last `consecutive_n` hit ratios are all below
/// `low_threshold`.
pub fn monitored_cache_decision(
    history: &[CacheResult],
    low_threshold: f64,
    consecutive_n: usize,
    performance_critical: bool,
) -> CacheDecision {
    let n = consecutive_n.max(1);
    if history.len() < n {
        return CacheDecision::KeepCache;
    }
    if history[history.len() - n..].iter().all(|r| r.hit_ratio < low_threshold) {
        if performance_critical {
            CacheDecision::BypassToFirstTier
        } else {
            CacheDecision::BypassToSecondTier
        }
    } else {
        CacheDecision::KeepCache
    }
}

/// Volumes allowed on tier 1: the read+write selection at `fraction`.
pub fn admission_filter(summaries: &[WorkloadSummary], fraction: f64) -> Result<BTreeSet<String>> {
    Ok(select_top_workloads(summaries, fraction, Metric::ReadWrite)?
        .into_iter()
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalLatency {
    pub interval: u64,
    pub requests: u64,
    pub tier1_requests: u64,
    /// `None` for an interval without requests.
    pub mean_latency_us: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierSimResult {
    pub requests_served: u64,
    pub tier1_served_fraction: f64,
    pub mean_latency_us: f64,
    pub promotions: u64,
    pub demotions: u64,
    pub bytes_migrated: u64,
    pub intervals: Vec<IntervalLatency>,
}

impl TierSimResult {
    /// Tier-1 share of requests over the intervals in `range`.
    pub fn tier1_fraction_over(&self, range: std::ops::Range<usize>) -> Option<f64> {
        let sel = &self.intervals[range.start.min(self.intervals.len())..range.end.min(self.intervals.len())];
        let total: u64 = sel.iter().map(|i| i.requests).sum();
        let t1: u64 = sel.iter().map(|i| i.tier1_requests).sum();
        (total > 0).then(|| t1 as f64 / total as f64)
    }

    pub fn write_interval_csv<W: Write + ?Sized>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "interval,requests,tier1_requests,mean_latency_us")?;
        for i in &self.intervals {
            let mean = i.mean_latency_us.map(|m| m.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", i.interval, i.requests, i.tier1_requests, mean)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierReport {
    pub policy: String,
    pub capacity_mode: CapacityMode,
    pub per_workload: BTreeMap<String, TierSimResult>,
    pub aggregate: TierSimResult,
    /// Bytes held on tier 1 after each interval boundary.
    pub tier1_bytes_per_interval: Vec<u64>,
    /// Bytes moved between tiers at each interval boundary.
    pub migrated_bytes_per_interval: Vec<u64>,
}

/// Request counts per (tier, direction).
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    counts: [u64; 4],
}

impl Tally {
    fn add(&mut self, tier1: bool, d: Direction) {
        let i = (if tier1 { 0 } else { 2 }) + usize::from(d == Direction::Write);
        self.counts[i] += 1;
    }

    fn merge(&mut self, o: &Tally) {
        for (a, b) in self.counts.iter_mut().zip(o.counts) {
            *a += b;
        }
    }

    fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn tier1(&self) -> u64 {
        self.counts[0] + self.counts[1]
    }

    /// Request-weighted mean latency. A tally with one latency class
    /// returns that latency exactly.
    fn mean(&self, cfg: &TierConfig) -> Option<f64> {
        let n = self.total();
        if n == 0 {
            return None;
        }
        let lat = [
            cfg.tier1_latency.read_us,
            cfg.tier1_latency.write_us,
            cfg.tier2_latency.read_us,
            cfg.tier2_latency.write_us,
        ];
        let (mut mean, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for (c, l) in self.counts.iter().zip(lat) {
            if *c > 0 {
                mean += (*c as f64 / n as f64) * l;
                lo = lo.min(l);
                hi = hi.max(l);
            }
        }
        Some(mean.clamp(lo, hi))
    }
}

struct Lane<'a> {
    workload: &'a Workload,
    cursor: usize,
    eligible: bool,
    tallies: Vec<Tally>,
    promotions: u64,
    demotions: u64,
}

struct Sim<'a> {
    cfg: &'a TierConfig,
    origin: u64,
    n_intervals: u64,
    lanes: Vec<Lane<'a>>,
    tier1_bytes: Vec<u64>,
    migrated: Vec<u64>,
}

impl<'a> Sim<'a> {
    fn new(workloads: &'a [Workload], cfg: &'a TierConfig) -> Result<Self> {
        cfg.validate()?;
        if workloads.is_empty() || workloads.iter().any(Workload::is_empty) {
            return Err(Error::EmptyWorkload);
        }
        let mut seen = BTreeSet::new();
        if !workloads.iter().all(|w| seen.insert(w.volume_id())) {
            return Err(Error::InvalidConfig("duplicate volume in workload set".into()));
        }
        let origin = workloads.iter().filter_map(Workload::first_timestamp_us).min().unwrap_or(0);
        let last = workloads.iter().filter_map(Workload::last_timestamp_us).max().unwrap_or(0);
        let n_intervals = (last - origin) / cfg.interval_us() + 1;

        let eligible: Option<BTreeSet<String>> = match cfg.admission_fraction {
            Some(f) => {
                let sums = workloads.iter().map(summarize).collect::<Result<Vec<_>>>()?;
                Some(admission_filter(&sums, f)?)
            }
            None => None,
        };
        let mut lanes: Vec<Lane> = workloads
            .iter()
            .map(|w| Lane {
                workload: w,
                cursor: 0,
                eligible: eligible.as_ref().is_none_or(|e| e.contains(w.volume_id())),
                tallies: vec![Tally::default(); n_intervals as usize],
                promotions: 0,
                demotions: 0,
            })
            .collect();
        lanes.sort_by(|a, b| a.workload.volume_id().cmp(b.workload.volume_id()));
        Ok(Sim {
            cfg,
            origin,
            n_intervals,
            lanes,
            tier1_bytes: Vec::with_capacity(n_intervals as usize),
            migrated: Vec::with_capacity(n_intervals as usize),
        })
    }

    /// Records of lane `i` that fall in `interval`; advances the cursor.
    fn take(&mut self, i: usize, interval: u64) -> &'a [TraceRecord] {
        let end = self.origin + (interval + 1) * self.cfg.interval_us();
        let lane = &mut self.lanes[i];
        let recs = lane.workload.records();
        let start = lane.cursor;
        let stop = start + recs[start..].partition_point(|r| r.timestamp_us < end);
        lane.cursor = stop;
        &recs[start..stop]
    }

    fn region_of(&self, r: &TraceRecord) -> u64 {
        r.offset_bytes / self.cfg.promotion_unit_bytes
    }

    fn finish(self, policy: &PlacementPolicy) -> TierReport {
        let cfg = self.cfg;
        let unit = cfg.promotion_unit_bytes;
        let build = |tallies: &[Tally], promotions: u64, demotions: u64| {
            let mut all = Tally::default();
            let intervals = tallies
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    all.merge(t);
                    IntervalLatency {
                        interval: i as u64,
                        requests: t.total(),
                        tier1_requests: t.tier1(),
                        mean_latency_us: t.mean(cfg),
                    }
                })
                .collect();
            TierSimResult {
                requests_served: all.total(),
                tier1_served_fraction: if all.total() == 0 { 0.0 } else { all.tier1() as f64 / all.total() as f64 },
                mean_latency_us: all.mean(cfg).unwrap_or(0.0),
                promotions,
                demotions,
                bytes_migrated: (promotions + demotions) * unit,
                intervals,
            }
        };
        let mut agg_tallies = vec![Tally::default(); self.n_intervals as usize];
        let (mut p, mut d) = (0, 0);
        let mut per_workload = BTreeMap::new();
        for lane in &self.lanes {
            for (a, t) in agg_tallies.iter_mut().zip(&lane.tallies) {
                a.merge(t);
            }
            p += lane.promotions;
            d += lane.demotions;
            per_workload.insert(
                lane.workload.volume_id().to_string(),
                build(&lane.tallies, lane.promotions, lane.demotions),
            );
        }
        TierReport {
            policy: policy.name().to_string(),
            capacity_mode: cfg.capacity_mode,
            per_workload,
            aggregate: build(&agg_tallies, p, d),
            tier1_bytes_per_interval: self.tier1_bytes,
            migrated_bytes_per_interval: self.migrated,
        }
    }
}

pub fn simulate_tiering(workloads: &[Workload], config: &TierConfig, policy: &PlacementPolicy) -> Result<TierReport> {
    let mut sim = Sim::new(workloads, config)?;
    match policy {
        PlacementPolicy::AllSecond => run_static(&mut sim, &BTreeSet::new(), &BTreeSet::new(), 0),
        PlacementPolicy::AllFirst => run_all_first(&mut sim)?,
        PlacementPolicy::DynamicPromotion => run_dynamic(&mut sim)?,
        PlacementPolicy::MonitoredCache(params) => run_monitored(&mut sim, params)?,
    }
    Ok(sim.finish(policy))
}

/// Serves every interval from a fixed placement: whole volumes in
/// `whole`, individual regions in `regions`.
fn run_static(sim: &mut Sim, whole: &BTreeSet<String>, regions: &BTreeSet<RegionId>, tier1_bytes: u64) {
    for interval in 0..sim.n_intervals {
        for i in 0..sim.lanes.len() {
            let recs = sim.take(i, interval);
            let vol = sim.lanes[i].workload.volume_id();
            let all = whole.contains(vol);
            for r in recs {
                let on1 = all || (!regions.is_empty() && regions.contains(&RegionId::new(vol, sim.region_of(r))));
                sim.lanes[i].tallies[interval as usize].add(on1, r.direction);
            }
        }
        sim.tier1_bytes.push(tier1_bytes);
        sim.migrated.push(0);
    }
}

fn run_all_first(sim: &mut Sim) -> Result<()> {
    let cfg = sim.cfg;
    let admitted: Vec<&Workload> = sim.lanes.iter().filter(|l| l.eligible).map(|l| l.workload).collect();
    let mut required = 0u64;
    for w in &admitted {
        required = required.saturating_add(footprint(w)?);
    }
    if required <= cfg.tier1_capacity_bytes {
        let whole = admitted.iter().map(|w| w.volume_id().to_string()).collect();
        run_static(sim, &whole, &BTreeSet::new(), required);
        return Ok(());
    }
    if cfg.capacity_mode == CapacityMode::Strict {
        return Err(Error::CapacityInfeasible { required, available: cfg.tier1_capacity_bytes });
    }
    // Static best effort: the busiest regions over the whole run.
    let mut counts: BTreeMap<RegionId, u64> = BTreeMap::new();
    for w in &admitted {
        for r in w.records() {
            *counts.entry(RegionId::new(w.volume_id(), sim.region_of(r))).or_default() += 1;
        }
    }
    let mut ranked: Vec<(RegionId, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let pinned: BTreeSet<RegionId> = ranked
        .into_iter()
        .take(cfg.capacity_units() as usize)
        .map(|(r, _)| r)
        .collect();
    let bytes = pinned.len() as u64 * cfg.promotion_unit_bytes;
    run_static(sim, &BTreeSet::new(), &pinned, bytes);
    Ok(())
}

fn run_dynamic(sim: &mut Sim) -> Result<()> {
    let cfg = sim.cfg;
    if cfg.tier1_capacity_bytes < cfg.promotion_unit_bytes {
        return Err(Error::CapacityInfeasible {
            required: cfg.promotion_unit_bytes,
            available: cfg.tier1_capacity_bytes,
        });
    }
    let mut placement: BTreeSet<RegionId> = BTreeSet::new();
    for interval in 0..sim.n_intervals {
        let mut observed: BTreeMap<String, SliceCounts> = BTreeMap::new();
        for i in 0..sim.lanes.len() {
            let recs = sim.take(i, interval);
            let vol = sim.lanes[i].workload.volume_id();
            let eligible = sim.lanes[i].eligible;
            let mut slice = SliceCounts { slice_index: interval, counts: BTreeMap::new() };
            for r in recs {
                let page = sim.region_of(r);
                let on1 = placement.contains(&RegionId::new(vol, page));
                sim.lanes[i].tallies[interval as usize].add(on1, r.direction);
                *slice.counts.entry(page).or_default() += 1;
            }
            if eligible && !slice.is_empty() {
                observed.insert(vol.to_string(), slice);
            }
        }
        if interval + 1 == sim.n_intervals {
            // Nothing is served after the last boundary.
            sim.tier1_bytes.push(placement.len() as u64 * cfg.promotion_unit_bytes);
            sim.migrated.push(0);
            break;
        }
        let step = dynamic_promotion_step(&observed, &placement, cfg);
        for m in &step.migrations {
            let lane = sim
                .lanes
                .iter_mut()
                .find(|l| l.workload.volume_id() == m.region.volume_id)
                .expect("migration for a simulated volume");
            match m.kind {
                MigrationKind::Promote => lane.promotions += 1,
                MigrationKind::Demote => lane.demotions += 1,
            }
        }
        placement = step.placement;
        sim.tier1_bytes.push(placement.len() as u64 * cfg.promotion_unit_bytes);
        sim.migrated.push(step.migrations.len() as u64 * cfg.promotion_unit_bytes);
    }
    Ok(())
}

enum Mode {
    Cached {
        cache: Box<dyn ReplacementPolicy + Send>,
        bytes: u64,
        history: Vec<CacheResult>,
    },
    Pinned {
        /// Regions still waiting for migration budget, busiest first.
        pending: Vec<u64>,
        resident: BTreeSet<u64>,
    },
    Second,
}

fn run_monitored(sim: &mut Sim, params: &MonitoredCacheParams) -> Result<()> {
    let cfg = sim.cfg;
    if !params.page_size_bytes.is_power_of_two() {
        return Err(Error::InvalidConfig("cache page size must be a power of two".into()));
    }
    if !(params.cache_fraction > 0.0 && params.cache_fraction <= 1.0) {
        return Err(Error::InvalidConfig("cache fraction must lie in (0, 1]".into()));
    }
    let unit = cfg.promotion_unit_bytes;
    let ps = params.page_size_bytes;

    // Allocate caches to admitted workloads, busiest first.
    let mut order: Vec<usize> = (0..sim.lanes.len()).filter(|&i| sim.lanes[i].eligible).collect();
    order.sort_by(|&a, &b| {
        let (wa, wb) = (sim.lanes[a].workload, sim.lanes[b].workload);
        wb.len().cmp(&wa.len()).then_with(|| wa.volume_id().cmp(wb.volume_id()))
    });
    let mut modes: Vec<Mode> = (0..sim.lanes.len()).map(|_| Mode::Second).collect();
    let mut committed = 0u64;
    for i in order {
        let fp = footprint(sim.lanes[i].workload)?;
        let pages = capacity_for_fraction(fp, params.cache_fraction, ps);
        let bytes = pages as u64 * ps;
        if committed + bytes > cfg.tier1_capacity_bytes {
            if cfg.capacity_mode == CapacityMode::Strict {
                return Err(Error::CapacityInfeasible {
                    required: committed + bytes,
                    available: cfg.tier1_capacity_bytes,
                });
            }
            continue;
        }
        committed += bytes;
        modes[i] = Mode::Cached { cache: params.algorithm.build(pages), bytes, history: Vec::new() };
    }

    let mut seen_counts: Vec<BTreeMap<u64, u64>> = vec![BTreeMap::new(); sim.lanes.len()];
    for interval in 0..sim.n_intervals {
        for i in 0..sim.lanes.len() {
            let recs = sim.take(i, interval);
            let (mut page_accesses, mut page_hits) = (0u64, 0u64);
            for r in recs {
                *seen_counts[i].entry(r.offset_bytes / unit).or_default() += 1;
                let on1 = match &mut modes[i] {
                    Mode::Cached { cache, .. } => {
                        let mut all_hit = true;
                        for p in request_pages(r, ps) {
                            page_accesses += 1;
                            let hit = cache.access(p);
                            page_hits += u64::from(hit);
                            all_hit &= hit;
                        }
                        all_hit
                    }
                    Mode::Pinned { resident, .. } => resident.contains(&(r.offset_bytes / unit)),
                    Mode::Second => false,
                };
                sim.lanes[i].tallies[interval as usize].add(on1, r.direction);
            }
            if let Mode::Cached { history, bytes, .. } = &mut modes[i] {
                if page_accesses > 0 {
                    history.push(CacheResult::from_counts(page_accesses, page_hits));
                }
                let critical = params.performance_critical.contains(sim.lanes[i].workload.volume_id());
                match monitored_cache_decision(history, params.low_threshold, params.consecutive_n, critical) {
                    CacheDecision::KeepCache => {}
                    CacheDecision::BypassToSecondTier => {
                        committed -= *bytes;
                        modes[i] = Mode::Second;
                    }
                    CacheDecision::BypassToFirstTier => {
                        committed -= *bytes;
                        let fp = footprint(sim.lanes[i].workload)?;
                        let mut regions: Vec<u64> = (0..fp.div_ceil(unit)).collect();
                        let seen = &seen_counts[i];
                        regions.sort_by(|a, b| {
                            let (ca, cb) = (seen.get(a).unwrap_or(&0), seen.get(b).unwrap_or(&0));
                            cb.cmp(ca).then(a.cmp(b))
                        });
                        let free_units = (cfg.tier1_capacity_bytes - committed) / unit;
                        if regions.len() as u64 > free_units {
                            if cfg.capacity_mode == CapacityMode::Strict {
                                return Err(Error::CapacityInfeasible {
                                    required: committed + regions.len() as u64 * unit,
                                    available: cfg.tier1_capacity_bytes,
                                });
                            }
                            regions.truncate(free_units as usize);
                        }
                        committed += regions.len() as u64 * unit;
                        modes[i] = Mode::Pinned { pending: regions, resident: BTreeSet::new() };
                    }
                }
            }
        }

        // Spend this boundary's migration budget on pending pins, by volume.
        // Nothing is served after the last boundary.
        let last = interval + 1 == sim.n_intervals;
        let mut budget = if last { 0 } else { cfg.migration_budget_units() };
        let mut moved = 0u64;
        for (i, mode) in modes.iter_mut().enumerate() {
            if let Mode::Pinned { pending, resident } = mode {
                let n = (pending.len() as u64).min(budget) as usize;
                for r in pending.drain(..n) {
                    resident.insert(r);
                }
                budget -= n as u64;
                moved += n as u64;
                sim.lanes[i].promotions += n as u64;
            }
        }
        let placed: u64 = modes
            .iter()
            .map(|m| match m {
                Mode::Cached { bytes, .. } => *bytes,
                Mode::Pinned { resident, .. } => resident.len() as u64 * unit,
                Mode::Second => 0,
            })
            .sum();
        sim.tier1_bytes.push(placed);
        sim.migrated.push(moved * unit);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slice(counts: &[(u64, u64)]) -> SliceCounts {
        SliceCounts { slice_index: 0, counts: counts.iter().copied().collect() }
    }

    fn wl(vol: &str, reqs: &[(u64, u64)]) -> Workload {
        let recs = reqs
            .iter()
            .map(|&(s, page)| TraceRecord::new(s * 1_000_000, vol, Direction::Read, page * MACRO_PAGE_BYTES, 4096))
            .collect();
        Workload::new(vol, recs).unwrap()
    }

    #[test]
    fn budget_units_from_bandwidth() {
        let c = TierConfig { migration_bandwidth_bytes_per_s: MACRO_PAGE_BYTES / 15, ..TierConfig::default() };
        // 15 * floor(GiB / 15) is a hair under one GiB.
        assert_eq!(c.migration_budget_units(), 0);
        let c = TierConfig { migration_bandwidth_bytes_per_s: MACRO_PAGE_BYTES, ..TierConfig::default() };
        assert_eq!(c.migration_budget_units(), 15);
    }

    fn cfg_exact(units: u64, budget_units: u64) -> TierConfig {
        TierConfig {
            tier1_capacity_bytes: units * MACRO_PAGE_BYTES,
            migration_bandwidth_bytes_per_s: budget_units * MACRO_PAGE_BYTES,
            decision_interval_s: 1,
            ..TierConfig::default()
        }
    }

    #[test]
    fn empty_interval_no_migrations() {
        let step = dynamic_promotion_step(&BTreeMap::new(), &BTreeSet::new(), &cfg_exact(4, 4));
        assert!(step.migrations.is_empty());
        assert!(step.placement.is_empty());
    }

    #[test]
    fn single_candidate_promoted() {
        let obs = BTreeMap::from([("a".to_string(), slice(&[(3, 10)]))]);
        let step = dynamic_promotion_step(&obs, &BTreeSet::new(), &cfg_exact(4, 4));
        assert_eq!(step.migrations, vec![Migration { region: RegionId::new("a", 3), kind: MigrationKind::Promote }]);
    }

    #[test]
    fn higher_count_candidate_wins_single_slot() {
        let obs = BTreeMap::from([
            ("a".to_string(), slice(&[(1, 8), (2, 1)])),
            ("b".to_string(), slice(&[(5, 9), (6, 1)])),
        ]);
        let step = dynamic_promotion_step(&obs, &BTreeSet::new(), &cfg_exact(1, 1));
        assert_eq!(step.placement, BTreeSet::from([RegionId::new("b", 5)]));
        assert_eq!(step.migrations.len(), 1);
    }

    #[test]
    fn full_tier_swaps_coldest_resident() {
        let obs = BTreeMap::from([("a".to_string(), slice(&[(1, 8), (2, 1)]))]);
        let current = BTreeSet::from([RegionId::new("a", 2), RegionId::new("z", 0)]);
        let step = dynamic_promotion_step(&obs, &current, &cfg_exact(2, 2));
        // z/0 saw nothing this interval and goes first.
        assert_eq!(step.placement, BTreeSet::from([RegionId::new("a", 1), RegionId::new("a", 2)]));
        assert_eq!(step.migrations[0], Migration { region: RegionId::new("z", 0), kind: MigrationKind::Demote });
        // Not enough budget for a swap.
        let step = dynamic_promotion_step(&obs, &current, &cfg_exact(2, 1));
        assert!(step.migrations.is_empty());
    }

    #[test]
    fn resident_with_equal_count_is_kept() {
        let obs = BTreeMap::from([
            ("a".to_string(), slice(&[(1, 5), (2, 5)])),
        ]);
        // Concentrated set {1, 2}; 2 is resident with the same count as 1.
        let current = BTreeSet::from([RegionId::new("a", 2)]);
        let step = dynamic_promotion_step(&obs, &current, &cfg_exact(1, 4));
        assert!(step.migrations.is_empty());
    }

    #[test]
    fn cache_decision_examples() {
        let h = |rs: &[f64]| -> Vec<CacheResult> {
            rs.iter().map(|&r| CacheResult::from_counts(100, (r * 100.0).round() as u64)).collect()
        };
        assert_eq!(monitored_cache_decision(&h(&[0.05, 0.08, 0.03]), 0.2, 3, true), CacheDecision::BypassToFirstTier);
        assert_eq!(monitored_cache_decision(&h(&[0.05, 0.08, 0.03]), 0.2, 3, false), CacheDecision::BypassToSecondTier);
        assert_eq!(monitored_cache_decision(&h(&[0.05, 0.30, 0.03]), 0.2, 3, true), CacheDecision::KeepCache);
        assert_eq!(monitored_cache_decision(&h(&[0.5, 0.6]), 0.2, 2, true), CacheDecision::KeepCache);
        assert_eq!(monitored_cache_decision(&h(&[0.01]), 0.2, 3, true), CacheDecision::KeepCache);
        assert_eq!(monitored_cache_decision(&h(&[0.9, 0.1, 0.1]), 0.2, 2, false), CacheDecision::BypassToSecondTier);
    }

    fn summary(id: &str, n: u64) -> WorkloadSummary {
        WorkloadSummary {
            volume_id: id.into(),
            read_count: n,
            write_count: 0,
            total_count: n,
            read_bytes: 0,
            write_bytes: 0,
            footprint_bytes: 0,
            first_ts_us: 0,
            last_ts_us: 0,
        }
    }

    #[test]
    fn admission_examples() {
        let s = [summary("a", 6), summary("b", 3), summary("c", 1)];
        assert_eq!(admission_filter(&s, 0.5).unwrap(), BTreeSet::from(["a".to_string()]));
        assert_eq!(admission_filter(&s, 1.0).unwrap().len(), 3);
        assert_eq!(admission_filter(&[summary("x", 0)], 0.5).unwrap().len(), 1);
    }

    #[test]
    fn degenerate_placements_hit_exact_latencies() {
        let ws = vec![wl("a", &[(0, 0), (3, 1), (20, 0)]), wl("b", &[(1, 2)])];
        let c = TierConfig { tier1_capacity_bytes: 16 * MACRO_PAGE_BYTES, ..TierConfig::default() };
        let first = simulate_tiering(&ws, &c, &PlacementPolicy::AllFirst).unwrap();
        assert_eq!(first.aggregate.mean_latency_us, 100.0);
        assert_eq!(first.aggregate.tier1_served_fraction, 1.0);
        let second = simulate_tiering(&ws, &c, &PlacementPolicy::AllSecond).unwrap();
        assert_eq!(second.aggregate.mean_latency_us, 5000.0);
        assert_eq!(second.aggregate.bytes_migrated, 0);
        assert_eq!(second.aggregate.intervals.len(), 2);
    }

    #[test]
    fn all_first_capacity_modes() {
        let ws = vec![wl("a", &[(0, 0), (1, 0), (2, 5)])];
        let c = TierConfig { tier1_capacity_bytes: 2 * MACRO_PAGE_BYTES, ..TierConfig::default() };
        assert!(matches!(
            simulate_tiering(&ws, &c, &PlacementPolicy::AllFirst),
            Err(Error::CapacityInfeasible { .. })
        ));
        let c = TierConfig { capacity_mode: CapacityMode::BestEffort, ..c };
        let r = simulate_tiering(&ws, &c, &PlacementPolicy::AllFirst).unwrap();
        // Pages 0 and 5 both fit as units; page 0 is hotter either way.
        assert_eq!(r.aggregate.tier1_served_fraction, 1.0);
        let c = TierConfig { tier1_capacity_bytes: MACRO_PAGE_BYTES, ..c };
        let r = simulate_tiering(&ws, &c, &PlacementPolicy::AllFirst).unwrap();
        assert_eq!(r.per_workload["a"].intervals[0].tier1_requests, 2);
        assert_eq!(r.aggregate.requests_served, 3);
    }

    #[test]
    fn admission_pins_small_workloads_to_tier2() {
        let ws = vec![wl("a", &[(0, 0), (1, 0), (2, 0)]), wl("b", &[(0, 1)])];
        let c = TierConfig { admission_fraction: Some(0.5), ..TierConfig::default() };
        let r = simulate_tiering(&ws, &c, &PlacementPolicy::AllFirst).unwrap();
        assert_eq!(r.per_workload["a"].tier1_served_fraction, 1.0);
        assert_eq!(r.per_workload["b"].tier1_served_fraction, 0.0);
    }

    #[test]
    fn dynamic_promotion_follows_hot_region() {
        // Region 2 is hot in both intervals; served from tier 1 in the second.
        let ws = vec![wl("a", &[(0, 2), (1, 2), (2, 7), (16, 2), (17, 2), (18, 7)])];
        let c = TierConfig { tier1_capacity_bytes: MACRO_PAGE_BYTES, ..TierConfig::default() };
        let r = simulate_tiering(&ws, &c, &PlacementPolicy::DynamicPromotion).unwrap();
        let a = &r.per_workload["a"];
        assert_eq!(a.intervals.len(), 2);
        assert_eq!(a.intervals[0].tier1_requests, 0);
        assert_eq!(a.intervals[1].tier1_requests, 2);
        assert_eq!(a.promotions, 1);
        assert_eq!(a.bytes_migrated, MACRO_PAGE_BYTES);
    }

    #[test]
    fn dynamic_requires_one_unit_of_capacity() {
        let ws = vec![wl("a", &[(0, 0)])];
        let c = TierConfig { tier1_capacity_bytes: MACRO_PAGE_BYTES - 1, ..TierConfig::default() };
        assert!(matches!(
            simulate_tiering(&ws, &c, &PlacementPolicy::DynamicPromotion),
            Err(Error::CapacityInfeasible { .. })
        ));
    }

    #[test]
    fn monitored_cache_bypasses_streaming_workload() {
        // Every request touches a fresh page: hit ratio 0 in every interval.
        let recs: Vec<TraceRecord> = (0..200u64)
            .map(|i| TraceRecord::new(i * 1_000_000, "s", Direction::Read, i * 4096, 4096))
            .collect();
        let ws = vec![Workload::new("s", recs).unwrap()];
        let params = MonitoredCacheParams {
            consecutive_n: 2,
            performance_critical: BTreeSet::from(["s".to_string()]),
            ..MonitoredCacheParams::default()
        };
        let c = cfg_exact(4, 4);
        let r = simulate_tiering(&ws, &c, &PlacementPolicy::MonitoredCache(params.clone())).unwrap();
        let s = &r.per_workload["s"];
        // Cached for intervals 0-1, migrated at the end of 1, tier 1 from 2 on.
        assert_eq!(s.intervals[1].tier1_requests, 0);
        assert!(s.intervals[2..].iter().all(|i| i.tier1_requests == i.requests));
        assert_eq!(s.promotions, 1);

        let params = MonitoredCacheParams { performance_critical: BTreeSet::new(), ..params };
        let r = simulate_tiering(&ws, &c, &PlacementPolicy::MonitoredCache(params)).unwrap();
        assert_eq!(r.aggregate.tier1_served_fraction, 0.0);
        assert!(r.tier1_bytes_per_interval[2..].iter().all(|&b| b == 0));
    }

    #[test]
    fn monitored_cache_keeps_hot_workload_cached() {
        let recs: Vec<TraceRecord> = (0..300u64)
            .map(|i| TraceRecord::new(i * 100_000, "h", Direction::Write, (i % 4) * 4096, 4096))
            .chain(std::iter::once(TraceRecord::new(0, "h", Direction::Read, 1 << 30, 4096)))
            .collect();
        let ws = vec![Workload::new("h", recs).unwrap()];
        let r = simulate_tiering(
            &ws,
            &cfg_exact(4, 4),
            &PlacementPolicy::MonitoredCache(MonitoredCacheParams::default()),
        )
        .unwrap();
        assert!(r.aggregate.tier1_served_fraction > 0.9);
        assert_eq!(r.aggregate.promotions, 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let ws = vec![wl("a", &[(0, 0)])];
        let bad = TierConfig { tier1_latency: TierLatency::uniform(9000.0), ..TierConfig::default() };
        assert!(simulate_tiering(&ws, &bad, &PlacementPolicy::AllSecond).is_err());
        assert!(matches!(
            simulate_tiering(&[], &TierConfig::default(), &PlacementPolicy::AllSecond),
            Err(Error::EmptyWorkload)
        ));
        let dup = vec![wl("a", &[(0, 0)]), wl("a", &[(1, 0)])];
        assert!(simulate_tiering(&dup, &TierConfig::default(), &PlacementPolicy::AllSecond).is_err());
    }

    #[test]
    fn separate_read_write_latencies() {
        let recs = vec![
            TraceRecord::new(0, "a", Direction::Read, 0, 1),
            TraceRecord::new(1, "a", Direction::Write, 0, 1),
        ];
        let ws = vec![Workload::new("a", recs).unwrap()];
        let c = TierConfig {
            tier2_latency: TierLatency { read_us: 4000.0, write_us: 6000.0 },
            ..TierConfig::default()
        };
        let r = simulate_tiering(&ws, &c, &PlacementPolicy::AllSecond).unwrap();
        assert_eq!(r.aggregate.mean_latency_us, 5000.0);
    }
}
