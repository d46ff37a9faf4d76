//! Deterministic synthetic traces with a known hot region.
//!
//! # Generator
//!
//! Randomness comes from SplitMix64:
//!
//! ```text
//! state = state + 0x9E3779B97F4A7C15            (wrapping)
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9       (wrapping)
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB       (wrapping)
//! return z ^ (z >> 31)
//! ```
//!
//! `unit()` is `(next() >> 11) * 2^-53` and `below(n)` is
//! `(next() as u128 * n) >> 64`.
//!
//! Two streams are used. The hot-page stream is seeded with
//! `seed ^ 0xA5A5A5A5A5A5A5A5` and draws one `below(span_pages)` per dwell
//! period, only for the `random` movement rule. The request stream is seeded
//! with `seed` and, for each request in order, draws:
//!
//! 1. `unit()`: the request is hot when the value is `< share`;
//! 2. `unit()`, only for two-point sizes: large when `< p_large`;
//! 3. `unit()`: read when `< read_fraction`;
//! 4. `below(macro_pages - 1)`, only for cold requests: the index among the
//!    macro pages other than the current hot page;
//! 5. `below(slots)`: the 4-KiB-aligned slot within the macro page, where
//!    `slots = (usable_bytes - length) / 4096 + 1` and `usable_bytes` is the
//!    part of the macro page below `footprint_bytes`.
//!
//! Request `i` of `duration_s * rate_per_s` is stamped
//! `i * 1_000_000 / rate_per_s` microseconds (integer division).
//!
//! The hot page of slice `s` is `page` for `fixed`,
//! `page + (s / dwell_slices) % span_pages` for `step`, and
//! `page + draw[s / dwell_slices]` for `random`.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::concentration::MACRO_PAGE_BYTES;
use crate::error::{Error, Result};
use crate::trace::{write_trace, Direction, TraceRecord, TraceSchema, Workload};

const ALIGN: u64 = 4096;
const HOT_STREAM_SALT: u64 = 0xA5A5_A5A5_A5A5_A5A5;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform-ish in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Movement {
    Fixed,
    Step,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotRegion {
    /// First macro page of the hot region's range.
    pub page: u64,
    /// Expected fraction of requests sent to the current hot page.
    pub share: f64,
    #[serde(default = "one")]
    pub dwell_slices: u64,
    #[serde(default = "fixed")]
    pub movement: Movement,
    /// Number of macro pages the hot page moves over.
    #[serde(default = "one")]
    pub span_pages: u64,
}

fn one() -> u64 {
    1
}

fn fixed() -> Movement {
    Movement::Fixed
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IoSize {
    Fixed(u64),
    TwoPoint { small: u64, large: u64, p_large: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    #[serde(default = "default_volume")]
    pub volume_id: String,
    pub duration_s: u64,
    pub rate_per_s: u64,
    pub footprint_bytes: u64,
    pub hot_region: HotRegion,
    #[serde(default = "default_io_size")]
    pub io_size: IoSize,
    #[serde(default = "default_read_fraction")]
    pub read_fraction: f64,
    #[serde(default = "default_interval")]
    pub interval_s: u64,
    #[serde(default = "default_macro_page")]
    pub macro_page_bytes: u64,
}

fn default_volume() -> String {
    "synth".into()
}

fn default_io_size() -> IoSize {
    IoSize::Fixed(4096)
}

fn default_read_fraction() -> f64 {
    0.7
}

fn default_interval() -> u64 {
    15
}

fn default_macro_page() -> u64 {
    MACRO_PAGE_BYTES
}

impl SynthSpec {
    /// A fixed hot page on a volume of `macro_pages` macro pages.
    pub fn fixed_hot(seed: u64, duration_s: u64, rate_per_s: u64, macro_pages: u64, page: u64, share: f64) -> Self {
        SynthSpec {
            seed,
            volume_id: default_volume(),
            duration_s,
            rate_per_s,
            footprint_bytes: macro_pages * MACRO_PAGE_BYTES,
            hot_region: HotRegion {
                page,
                share,
                dwell_slices: 1,
                movement: Movement::Fixed,
                span_pages: 1,
            },
            io_size: default_io_size(),
            read_fraction: default_read_fraction(),
            interval_s: default_interval(),
            macro_page_bytes: MACRO_PAGE_BYTES,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SynthSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    fn macro_pages(&self) -> u64 {
        self.footprint_bytes.div_ceil(self.macro_page_bytes)
    }

    fn usable_bytes(&self, page: u64) -> u64 {
        let base = page * self.macro_page_bytes;
        (base + self.macro_page_bytes).min(self.footprint_bytes) - base
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        let h = &self.hot_region;
        if !(h.share > 0.0 && h.share <= 1.0) {
            return bad("hot share must lie in (0, 1]");
        }
        if self.rate_per_s < 1 || self.duration_s < 1 || self.interval_s < 1 {
            return bad("rate, duration and interval must be at least 1");
        }
        if h.dwell_slices < 1 || h.span_pages < 1 {
            return bad("dwell and span must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.read_fraction) {
            return bad("read fraction must lie in [0, 1]");
        }
        if self.macro_page_bytes < ALIGN || !self.macro_page_bytes.is_multiple_of(ALIGN) {
            return bad("macro page size must be a positive multiple of 4096");
        }
        let pages = self.macro_pages();
        if h.page + h.span_pages > pages {
            return bad("hot region extends past the footprint");
        }
        if h.share < 1.0 && pages < 2 {
            return bad("cold requests need at least two macro pages");
        }
        let max_len = match self.io_size {
            IoSize::Fixed(l) => {
                if l == 0 {
                    return bad("IO size must be positive");
                }
                l
            }
            IoSize::TwoPoint { small, large, p_large } => {
                if small == 0 || large == 0 || !(0.0..=1.0).contains(&p_large) {
                    return bad("two-point sizes must be positive with p_large in [0, 1]");
                }
                small.max(large)
            }
        };
        if self.usable_bytes(pages - 1) < max_len {
            return bad("last macro page is smaller than the largest IO");
        }
        Ok(())
    }

    pub fn request_count(&self) -> u64 {
        self.duration_s * self.rate_per_s
    }

    /// Hot macro page for each slice of the trace.
    pub fn hot_pages(&self) -> Vec<u64> {
        let slice_us = self.interval_s * 1_000_000;
        let n = self.request_count();
        let last_ts = if n == 0 { 0 } else { (n - 1) * 1_000_000 / self.rate_per_s };
        let slices = last_ts / slice_us + 1;
        let h = &self.hot_region;
        let mut rng = SplitMix64::new(self.seed ^ HOT_STREAM_SALT);
        let mut draws: Vec<u64> = Vec::new();
        (0..slices)
            .map(|s| {
                let period = s / h.dwell_slices;
                match h.movement {
                    Movement::Fixed => h.page,
                    Movement::Step => h.page + period % h.span_pages,
                    Movement::Random => {
                        while draws.len() as u64 <= period {
                            draws.push(rng.below(h.span_pages));
                        }
                        h.page + draws[period as usize]
                    }
                }
            })
            .collect()
    }
}

pub fn generate(spec: &SynthSpec) -> Result<Workload> {
    spec.validate()?;
    let hot_pages = spec.hot_pages();
    let pages = spec.macro_pages();
    let slice_us = spec.interval_s * 1_000_000;
    let mut rng = SplitMix64::new(spec.seed);
    let mut records = Vec::with_capacity(spec.request_count() as usize);
    for i in 0..spec.request_count() {
        let ts = i * 1_000_000 / spec.rate_per_s;
        let hot_page = hot_pages[(ts / slice_us) as usize];
        let hot = rng.unit() < spec.hot_region.share;
        let length = match spec.io_size {
            IoSize::Fixed(l) => l,
            IoSize::TwoPoint { small, large, p_large } => {
                if rng.unit() < p_large {
                    large
                } else {
                    small
                }
            }
        };
        let direction = if rng.unit() < spec.read_fraction { Direction::Read } else { Direction::Write };
        let page = if hot {
            hot_page
        } else {
            let k = rng.below(pages - 1);
            if k >= hot_page {
                k + 1
            } else {
                k
            }
        };
        let slots = (spec.usable_bytes(page) - length) / ALIGN + 1;
        let offset = page * spec.macro_page_bytes + rng.below(slots) * ALIGN;
        records.push(TraceRecord::new(ts, spec.volume_id.clone(), direction, offset, length));
    }
    Workload::new(spec.volume_id.clone(), records)
}

/// Writes a generated workload with the default schema.
pub fn write_synth_trace(path: &Path, workload: &Workload) -> io::Result<()> {
    let mut out = io::BufWriter::new(std::fs::File::create(path)?);
    write_trace(&mut out, workload.records(), &TraceSchema::default())?;
    io::Write::flush(&mut out)
}
