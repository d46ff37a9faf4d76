//! Command-line front end. Every command writes plot-ready CSV/JSON into
//! `<out-dir>/<command>/` together with a `manifest.json` that records the
//! full invocation.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::cache::{self, Algorithm, DEFAULT_CONVERGENCE_EPSILON_PP, DEFAULT_PAGE_SIZE};
use crate::concentration::{self as conc, RatioDenominator};
use crate::error::Error;
use crate::stats::{self, Metric, SizeHistogram, SummaryAccumulator, DEFAULT_SIZE_BOUNDS};
use crate::synth::{self, SynthSpec};
use crate::temporal;
use crate::tiering::{self, CapacityMode, MonitoredCacheParams, PlacementPolicy, TierConfig, TierLatency};
use crate::trace::{open_trace, parse_trace, split_by_volume, TraceSchema, Workload};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_CAPACITY: i32 = 4;
pub const EXIT_IO: i32 = 5;

pub const OUT_DIR_ENV: &str = "HYBRIDSCOPE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "hybridscope", version, about = "Block IO trace analysis and hybrid-tier simulation")]
pub struct Cli {
    /// Output root; each command writes into a subdirectory named after it.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "hybridscope-out")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-volume counts, footprints, IO sizes and busiest-volume selection.
    Stats(StatsArgs),
    /// Requests per interval and their five-number summary.
    Temporal(TemporalArgs),
    /// Page cache hit ratios over cache sizes, and convergence points.
    Cachesim(CacheArgs),
    /// Macro-page IO concentration per slice.
    Concentration(ConcentrationArgs),
    /// Two-tier placement simulation.
    Tiersim(TierArgs),
    /// Generate a synthetic trace from a JSON spec.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Trace files (`.gz` is decompressed).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Schema file describing the trace columns.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Abort on the first malformed line.
    #[arg(long)]
    pub strict: bool,
    /// Only analyze these volumes.
    #[arg(long, value_delimiter = ',')]
    pub volumes: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum MetricArg {
    Read,
    Write,
    Readwrite,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Read => Metric::Read,
            MetricArg::Write => Metric::Write,
            MetricArg::Readwrite => Metric::ReadWrite,
        }
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.5)]
    pub fraction: f64,
    #[arg(long, value_enum, default_value_t = MetricArg::Readwrite)]
    pub metric: MetricArg,
    /// Select the union of the read, write and read+write selections.
    #[arg(long, conflicts_with = "metric")]
    pub union: bool,
    /// Size histogram bucket bounds.
    #[arg(long, value_delimiter = ',', value_parser = parse_size)]
    pub bounds: Option<Vec<u64>>,
}

#[derive(Debug, Args)]
pub struct TemporalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Interval length in seconds.
    #[arg(long, default_value_t = 15)]
    pub interval: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgoArg {
    Lru,
    Arc,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Lru => Algorithm::Lru,
            AlgoArg::Arc => Algorithm::Arc,
        }
    }
}

#[derive(Debug, Args)]
pub struct CacheArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Replacement algorithms to simulate (default: both).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub algo: Vec<AlgoArg>,
    /// Run LRU and ARC side by side and pick the better one per size.
    #[arg(long, conflicts_with = "algo")]
    pub compare: bool,
    /// Cache sizes as fractions of each volume's footprint.
    #[arg(long, value_delimiter = ',', default_values_t = cache::DEFAULT_SIZE_FRACTIONS)]
    pub fractions: Vec<f64>,
    #[arg(long, value_parser = parse_size, default_value = "4KiB")]
    pub page_size: u64,
    /// Convergence tolerance in percentage points.
    #[arg(long, default_value_t = DEFAULT_CONVERGENCE_EPSILON_PP)]
    pub epsilon: f64,
}

#[derive(Debug, Args)]
pub struct ConcentrationArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_parser = parse_size, default_value = "1GiB")]
    pub macro_page: u64,
    /// Slice length in seconds.
    #[arg(long, default_value_t = 15)]
    pub interval: u64,
    /// Judgment ratio below which a page is unpredictable.
    #[arg(long, default_value_t = conc::DEFAULT_UNPREDICTABLE_THRESHOLD)]
    pub threshold: f64,
    /// Ranks in the top-page share profile.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Divide judgments by active slices only.
    #[arg(long)]
    pub active_slices_only: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum PolicyArg {
    AllSecond,
    AllFirst,
    Dynamic,
    Monitored,
}

#[derive(Debug, Args)]
pub struct TierArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Placement policy.
    #[arg(long, value_enum)]
    pub policy: PolicyArg,
    #[arg(long, value_parser = parse_size, default_value = "64GiB")]
    pub tier1_capacity: u64,
    /// Tier-1 service latency (reads, and writes unless overridden).
    #[arg(long, default_value_t = 100.0)]
    pub tier1_latency_us: f64,
    /// Tier-2 service latency (reads, and writes unless overridden).
    #[arg(long, default_value_t = 5000.0)]
    pub tier2_latency_us: f64,
    /// Tier-1 write latency when it differs from reads.
    #[arg(long)]
    pub tier1_write_latency_us: Option<f64>,
    /// Tier-2 write latency when it differs from reads.
    #[arg(long)]
    pub tier2_write_latency_us: Option<f64>,
    /// Migration bandwidth in bytes per second.
    #[arg(long, value_parser = parse_size, default_value = "1GiB")]
    pub bandwidth: u64,
    /// Decision interval in seconds.
    #[arg(long, default_value_t = 15)]
    pub interval: u64,
    /// Region size moved per promotion.
    #[arg(long, value_parser = parse_size, default_value = "1GiB")]
    pub promotion_unit: u64,
    /// Place what fits instead of failing when tier 1 is too small.
    #[arg(long)]
    pub best_effort: bool,
    /// Only the busiest volumes covering this fraction may use tier 1.
    #[arg(long)]
    pub admission_fraction: Option<f64>,
    /// Monitored policy: cache algorithm [default: arc].
    #[arg(long, value_enum)]
    pub cache_algo: Option<AlgoArg>,
    /// Monitored policy: cache size as a fraction of footprint [default: 0.05].
    #[arg(long)]
    pub cache_fraction: Option<f64>,
    /// Monitored policy: hit ratio counted as low [default: 0.2].
    #[arg(long)]
    pub low_threshold: Option<f64>,
    /// Monitored policy: low intervals in a row before the cache is dropped [default: 3].
    #[arg(long)]
    pub consecutive: Option<usize>,
    /// Monitored policy: volumes pinned to tier 1 (rather than tier 2) when their cache is dropped.
    #[arg(long, value_delimiter = ',')]
    pub critical: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON spec file.
    #[arg(long)]
    pub spec: PathBuf,
    /// Trace file to write (default: `<out-dir>/synth/<volume>.csv`).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses `4096`, `4KiB`, `4K`, `1GiB`, `2T`. All suffixes are binary.
pub fn parse_size(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    let (num, suffix) = t.split_at(split);
    let n: u64 = num.parse().map_err(|_| format!("bad size {s:?}"))?;
    let shift = match suffix.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 0,
        "k" | "kb" | "kib" => 10,
        "m" | "mb" | "mib" => 20,
        "g" | "gb" | "gib" => 30,
        "t" | "tb" | "tib" => 40,
        _ => return Err(format!("bad size suffix in {s:?}")),
    };
    n.checked_mul(1u64 << shift).ok_or_else(|| format!("size {s:?} overflows"))
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) => match e {
                Error::MalformedLine { .. } | Error::InvalidSchema(_) | Error::InvalidSpec(_) => EXIT_PARSE,
                Error::CapacityInfeasible { .. } => EXIT_CAPACITY,
                Error::Io(_) => EXIT_IO,
                Error::InvalidConfig(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli, argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("hybridscope: {e}");
            e.exit_code()
        }
    }
}

/// What a command produced, written to `manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub inputs: Vec<String>,
    pub schema: Option<TraceSchema>,
    pub parameters: serde_json::Value,
    pub output_dir: String,
    pub outputs: Vec<String>,
    pub records_parsed: u64,
    pub lines_skipped: u64,
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn create(root: &Path, command: &str) -> io::Result<Self> {
        let dir = root.join(command);
        fs::create_dir_all(&dir)?;
        Ok(Output { dir, files: Vec::new() })
    }

    /// Writes `name` via a temporary file and a rename.
    fn write<F>(&mut self, name: &str, body: F) -> io::Result<()>
    where
        F: FnOnce(&mut dyn Write) -> io::Result<()>,
    {
        write_atomic(&self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn write_atomic<F>(path: &Path, body: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        body(&mut w)?;
        w.flush()?;
        w.get_ref().sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[derive(Default)]
struct ParseTally {
    records: u64,
    skipped: u64,
}

fn load_schema(input: &InputArgs) -> Result<TraceSchema, CliError> {
    match &input.schema {
        Some(p) => Ok(TraceSchema::from_config_file(p)?),
        None => Ok(TraceSchema::default()),
    }
}

/// Streams every record of every input through `sink`.
fn for_each_record<F>(input: &InputArgs, schema: &TraceSchema, mut sink: F) -> Result<ParseTally, CliError>
where
    F: FnMut(crate::trace::TraceRecord),
{
    let filter: BTreeSet<&str> = input.volumes.iter().map(String::as_str).collect();
    let mut tally = ParseTally::default();
    for path in &input.inputs {
        let reader = open_trace(path).map_err(|e| match e {
            Error::Io(io) => Error::Io(io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
            other => other,
        })?;
        let mut parser = parse_trace(reader, schema, input.strict);
        for rec in parser.by_ref() {
            let rec = rec.map_err(|e| match e {
                Error::MalformedLine { line, reason } => Error::MalformedLine {
                    line,
                    reason: format!("{}: {reason}", path.display()),
                },
                other => other,
            })?;
            tally.records += 1;
            if filter.is_empty() || filter.contains(rec.volume_id.as_str()) {
                sink(rec);
            }
        }
        if parser.skipped() > 0 {
            eprintln!("{}: skipped {} malformed line(s)", path.display(), parser.skipped());
            for d in parser.diagnostics() {
                eprintln!("  line {}: {}", d.line, d.reason);
            }
        }
        tally.skipped += parser.skipped();
    }
    Ok(tally)
}

fn load_workloads(input: &InputArgs, schema: &TraceSchema) -> Result<(Vec<Workload>, ParseTally), CliError> {
    let mut records = Vec::new();
    let tally = for_each_record(input, schema, |r| records.push(r))?;
    Ok((split_by_volume(records).into_values().collect(), tally))
}

fn finish(
    out: Output,
    command: &str,
    argv: Vec<String>,
    input: Option<(&InputArgs, &TraceSchema, &ParseTally)>,
    parameters: serde_json::Value,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        tool: "hybridscope",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        argv,
        inputs: input
            .map(|(i, _, _)| i.inputs.iter().map(|p| p.display().to_string()).collect())
            .unwrap_or_default(),
        schema: input.map(|(_, s, _)| s.clone()),
        parameters,
        output_dir: out.dir.display().to_string(),
        outputs: out.files.clone(),
        records_parsed: input.map_or(0, |(_, _, t)| t.records),
        lines_skipped: input.map_or(0, |(_, _, t)| t.skipped),
    };
    write_atomic(&out.dir.join("manifest.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest).map_err(io::Error::from)?;
        writeln!(w)
    })?;
    Ok(())
}

fn execute(cli: &Cli, argv: Vec<String>) -> Result<(), CliError> {
    match &cli.command {
        Command::Stats(a) => cmd_stats(&cli.out_dir, a, argv),
        Command::Temporal(a) => cmd_temporal(&cli.out_dir, a, argv),
        Command::Cachesim(a) => cmd_cachesim(&cli.out_dir, a, argv),
        Command::Concentration(a) => cmd_concentration(&cli.out_dir, a, argv),
        Command::Tiersim(a) => cmd_tiersim(&cli.out_dir, a, argv),
        Command::Synth(a) => cmd_synth(&cli.out_dir, a, argv),
    }
}

fn check_unit_fraction(name: &str, f: f64) -> Result<(), CliError> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--{name} must lie in (0, 1]")))
    }
}

fn cmd_stats(root: &Path, a: &StatsArgs, argv: Vec<String>) -> Result<(), CliError> {
    check_unit_fraction("fraction", a.fraction)?;
    let schema = load_schema(&a.input)?;
    let bounds = a.bounds.clone().unwrap_or_else(|| DEFAULT_SIZE_BOUNDS.to_vec());
    let template = SizeHistogram::new(&bounds).map_err(|e| CliError::Usage(e.to_string()))?;

    let mut acc = SummaryAccumulator::new();
    let mut hists: std::collections::BTreeMap<String, SizeHistogram> = Default::default();
    let tally = for_each_record(&a.input, &schema, |r| {
        match hists.get_mut(r.volume_id.as_str()) {
            Some(h) => h.add(r.length_bytes),
            None => {
                let mut h = template.clone();
                h.add(r.length_bytes);
                hists.insert(r.volume_id.clone(), h);
            }
        }
        acc.push(&r);
    })?;
    let summaries = acc.finish();
    let selection = if a.union {
        stats::select_top_workloads_union(&summaries, a.fraction)?
    } else {
        stats::select_top_workloads(&summaries, a.fraction, a.metric.into())?
    };

    let mut out = Output::create(root, "stats")?;
    out.write("summaries.csv", |w| stats::write_summaries_csv(w, &summaries))?;
    out.write("selection.txt", |w| {
        for v in &selection {
            writeln!(w, "{v}")?;
        }
        Ok(())
    })?;
    out.write("size_histogram.csv", |w| {
        writeln!(w, "volume_id,bucket_upper_bytes,count")?;
        for (vol, h) in &hists {
            for (i, c) in h.counts.iter().enumerate() {
                let upper = h.bounds.get(i).map_or("inf".to_string(), u64::to_string);
                writeln!(w, "{vol},{upper},{c}")?;
            }
        }
        Ok(())
    })?;
    println!(
        "{} workloads, {} selected ({} of requests)",
        summaries.len(),
        selection.len(),
        if a.union { "union".to_string() } else { format!("{:?}", a.metric).to_lowercase() }
    );
    let params = json!({
        "fraction": a.fraction,
        "metric": if a.union { "union".to_string() } else { format!("{:?}", a.metric).to_lowercase() },
        "bounds": bounds,
        "volumes": a.input.volumes,
        "strict": a.input.strict,
    });
    finish(out, "stats", argv, Some((&a.input, &schema, &tally)), params)
}

fn cmd_temporal(root: &Path, a: &TemporalArgs, argv: Vec<String>) -> Result<(), CliError> {
    if a.interval == 0 {
        return Err(CliError::Usage("--interval must be at least 1".into()));
    }
    let schema = load_schema(&a.input)?;
    let (workloads, tally) = load_workloads(&a.input, &schema)?;
    let series = workloads
        .iter()
        .map(|w| Ok((w.volume_id(), temporal::interval_counts(w, a.interval)?)))
        .collect::<Result<Vec<_>, Error>>()?;

    let mut out = Output::create(root, "temporal")?;
    out.write("intervals.csv", |w| {
        writeln!(w, "volume_id,bucket_index,count")?;
        for (vol, s) in &series {
            for (i, c) in s.counts.iter().enumerate() {
                writeln!(w, "{vol},{i},{c}")?;
            }
        }
        Ok(())
    })?;
    let boxes = series
        .iter()
        .map(|(vol, s)| Ok((vol, s, temporal::box_stats_of_counts(s)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    out.write("box_stats.jsonl", |w| {
        for (vol, s, b) in &boxes {
            let row = json!({
                "volume_id": vol,
                "interval_s": s.interval_s,
                "origin_ts_us": s.origin_ts_us,
                "buckets": s.counts.len(),
                "min": b.min,
                "lower_quartile": b.lower_quartile,
                "median": b.median,
                "upper_quartile": b.upper_quartile,
                "max": b.max,
            });
            writeln!(w, "{row}")?;
        }
        Ok(())
    })?;
    let params = json!({ "interval_s": a.interval, "volumes": a.input.volumes, "strict": a.input.strict });
    finish(out, "temporal", argv, Some((&a.input, &schema, &tally)), params)
}

fn cmd_cachesim(root: &Path, a: &CacheArgs, argv: Vec<String>) -> Result<(), CliError> {
    if a.fractions.is_empty()
        || !a.fractions.iter().all(|&f| f > 0.0 && f <= 1.0)
        || !a.fractions.windows(2).all(|w| w[0] < w[1])
    {
        return Err(CliError::Usage("--fractions must be strictly increasing values in (0, 1]".into()));
    }
    if !a.page_size.is_power_of_two() {
        return Err(CliError::Usage("--page-size must be a power of two".into()));
    }
    let schema = load_schema(&a.input)?;
    let (workloads, tally) = load_workloads(&a.input, &schema)?;
    let mut out = Output::create(root, "cachesim")?;

    let algos: Vec<Algorithm> = if a.algo.is_empty() {
        Algorithm::ALL.to_vec()
    } else {
        let set: BTreeSet<Algorithm> = a.algo.iter().map(|&x| x.into()).collect();
        set.into_iter().collect()
    };

    let curves = workloads
        .par_iter()
        .map(|w| {
            algos
                .iter()
                .map(|&alg| cache::hit_ratio_curve(w, alg, &a.fractions, a.page_size))
                .collect::<Result<Vec<_>, Error>>()
                .map(|c| (w.volume_id(), c))
        })
        .collect::<Result<Vec<_>, Error>>()?;

    out.write("hit_ratios.csv", |w| {
        writeln!(w, "{}", cache::CURVE_CSV_HEADER)?;
        for (vol, cs) in &curves {
            for c in cs {
                cache::write_curve_rows(w, vol, c)?;
            }
        }
        Ok(())
    })?;
    out.write("convergence.csv", |w| {
        writeln!(w, "volume_id,algorithm,convergence_fraction")?;
        for (vol, cs) in &curves {
            for c in cs {
                let cp = cache::convergence_point(c, a.epsilon).map(|f| f.to_string()).unwrap_or_default();
                writeln!(w, "{vol},{},{cp}", c.algorithm)?;
            }
        }
        Ok(())
    })?;
    if a.compare {
        out.write("comparison.csv", |w| {
            writeln!(w, "volume_id,size_fraction,capacity_pages,lru_hit_ratio,arc_hit_ratio,preferred")?;
            for (vol, cs) in &curves {
                let (lru, arc) = (&cs[0], &cs[1]);
                for (l, r) in lru.points.iter().zip(&arc.points) {
                    let preferred = if r.result.hits > l.result.hits { Algorithm::Arc } else { Algorithm::Lru };
                    writeln!(
                        w,
                        "{vol},{},{},{},{},{preferred}",
                        l.size_fraction, l.capacity_pages, l.result.hit_ratio, r.result.hit_ratio
                    )?;
                }
            }
            Ok(())
        })?;
    }
    let params = json!({
        "algorithms": algos.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "compare": a.compare,
        "fractions": a.fractions,
        "page_size_bytes": a.page_size,
        "epsilon_pp": a.epsilon,
        "volumes": a.input.volumes,
        "strict": a.input.strict,
    });
    finish(out, "cachesim", argv, Some((&a.input, &schema, &tally)), params)
}

fn cmd_concentration(root: &Path, a: &ConcentrationArgs, argv: Vec<String>) -> Result<(), CliError> {
    if a.macro_page == 0 || a.interval == 0 || a.top_k == 0 {
        return Err(CliError::Usage("--macro-page, --interval and --top-k must be positive".into()));
    }
    let schema = load_schema(&a.input)?;
    let (workloads, tally) = load_workloads(&a.input, &schema)?;
    let denominator =
        if a.active_slices_only { RatioDenominator::ActiveSlices } else { RatioDenominator::AllSlices };

    struct Profile<'w> {
        vol: &'w str,
        slices: Vec<conc::SliceCounts>,
        shares: Vec<f64>,
        runs: std::collections::BTreeMap<u64, Vec<u64>>,
        pages: Vec<conc::PagePredictability>,
    }
    let profiles = workloads
        .par_iter()
        .map(|w| {
            let slices = conc::slice_page_counts(w, a.macro_page, a.interval)?;
            Ok(Profile {
                vol: w.volume_id(),
                shares: conc::top_page_share_profile(&slices, a.top_k)?,
                runs: conc::concentration_run_lengths(&slices),
                pages: conc::classify_predictability(&slices, a.threshold, denominator)?,
                slices,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let mut out = Output::create(root, "concentration")?;
    out.write("slice_counts.csv", |w| {
        writeln!(w, "volume_id,slice,page,count")?;
        for p in &profiles {
            for s in &p.slices {
                for (page, c) in &s.counts {
                    writeln!(w, "{},{},{page},{c}", p.vol, s.slice_index)?;
                }
            }
        }
        Ok(())
    })?;
    out.write("share_profile.csv", |w| {
        writeln!(w, "volume_id,rank,avg_share")?;
        for p in &profiles {
            for (i, s) in p.shares.iter().enumerate() {
                writeln!(w, "{},{},{s}", p.vol, i + 1)?;
            }
        }
        Ok(())
    })?;
    out.write("run_lengths.csv", |w| {
        writeln!(w, "volume_id,page,run_length")?;
        for p in &profiles {
            for (page, rs) in &p.runs {
                for r in rs {
                    writeln!(w, "{},{page},{r}", p.vol)?;
                }
            }
        }
        Ok(())
    })?;
    out.write("pooled_run_lengths.csv", |w| {
        writeln!(w, "volume_id,run_length,occurrences")?;
        for p in &profiles {
            let pooled = conc::pooled_run_lengths(&p.runs);
            for chunk in pooled.chunk_by(|x, y| x == y) {
                writeln!(w, "{},{},{}", p.vol, chunk[0], chunk.len())?;
            }
        }
        Ok(())
    })?;
    out.write("predictability.csv", |w| {
        writeln!(w, "volume_id,page,judgments,ratio,unpredictable")?;
        for p in &profiles {
            for pg in &p.pages {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    p.vol, pg.macro_page_id, pg.concentration_judgments, pg.judgment_ratio, pg.unpredictable
                )?;
            }
        }
        Ok(())
    })?;
    out.write("summary.csv", |w| {
        writeln!(w, "volume_id,slices,active_slices,top1_share,topk_share,unpredictable_fraction,max_run")?;
        for p in &profiles {
            let active = p.slices.iter().filter(|s| !s.is_empty()).count();
            let topk: f64 = p.shares.iter().sum();
            let unpred = conc::unpredictable_fraction(&p.pages).map(|f| f.to_string()).unwrap_or_default();
            let max_run = p.runs.values().flatten().max().copied().unwrap_or(0);
            writeln!(w, "{},{},{active},{},{topk},{unpred},{max_run}", p.vol, p.slices.len(), p.shares[0])?;
        }
        Ok(())
    })?;
    let params = json!({
        "macro_page_bytes": a.macro_page,
        "interval_s": a.interval,
        "threshold": a.threshold,
        "top_k": a.top_k,
        "denominator": denominator,
        "volumes": a.input.volumes,
        "strict": a.input.strict,
    });
    finish(out, "concentration", argv, Some((&a.input, &schema, &tally)), params)
}

fn cmd_tiersim(root: &Path, a: &TierArgs, argv: Vec<String>) -> Result<(), CliError> {
    let monitored_flags = a.cache_algo.is_some()
        || a.cache_fraction.is_some()
        || a.low_threshold.is_some()
        || a.consecutive.is_some()
        || !a.critical.is_empty();
    if monitored_flags && a.policy != PolicyArg::Monitored {
        return Err(CliError::Usage("cache flags require --policy monitored".into()));
    }
    let config = TierConfig {
        tier1_capacity_bytes: a.tier1_capacity,
        tier1_latency: TierLatency {
            read_us: a.tier1_latency_us,
            write_us: a.tier1_write_latency_us.unwrap_or(a.tier1_latency_us),
        },
        tier2_latency: TierLatency {
            read_us: a.tier2_latency_us,
            write_us: a.tier2_write_latency_us.unwrap_or(a.tier2_latency_us),
        },
        migration_bandwidth_bytes_per_s: a.bandwidth,
        decision_interval_s: a.interval,
        promotion_unit_bytes: a.promotion_unit,
        capacity_mode: if a.best_effort { CapacityMode::BestEffort } else { CapacityMode::Strict },
        admission_fraction: a.admission_fraction,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let policy = match a.policy {
        PolicyArg::AllSecond => PlacementPolicy::AllSecond,
        PolicyArg::AllFirst => PlacementPolicy::AllFirst,
        PolicyArg::Dynamic => PlacementPolicy::DynamicPromotion,
        PolicyArg::Monitored => {
            let d = MonitoredCacheParams::default();
            PlacementPolicy::MonitoredCache(MonitoredCacheParams {
                algorithm: a.cache_algo.map_or(d.algorithm, Into::into),
                cache_fraction: a.cache_fraction.unwrap_or(d.cache_fraction),
                page_size_bytes: DEFAULT_PAGE_SIZE,
                low_threshold: a.low_threshold.unwrap_or(d.low_threshold),
                consecutive_n: a.consecutive.unwrap_or(d.consecutive_n),
                performance_critical: a.critical.iter().cloned().collect(),
            })
        }
    };
    let schema = load_schema(&a.input)?;
    let (workloads, tally) = load_workloads(&a.input, &schema)?;
    let report = tiering::simulate_tiering(&workloads, &config, &policy)?;

    let mut out = Output::create(root, "tiersim")?;
    let doc = json!({ "config": config, "policy": policy, "result": report });
    out.write("result.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &doc).map_err(io::Error::from)?;
        writeln!(w)
    })?;
    out.write("intervals.csv", |w| report.aggregate.write_interval_csv(w))?;
    out.write("workload_intervals.csv", |w| {
        writeln!(w, "volume_id,interval,requests,tier1_requests,mean_latency_us")?;
        for (vol, r) in &report.per_workload {
            for i in &r.intervals {
                let mean = i.mean_latency_us.map(|m| m.to_string()).unwrap_or_default();
                writeln!(w, "{vol},{},{},{},{mean}", i.interval, i.requests, i.tier1_requests)?;
            }
        }
        Ok(())
    })?;
    println!(
        "{}: {} requests, mean latency {:.3} us, tier-1 share {:.4}, {} promotions, {} demotions",
        report.policy,
        report.aggregate.requests_served,
        report.aggregate.mean_latency_us,
        report.aggregate.tier1_served_fraction,
        report.aggregate.promotions,
        report.aggregate.demotions
    );
    let params = json!({ "config": config, "policy": policy, "volumes": a.input.volumes, "strict": a.input.strict });
    finish(out, "tiersim", argv, Some((&a.input, &schema, &tally)), params)
}

fn cmd_synth(root: &Path, a: &SynthArgs, argv: Vec<String>) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.spec)?;
    let spec = SynthSpec::from_json(&text)?;
    let workload = synth::generate(&spec)?;
    let mut out = Output::create(root, "synth")?;
    let schema = TraceSchema::default();
    let target = a
        .output
        .clone()
        .unwrap_or_else(|| out.dir.join(format!("{}.csv", spec.volume_id)));
    write_atomic(&target, |w| crate::trace::write_trace(w, workload.records(), &schema))?;
    out.files.push(target.display().to_string());
    println!("wrote {} records to {}", workload.len(), target.display());
    let params = json!({ "spec_file": a.spec.display().to_string(), "spec": spec });
    finish(out, "synth", argv, None, params)
}
