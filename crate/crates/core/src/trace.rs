//! Block IO trace records, the text schema they are read with, and
//! per-volume workload splitting.
//!
//! A trace is delimiter-separated text with one request per line. Each line
//! carries five fields: a timestamp, a volume identifier, a direction token,
//! a starting offset and a length. Column positions, the delimiter, the
//! timestamp unit and the offset/length unit are described by a
//! [`TraceSchema`], so the same parser handles the common column variants of
//! published block traces.
//!
//! Timestamps are normalized to integer microseconds on read. Decimal
//! timestamps (`12.5` seconds) are converted exactly, without going through
//! floating point.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Read,
    Write,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Read => f.write_str("R"),
            Direction::Write => f.write_str("W"),
        }
    }
}

/// One block IO request.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceRecord {
    pub timestamp_us: u64,
    pub volume_id: String,
    pub direction: Direction,
    pub offset_bytes: u64,
    pub length_bytes: u64,
}

impl TraceRecord {
    pub fn new(
        timestamp_us: u64,
        volume_id: impl Into<String>,
        direction: Direction,
        offset_bytes: u64,
        length_bytes: u64,
    ) -> Self {
        TraceRecord {
            timestamp_us,
            volume_id: volume_id.into(),
            direction,
            offset_bytes,
            length_bytes,
        }
    }

    /// Exclusive end offset of the request.
    #[inline]
    pub fn end_bytes(&self) -> u64 {
        self.offset_bytes + self.length_bytes
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.length_bytes == 0 {
            return Err("length must be at least 1 byte".into());
        }
        if self.offset_bytes.checked_add(self.length_bytes).is_none() {
            return Err("offset + length overflows 64 bits".into());
        }
        Ok(())
    }
}

/// The trace of a single volume, sorted by timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    volume_id: String,
    records: Vec<TraceRecord>,
}

impl Workload {
    /// Builds a workload, stable-sorting the records by timestamp.
    ///
    /// Fails if any record belongs to a different volume or violates the
    /// record invariants.
    pub fn new(volume_id: impl Into<String>, mut records: Vec<TraceRecord>) -> Result<Self> {
        let volume_id = volume_id.into();
        for r in &records {
            if r.volume_id != volume_id {
                return Err(Error::InvalidConfig(format!(
                    "record for volume {:?} in workload {:?}",
                    r.volume_id, volume_id
                )));
            }
            r.check().map_err(Error::InvalidConfig)?;
        }
        if !records.windows(2).all(|w| w[0].timestamp_us <= w[1].timestamp_us) {
            records.sort_by_key(|r| r.timestamp_us);
        }
        Ok(Workload { volume_id, records })
    }

    pub fn volume_id(&self) -> &str {
        &self.volume_id
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first_timestamp_us(&self) -> Option<u64> {
        self.records.first().map(|r| r.timestamp_us)
    }

    pub fn last_timestamp_us(&self) -> Option<u64> {
        self.records.last().map(|r| r.timestamp_us)
    }

    pub fn into_records(self) -> Vec<TraceRecord> {
        self.records
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Nanoseconds,
    Microseconds,
    Milliseconds,
    Seconds,
}

impl TimeUnit {
    /// Number of decimal digits between this unit and a microsecond.
    /// Negative for units finer than a microsecond.
    fn decimal_shift(self) -> i32 {
        match self {
            TimeUnit::Nanoseconds => -3,
            TimeUnit::Microseconds => 0,
            TimeUnit::Milliseconds => 3,
            TimeUnit::Seconds => 6,
        }
    }
}

impl FromStr for TimeUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ns" | "nanoseconds" => Ok(TimeUnit::Nanoseconds),
            "us" | "microseconds" => Ok(TimeUnit::Microseconds),
            "ms" | "milliseconds" => Ok(TimeUnit::Milliseconds),
            "s" | "seconds" => Ok(TimeUnit::Seconds),
            other => Err(Error::InvalidSchema(format!("unknown time unit {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Delimiter {
    Char(char),
    /// Any run of ASCII whitespace.
    Whitespace,
}

/// Column layout and units of a text trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSchema {
    pub timestamp_col: usize,
    pub volume_col: usize,
    pub direction_col: usize,
    pub offset_col: usize,
    pub length_col: usize,
    pub delimiter: Delimiter,
    pub timestamp_unit: TimeUnit,
    /// Bytes per offset unit (512 for sector offsets).
    pub offset_unit: u64,
    /// Bytes per length unit.
    pub length_unit: u64,
    /// Tokens accepted as reads, compared case-insensitively.
    pub read_tokens: Vec<String>,
    pub write_tokens: Vec<String>,
    /// Skip the first line of every file.
    pub header: bool,
}

impl Default for TraceSchema {
    fn default() -> Self {
        TraceSchema {
            timestamp_col: 0,
            volume_col: 1,
            direction_col: 2,
            offset_col: 3,
            length_col: 4,
            delimiter: Delimiter::Char(','),
            timestamp_unit: TimeUnit::Microseconds,
            offset_unit: 1,
            length_unit: 1,
            read_tokens: vec!["R".into(), "Read".into()],
            write_tokens: vec!["W".into(), "Write".into()],
            header: false,
        }
    }
}

impl TraceSchema {
    pub fn validate(&self) -> Result<()> {
        let cols = self.columns();
        for (i, a) in cols.iter().enumerate() {
            if cols[i + 1..].contains(a) {
                return Err(Error::InvalidSchema(format!(
                    "column {a} is mapped to more than one field"
                )));
            }
        }
        if self.offset_unit == 0 || self.length_unit == 0 {
            return Err(Error::InvalidSchema("units must be positive".into()));
        }
        if self.read_tokens.is_empty() || self.write_tokens.is_empty() {
            return Err(Error::InvalidSchema("direction token lists must be non-empty".into()));
        }
        for r in &self.read_tokens {
            if self.write_tokens.iter().any(|w| w.eq_ignore_ascii_case(r)) {
                return Err(Error::InvalidSchema(format!("token {r:?} is both read and write")));
            }
        }
        if let Delimiter::Char(c) = self.delimiter {
            let all = self.read_tokens.iter().chain(&self.write_tokens);
            if all.into_iter().any(|t| t.contains(c)) {
                return Err(Error::InvalidSchema("direction token contains the delimiter".into()));
            }
        }
        Ok(())
    }

    fn columns(&self) -> [usize; 5] {
        [
            self.timestamp_col,
            self.volume_col,
            self.direction_col,
            self.offset_col,
            self.length_col,
        ]
    }

    fn width(&self) -> usize {
        self.columns().into_iter().max().unwrap_or(0) + 1
    }

    /// Parses the `key = value` schema file format.
    ///
    /// ```text
    /// # SNIA-style column order
    /// volume = 0
    /// direction = 1
    /// offset = 2
    /// length = 3
    /// timestamp = 4
    /// delimiter = comma
    /// timestamp_unit = s
    /// offset_unit = 512
    /// ```
    ///
    /// Unspecified keys keep their defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut schema = TraceSchema::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidSchema(format!("line {}: expected key = value", n + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let col = || {
                value.parse::<usize>().map_err(|_| {
                    Error::InvalidSchema(format!("line {}: bad column index {value:?}", n + 1))
                })
            };
            let unit = || match value.parse::<u64>() {
                Ok(u) if u > 0 => Ok(u),
                _ => Err(Error::InvalidSchema(format!("line {}: bad unit {value:?}", n + 1))),
            };
            match key {
                "timestamp" => schema.timestamp_col = col()?,
                "volume" | "volume_id" => schema.volume_col = col()?,
                "direction" => schema.direction_col = col()?,
                "offset" => schema.offset_col = col()?,
                "length" => schema.length_col = col()?,
                "delimiter" => schema.delimiter = parse_delimiter(value)?,
                "timestamp_unit" => schema.timestamp_unit = value.parse()?,
                "offset_unit" => schema.offset_unit = unit()?,
                "length_unit" => schema.length_unit = unit()?,
                "read_tokens" => schema.read_tokens = split_tokens(value),
                "write_tokens" => schema.write_tokens = split_tokens(value),
                "header" => {
                    schema.header = match value {
                        "true" | "yes" | "1" => true,
                        "false" | "no" | "0" => false,
                        _ => {
                            return Err(Error::InvalidSchema(format!(
                                "line {}: bad boolean {value:?}",
                                n + 1
                            )))
                        }
                    }
                }
                other => {
                    return Err(Error::InvalidSchema(format!(
                        "line {}: unknown key {other:?}",
                        n + 1
                    )))
                }
            }
        }
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text)
    }

    fn direction(&self, token: &str) -> Option<Direction> {
        if self.read_tokens.iter().any(|t| t.eq_ignore_ascii_case(token)) {
            Some(Direction::Read)
        } else if self.write_tokens.iter().any(|t| t.eq_ignore_ascii_case(token)) {
            Some(Direction::Write)
        } else {
            None
        }
    }

    /// Parses one line into a record.
    pub fn parse_line(&self, line: &str) -> std::result::Result<TraceRecord, String> {
        let fields: Vec<&str> = match self.delimiter {
            Delimiter::Char(c) => line.split(c).map(str::trim).collect(),
            Delimiter::Whitespace => line.split_ascii_whitespace().collect(),
        };
        if fields.len() < self.width() {
            return Err(format!(
                "expected at least {} fields, found {}",
                self.width(),
                fields.len()
            ));
        }
        let timestamp_us = parse_timestamp(fields[self.timestamp_col], self.timestamp_unit)?;
        let volume_id = fields[self.volume_col];
        if volume_id.is_empty() {
            return Err("empty volume id".into());
        }
        let token = fields[self.direction_col];
        let direction = self
            .direction(token)
            .ok_or_else(|| format!("unknown direction token {token:?}"))?;
        let offset_bytes = parse_scaled(fields[self.offset_col], self.offset_unit, "offset")?;
        let length_bytes = parse_scaled(fields[self.length_col], self.length_unit, "length")?;
        let record = TraceRecord {
            timestamp_us,
            volume_id: volume_id.to_string(),
            direction,
            offset_bytes,
            length_bytes,
        };
        record.check()?;
        Ok(record)
    }

    /// Formats a record as one line of this schema (no trailing newline).
    ///
    /// Offsets and lengths that are not multiples of their unit, and
    /// timestamps finer than the schema's unit can hold, are written rounded
    /// down; they do not round-trip.
    pub fn format_record(&self, record: &TraceRecord) -> String {
        let mut cols = vec![String::new(); self.width()];
        cols[self.timestamp_col] = format_timestamp(record.timestamp_us, self.timestamp_unit);
        cols[self.volume_col] = record.volume_id.clone();
        cols[self.direction_col] = match record.direction {
            Direction::Read => self.read_tokens[0].clone(),
            Direction::Write => self.write_tokens[0].clone(),
        };
        cols[self.offset_col] = (record.offset_bytes / self.offset_unit).to_string();
        cols[self.length_col] = (record.length_bytes / self.length_unit).to_string();
        match self.delimiter {
            Delimiter::Char(c) => cols.join(&c.to_string()),
            Delimiter::Whitespace => cols.join(" "),
        }
    }
}

fn parse_delimiter(value: &str) -> Result<Delimiter> {
    match value {
        "comma" | "," => Ok(Delimiter::Char(',')),
        "tab" | "\\t" => Ok(Delimiter::Char('\t')),
        "space" | "whitespace" => Ok(Delimiter::Whitespace),
        "semicolon" | ";" => Ok(Delimiter::Char(';')),
        "pipe" | "|" => Ok(Delimiter::Char('|')),
        other => {
            let mut chars = other.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(Delimiter::Char(c)),
                _ => Err(Error::InvalidSchema(format!("bad delimiter {other:?}"))),
            }
        }
    }
}

fn split_tokens(value: &str) -> Vec<String> {
    value
        .split(|c: char| c == ',' || c.is_ascii_whitespace())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_scaled(field: &str, unit: u64, what: &str) -> std::result::Result<u64, String> {
    let v: u64 = field
        .parse()
        .map_err(|_| format!("non-numeric {what} {field:?}"))?;
    v.checked_mul(unit)
        .ok_or_else(|| format!("{what} {field:?} overflows after unit scaling"))
}

/// Converts a non-negative decimal string in `unit` to integer microseconds,
/// truncating anything below a microsecond.
fn parse_timestamp(field: &str, unit: TimeUnit) -> std::result::Result<u64, String> {
    let bad = || format!("non-numeric timestamp {field:?}");
    let (int_part, frac_part) = match field.split_once('.') {
        Some((i, f)) => (i, f),
        None => (field, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let digits_ok = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if !digits_ok(int_part) || !digits_ok(frac_part) {
        return Err(bad());
    }
    let overflow = || format!("timestamp {field:?} overflows");
    let push = |v: u64, d: u8| v.checked_mul(10).and_then(|v| v.checked_add(u64::from(d - b'0')));
    let mut value: u64 = 0;
    for d in int_part.bytes() {
        value = push(value, d).ok_or_else(overflow)?;
    }
    let shift = unit.decimal_shift();
    if shift >= 0 {
        // Move the decimal point right, truncating below a microsecond.
        let frac = frac_part.as_bytes();
        for i in 0..shift as usize {
            value = push(value, frac.get(i).copied().unwrap_or(b'0')).ok_or_else(overflow)?;
        }
    } else {
        value /= 10u64.pow((-shift) as u32);
    }
    Ok(value)
}

fn format_timestamp(us: u64, unit: TimeUnit) -> String {
    match unit {
        TimeUnit::Nanoseconds => (us as u128 * 1000).to_string(),
        TimeUnit::Microseconds => us.to_string(),
        TimeUnit::Milliseconds => format_decimal(us, 3),
        TimeUnit::Seconds => format_decimal(us, 6),
    }
}

fn format_decimal(value: u64, frac_digits: u32) -> String {
    let scale = 10u64.pow(frac_digits);
    let (int, frac) = (value / scale, value % scale);
    if frac == 0 {
        int.to_string()
    } else {
        let s = format!("{int}.{frac:0width$}", width = frac_digits as usize);
        s.trim_end_matches('0').to_string()
    }
}

/// A malformed line that was skipped by a lenient parser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: u64,
    pub reason: String,
}

/// Lazy line-by-line trace parser.
///
/// In lenient mode malformed lines are skipped and counted; the first
/// [`TraceParser::MAX_DIAGNOSTICS`] of them are kept with their line numbers.
/// In strict mode the first malformed line is yielded as
/// [`Error::MalformedLine`] and iteration stops.
pub struct TraceParser<R> {
    reader: R,
    schema: TraceSchema,
    strict: bool,
    line_no: u64,
    buf: String,
    skipped: u64,
    diagnostics: Vec<Diagnostic>,
    done: bool,
}

impl<R: BufRead> TraceParser<R> {
    pub const MAX_DIAGNOSTICS: usize = 16;

    pub fn new(reader: R, schema: TraceSchema, strict: bool) -> Self {
        TraceParser {
            reader,
            schema,
            strict,
            line_no: 0,
            buf: String::new(),
            skipped: 0,
            diagnostics: Vec::new(),
            done: false,
        }
    }

    /// Number of malformed lines skipped so far.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    pub fn lines_read(&self) -> u64 {
        self.line_no
    }
}

impl<R: BufRead> Iterator for TraceParser<R> {
    type Item = Result<TraceRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => {
                    self.done = true;
                    return None;
                }
                Ok(_) => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            }
            self.line_no += 1;
            if self.schema.header && self.line_no == 1 {
                continue;
            }
            let line = self.buf.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match self.schema.parse_line(line) {
                Ok(r) => return Some(Ok(r)),
                Err(reason) if self.strict => {
                    self.done = true;
                    return Some(Err(Error::MalformedLine { line: self.line_no, reason }));
                }
                Err(reason) => {
                    self.skipped += 1;
                    if self.diagnostics.len() < Self::MAX_DIAGNOSTICS {
                        self.diagnostics.push(Diagnostic { line: self.line_no, reason });
                    }
                }
            }
        }
        None
    }
}

/// Parses a trace from any buffered reader.
pub fn parse_trace<R: BufRead>(reader: R, schema: &TraceSchema, strict: bool) -> TraceParser<R> {
    TraceParser::new(reader, schema.clone(), strict)
}

/// Opens a trace file, transparently decompressing `.gz` files.
pub fn open_trace(path: &Path) -> Result<Box<dyn BufRead + Send>> {
    let file = File::open(path)?;
    let gz = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    if gz {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::with_capacity(1 << 16, file)))
    }
}

/// Partitions records by volume. Each workload is stable-sorted by timestamp.
pub fn split_by_volume<I>(records: I) -> BTreeMap<String, Workload>
where
    I: IntoIterator<Item = TraceRecord>,
{
    let mut groups: BTreeMap<String, Vec<TraceRecord>> = BTreeMap::new();
    for r in records {
        match groups.get_mut(r.volume_id.as_str()) {
            Some(v) => v.push(r),
            None => {
                groups.insert(r.volume_id.clone(), vec![r]);
            }
        }
    }
    groups
        .into_iter()
        .map(|(vol, mut records)| {
            if !records.windows(2).all(|w| w[0].timestamp_us <= w[1].timestamp_us) {
                records.sort_by_key(|r| r.timestamp_us);
            }
            let w = Workload { volume_id: vol.clone(), records };
            (vol, w)
        })
        .collect()
}

/// Writes the records of a workload through `schema`, one per line.
pub fn write_trace<W: Write + ?Sized>(out: &mut W, records: &[TraceRecord], schema: &TraceSchema) -> io::Result<()> {
    for r in records {
        writeln!(out, "{}", schema.format_record(r))?;
    }
    Ok(())
}
