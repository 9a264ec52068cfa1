//! Event types, canonical streams, slicing and the two on-disk formats.
//!
//! Text format:
//!
//! ```text
//! # EVT <width> <height> <t_start> <t_end>
//! <t> <x> <y> <p>
//! ```
//!
//! Binary format: magic `EVT1`, then a little-endian header
//! `{width: u32, height: u32, t_start: u64, t_end: u64, count: u64}` and
//! `count` records of 16 bytes `{t: u64, x: u16, y: u16, p: i8, pad: [0; 3]}`.

use std::cmp::Ordering;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io_util::write_atomic;

/// Microseconds.
pub type Timestamp = u64;

pub const BINARY_MAGIC: &[u8; 4] = b"EVT1";
pub const BINARY_HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8 + 8;
pub const BINARY_RECORD_LEN: usize = 16;

/// Sign of a brightness change. `Off` (−1) orders before `On` (+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    #[inline]
    pub fn sign(self) -> i32 {
        match self {
            Polarity::Off => -1,
            Polarity::On => 1,
        }
    }

    pub fn from_sign(v: i64) -> Option<Self> {
        match v {
            1 => Some(Polarity::On),
            -1 => Some(Polarity::Off),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Off => Polarity::On,
            Polarity::On => Polarity::Off,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub t: Timestamp,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: Timestamp, x: u16, y: u16, p: Polarity) -> Self {
        Event { t, x, y, p }
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.t, self.y, self.x, self.p).cmp(&(other.t, other.y, other.x, other.p))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sensor geometry and time window of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub width: u32,
    pub height: u32,
    pub t_start: Timestamp,
    pub t_end: Timestamp,
}

impl StreamHeader {
    pub fn new(width: u32, height: u32, t_start: Timestamp, t_end: Timestamp) -> Self {
        StreamHeader {
            width,
            height,
            t_start,
            t_end,
        }
    }

    pub fn duration(&self) -> u64 {
        self.t_end.saturating_sub(self.t_start)
    }

    fn check(&self) -> Result<()> {
        if self.t_end < self.t_start {
            return Err(Error::NegativeDuration {
                t_start: self.t_start,
                t_end: self.t_end,
            });
        }
        Ok(())
    }

    fn check_event(&self, e: &Event) -> Result<()> {
        if u32::from(e.x) >= self.width || u32::from(e.y) >= self.height {
            return Err(Error::OutOfBounds {
                x: e.x.into(),
                y: e.y.into(),
                width: self.width,
                height: self.height,
            });
        }
        if e.t < self.t_start || e.t > self.t_end {
            return Err(Error::TimestampOutOfRange {
                t: e.t,
                t_start: self.t_start,
                t_end: self.t_end,
            });
        }
        Ok(())
    }
}

/// A validated event stream: events sorted by `(t, y, x, p)` without
/// duplicates, all inside the sensor and within `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    header: StreamHeader,
    events: Vec<Event>,
}

const PAR_SORT_THRESHOLD: usize = 1 << 16;

/// Sorts, deduplicates and validates `events` against `header`.
pub fn canonicalize(header: StreamHeader, mut events: Vec<Event>) -> Result<EventStream> {
    header.check()?;
    for e in &events {
        header.check_event(e)?;
    }
    if events.len() >= PAR_SORT_THRESHOLD {
        events.par_sort_unstable();
    } else {
        events.sort_unstable();
    }
    events.dedup();
    Ok(EventStream { header, events })
}

impl EventStream {
    pub fn new(header: StreamHeader, events: Vec<Event>) -> Result<Self> {
        canonicalize(header, events)
    }

    pub fn empty(header: StreamHeader) -> Result<Self> {
        header.check()?;
        Ok(EventStream {
            header,
            events: Vec::new(),
        })
    }

    pub fn header(&self) -> StreamHeader {
        self.header
    }

    pub fn width(&self) -> u32 {
        self.header.width
    }

    pub fn height(&self) -> u32 {
        self.header.height
    }

    pub fn t_start(&self) -> Timestamp {
        self.header.t_start
    }

    pub fn t_end(&self) -> Timestamp {
        self.header.t_end
    }

    pub fn duration(&self) -> u64 {
        self.header.duration()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_parts(self) -> (StreamHeader, Vec<Event>) {
        (self.header, self.events)
    }

    /// Re-canonicalizes; a no-op on any value of this type.
    pub fn canonicalize(self) -> Result<Self> {
        canonicalize(self.header, self.events)
    }

    /// Index range of the events with `t0 <= t < t1`.
    pub fn index_range(&self, t0: Timestamp, t1: Timestamp) -> std::ops::Range<usize> {
        let lo = self.events.partition_point(|e| e.t < t0);
        let hi = lo + self.events[lo..].partition_point(|e| e.t < t1);
        lo..hi
    }

    /// Events with `t0 <= t < t1`, as a stream over `[t0, t1]`.
    ///
    /// `t1` may be one tick past `t_end` so that a single slice can cover
    /// events stamped exactly at `t_end`.
    pub fn slice(&self, t0: Timestamp, t1: Timestamp) -> Result<EventStream> {
        if t0 > t1 || t0 < self.header.t_start || t1 > self.header.t_end.saturating_add(1) {
            return Err(Error::InvalidRange { t0, t1 });
        }
        let range = self.index_range(t0, t1);
        Ok(EventStream {
            header: StreamHeader {
                t_start: t0,
                t_end: t1,
                ..self.header
            },
            events: self.events[range].to_vec(),
        })
    }

    /// Union of two streams sharing a header.
    pub fn merge(&self, other: &EventStream) -> Result<EventStream> {
        if self.header != other.header {
            return Err(Error::HeaderMismatch(format!(
                "cannot merge {:?} with {:?}",
                self.header, other.header
            )));
        }
        let mut events = Vec::with_capacity(self.len() + other.len());
        events.extend_from_slice(&self.events);
        events.extend_from_slice(&other.events);
        canonicalize(self.header, events)
    }

    /// `(positive, negative)` event counts.
    pub fn polarity_counts(&self) -> (usize, usize) {
        let pos = self.events.iter().filter(|e| e.p == Polarity::On).count();
        (pos, self.events.len() - pos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Text,
    Binary,
}

impl EventFormat {
    /// `.evt` is text, `.evb` is binary.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "evt" => Some(EventFormat::Text),
            "evb" => Some(EventFormat::Binary),
            _ => None,
        }
    }
}

impl std::str::FromStr for EventFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "text" | "evt" => Ok(EventFormat::Text),
            "binary" | "evb" => Ok(EventFormat::Binary),
            other => Err(format!("unknown event format `{other}` (expected text or binary)")),
        }
    }
}

pub fn read_events(path: &Path, format: EventFormat) -> Result<EventStream> {
    let file = fs::File::open(path)?;
    let mut reader = BufReader::new(file);
    match format {
        EventFormat::Text => read_text(reader),
        EventFormat::Binary => {
            let mut bytes = Vec::new();
            reader.read_to_end(&mut bytes)?;
            decode_binary(&bytes)
        }
    }
}

pub fn write_events(stream: &EventStream, path: &Path, format: EventFormat) -> Result<()> {
    let bytes = match format {
        EventFormat::Text => encode_text(stream),
        EventFormat::Binary => encode_binary(stream),
    };
    write_atomic(path, &bytes)?;
    Ok(())
}

pub fn encode_text(stream: &EventStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + stream.len() * 16);
    let h = stream.header;
    writeln!(out, "# EVT {} {} {} {}", h.width, h.height, h.t_start, h.t_end).unwrap();
    for e in &stream.events {
        writeln!(out, "{} {} {} {}", e.t, e.x, e.y, e.p.sign()).unwrap();
    }
    out
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, record: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(record, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::parse(record, format!("invalid {what} `{tok}`")))
}

pub fn read_text<R: BufRead>(reader: R) -> Result<EventStream> {
    let mut lines = reader.lines();
    let header_line = match lines.next() {
        Some(line) => line?,
        None => return Err(Error::HeaderMismatch("empty file, expected `# EVT` header".into())),
    };
    let mut toks = header_line.split_whitespace();
    if toks.next() != Some("#") || toks.next() != Some("EVT") {
        return Err(Error::HeaderMismatch(format!("bad header line `{header_line}`")));
    }
    let header = StreamHeader {
        width: parse_field(toks.next(), 1, "width")?,
        height: parse_field(toks.next(), 1, "height")?,
        t_start: parse_field(toks.next(), 1, "t_start")?,
        t_end: parse_field(toks.next(), 1, "t_end")?,
    };
    if toks.next().is_some() {
        return Err(Error::HeaderMismatch("trailing fields in header".into()));
    }
    header.check()?;

    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        let record = i + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split(' ');
        let t = parse_field(toks.next(), record, "t")?;
        let x = parse_field(toks.next(), record, "x")?;
        let y = parse_field(toks.next(), record, "y")?;
        let p: i64 = parse_field(toks.next(), record, "p")?;
        if toks.next().is_some() {
            return Err(Error::parse(record, "expected exactly four fields"));
        }
        let p = Polarity::from_sign(p)
            .ok_or_else(|| Error::parse(record, format!("polarity must be 1 or -1, got {p}")))?;
        let e = Event { t, x, y, p };
        header.check_event(&e).map_err(|err| Error::parse(record, err.to_string()))?;
        events.push(e);
    }
    canonicalize(header, events)
}

pub fn encode_binary(stream: &EventStream) -> Vec<u8> {
    let h = stream.header;
    let mut out = Vec::with_capacity(BINARY_HEADER_LEN + stream.len() * BINARY_RECORD_LEN);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&h.width.to_le_bytes());
    out.extend_from_slice(&h.height.to_le_bytes());
    out.extend_from_slice(&h.t_start.to_le_bytes());
    out.extend_from_slice(&h.t_end.to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in &stream.events {
        out.extend_from_slice(&e.t.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.p.sign() as i8 as u8);
        out.extend_from_slice(&[0u8; 3]);
    }
    out
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().unwrap())
}

fn le_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b.try_into().unwrap())
}

pub fn decode_binary(bytes: &[u8]) -> Result<EventStream> {
    if bytes.len() < BINARY_HEADER_LEN {
        return Err(Error::HeaderMismatch(format!(
            "file is {} bytes, shorter than the {BINARY_HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..4] != BINARY_MAGIC {
        return Err(Error::HeaderMismatch("bad magic, expected EVT1".into()));
    }
    let header = StreamHeader {
        width: le_u32(&bytes[4..8]),
        height: le_u32(&bytes[8..12]),
        t_start: le_u64(&bytes[12..20]),
        t_end: le_u64(&bytes[20..28]),
    };
    header.check()?;
    let count = le_u64(&bytes[28..36]);
    let body = &bytes[BINARY_HEADER_LEN..];
    let expected = (count as u128) * BINARY_RECORD_LEN as u128;
    if body.len() as u128 != expected {
        return Err(Error::HeaderMismatch(format!(
            "header declares {count} records but body holds {} bytes",
            body.len()
        )));
    }
    let mut events = Vec::with_capacity(count as usize);
    for (i, rec) in body.chunks_exact(BINARY_RECORD_LEN).enumerate() {
        let record = i + 1;
        let p = Polarity::from_sign(i64::from(rec[12] as i8)).ok_or_else(|| {
            Error::parse(record, format!("polarity byte {} is not +1 or -1", rec[12] as i8))
        })?;
        if rec[13..16] != [0, 0, 0] {
            return Err(Error::parse(record, "non-zero padding"));
        }
        let e = Event {
            t: le_u64(&rec[0..8]),
            x: u16::from_le_bytes([rec[8], rec[9]]),
            y: u16::from_le_bytes([rec[10], rec[11]]),
            p,
        };
        header.check_event(&e).map_err(|err| Error::parse(record, err.to_string()))?;
        events.push(e);
    }
    canonicalize(header, events)
}
