//! Dense event representations: event count maps (ECM) and voxel grids.
//!
//! An ECM bins the stream into fixed windows of `w` microseconds and sums
//! polarities (or counts) per pixel. The number of bins is `ceil(T / w)`;
//! the last bin may be shorter than `w` and is flagged as partial. It is
//! closed on the right so events stamped exactly at `t_end` are counted.

use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::events::{EventStream, Polarity, StreamHeader, Timestamp};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EcmMode {
    /// Per-pixel sum of polarities.
    #[default]
    Signed,
    /// Per-pixel event count.
    Count,
    /// Separate ON and OFF count channels.
    TwoChannel,
}

impl EcmMode {
    pub fn channels(self) -> usize {
        match self {
            EcmMode::TwoChannel => 2,
            _ => 1,
        }
    }
}

impl FromStr for EcmMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "signed" => Ok(EcmMode::Signed),
            "count" => Ok(EcmMode::Count),
            "two-channel" | "two_channel" => Ok(EcmMode::TwoChannel),
            other => Err(format!("unknown ECM mode `{other}` (signed, count, two-channel)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    PerSequence,
    PerBin,
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "per-sequence" | "per_sequence" => Ok(Normalization::PerSequence),
            "per-bin" | "per_bin" => Ok(Normalization::PerBin),
            other => Err(format!("unknown normalization `{other}` (per-sequence, per-bin)")),
        }
    }
}

/// Tiling of a stream's time window into fixed-width bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinGrid {
    pub width: u32,
    pub height: u32,
    pub t_start: Timestamp,
    pub t_end: Timestamp,
    pub window: u64,
    pub n: usize,
}

impl BinGrid {
    pub fn new(header: StreamHeader, window: u64) -> Result<Self> {
        if window == 0 {
            return Err(Error::ZeroWindow);
        }
        if header.t_end < header.t_start {
            return Err(Error::NegativeDuration {
                t_start: header.t_start,
                t_end: header.t_end,
            });
        }
        let n = header.duration().div_ceil(window).max(1) as usize;
        Ok(BinGrid {
            width: header.width,
            height: header.height,
            t_start: header.t_start,
            t_end: header.t_end,
            window,
            n,
        })
    }

    /// `[t0, t1)` of bin `i`; the last bin additionally owns `t_end`.
    pub fn bounds(&self, i: usize) -> (Timestamp, Timestamp) {
        let t0 = self.t_start + i as u64 * self.window;
        let t1 = (t0 + self.window).min(self.t_end);
        (t0, t1)
    }

    pub fn is_partial(&self, i: usize) -> bool {
        let (t0, t1) = self.bounds(i);
        t1 - t0 < self.window
    }

    /// Bin containing instant `t`, if any.
    pub fn bin_of(&self, t: Timestamp) -> Option<usize> {
        if t < self.t_start || t > self.t_end {
            return None;
        }
        Some((((t - self.t_start) / self.window) as usize).min(self.n - 1))
    }
}

/// One bin of an event count map. `raw` and `gray` are row-major and, in
/// two-channel mode, hold the ON plane followed by the OFF plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcmFrame {
    pub width: u32,
    pub height: u32,
    pub bin_index: usize,
    pub t0: Timestamp,
    pub t1: Timestamp,
    pub partial: bool,
    pub event_count: usize,
    pub raw: Vec<i32>,
    pub gray: Vec<u8>,
}

impl EcmFrame {
    pub fn plane_len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn raw_channel(&self, c: usize) -> &[i32] {
        let n = self.plane_len();
        &self.raw[c * n..(c + 1) * n]
    }

    pub fn gray_channel(&self, c: usize) -> &[u8] {
        let n = self.plane_len();
        &self.gray[c * n..(c + 1) * n]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcmSequence {
    pub grid: BinGrid,
    pub mode: EcmMode,
    pub normalization: Normalization,
    pub bins: Vec<EcmFrame>,
}

impl EcmSequence {
    pub fn window(&self) -> u64 {
        self.grid.window
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

/// Accumulates the raw map of one bin.
pub fn accumulate_raw(stream: &EventStream, range: std::ops::Range<usize>, mode: EcmMode) -> Vec<i32> {
    let plane = stream.width() as usize * stream.height() as usize;
    let w = stream.width() as usize;
    let mut raw = vec![0i32; plane * mode.channels()];
    let events = &stream.events()[range];
    match mode {
        EcmMode::Signed => {
            for e in events {
                raw[e.y as usize * w + e.x as usize] += e.p.sign();
            }
        }
        EcmMode::Count => {
            for e in events {
                raw[e.y as usize * w + e.x as usize] += 1;
            }
        }
        EcmMode::TwoChannel => {
            for e in events {
                let c = if e.p == Polarity::On { 0 } else { plane };
                raw[c + e.y as usize * w + e.x as usize] += 1;
            }
        }
    }
    raw
}

/// Raw (unnormalized) maps of every bin of `grid`, one per bin.
pub fn bin_raw_maps(stream: &EventStream, grid: &BinGrid, mode: EcmMode) -> Vec<(usize, Vec<i32>)> {
    (0..grid.n)
        .into_par_iter()
        .map(|i| {
            let (t0, t1) = grid.bounds(i);
            let range = if i + 1 == grid.n {
                stream.index_range(t0, t1.saturating_add(1))
            } else {
                stream.index_range(t0, t1)
            };
            let count = range.len();
            (count, accumulate_raw(stream, range, mode))
        })
        .collect()
}

fn max_abs(raw: &[i32]) -> i64 {
    raw.iter().map(|v| i64::from(*v).abs()).max().unwrap_or(0)
}

fn gray_value(raw: i32, m: i64, mode: EcmMode) -> u8 {
    let r = f64::from(raw) / m as f64;
    let v = match mode {
        EcmMode::Signed => 128.0 + 127.0 * r,
        EcmMode::Count | EcmMode::TwoChannel => 255.0 * r,
    };
    v.round().clamp(0.0, 255.0) as u8
}

/// Maps raw sums to `[0, 255]`.
///
/// Signed mode: `round(128 + 127 * raw / M)`. Count modes:
/// `round(255 * raw / M)`. `M = max(1, max |raw|)` taken over all maps
/// (per sequence) or over each map alone (per bin).
pub fn normalize_to_gray(raws: &[&[i32]], mode: EcmMode, normalization: Normalization) -> Vec<Vec<u8>> {
    let global = raws.iter().map(|r| max_abs(r)).max().unwrap_or(0).max(1);
    raws.par_iter()
        .map(|raw| {
            let m = match normalization {
                Normalization::PerSequence => global,
                Normalization::PerBin => max_abs(raw).max(1),
            };
            raw.iter().map(|&v| gray_value(v, m, mode)).collect()
        })
        .collect()
}

pub fn build_ecm(
    stream: &EventStream,
    window: u64,
    mode: EcmMode,
    normalization: Normalization,
) -> Result<EcmSequence> {
    let grid = BinGrid::new(stream.header(), window)?;
    let raws = bin_raw_maps(stream, &grid, mode);
    let raw_refs: Vec<&[i32]> = raws.iter().map(|(_, r)| r.as_slice()).collect();
    let grays = normalize_to_gray(&raw_refs, mode, normalization);
    let bins = raws
        .into_iter()
        .zip(grays)
        .enumerate()
        .map(|(i, ((event_count, raw), gray))| {
            let (t0, t1) = grid.bounds(i);
            EcmFrame {
                width: grid.width,
                height: grid.height,
                bin_index: i,
                t0,
                t1,
                partial: grid.is_partial(i),
                event_count,
                raw,
                gray,
            }
        })
        .collect();
    Ok(EcmSequence {
        grid,
        mode,
        normalization,
        bins,
    })
}

pub const RAW_MAGIC: &[u8; 4] = b"ECMR";

/// `ECMR` dump of one raw channel: 16-byte header then little-endian i32.
pub fn encode_raw(frame: &EcmFrame, channel: usize) -> Vec<u8> {
    let plane = frame.raw_channel(channel);
    let mut out = Vec::with_capacity(16 + plane.len() * 4);
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&frame.width.to_le_bytes());
    out.extend_from_slice(&frame.height.to_le_bytes());
    out.extend_from_slice(&(frame.bin_index as u32).to_le_bytes());
    for v in plane {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Temporal voxel grid with bilinear weighting along time.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid<F> {
    pub width: u32,
    pub height: u32,
    pub num_bins: usize,
    pub t0: Timestamp,
    pub t1: Timestamp,
    /// Indexed `[bin][y][x]`.
    pub values: Vec<F>,
}

impl<F: Scalar> VoxelGrid<F> {
    #[inline]
    pub fn get(&self, bin: usize, x: u32, y: u32) -> F {
        let plane = self.width as usize * self.height as usize;
        self.values[bin * plane + y as usize * self.width as usize + x as usize]
    }

    pub fn bin(&self, bin: usize) -> &[F] {
        let plane = self.width as usize * self.height as usize;
        &self.values[bin * plane..(bin + 1) * plane]
    }

    pub fn total(&self) -> F {
        self.values.iter().copied().sum()
    }
}

/// Spreads each event with `t0 <= t <= t1` over the two temporal bins
/// adjacent to `tau = (t - t0) * (B - 1) / (t1 - t0)`.
pub fn build_voxel_grid<F: Scalar>(
    stream: &EventStream,
    t0: Timestamp,
    t1: Timestamp,
    num_bins: usize,
) -> Result<VoxelGrid<F>> {
    if t0 >= t1 {
        return Err(Error::InvalidRange { t0, t1 });
    }
    if num_bins == 0 {
        return Err(Error::InvalidConfig("voxel grid needs at least one bin".into()));
    }
    let (w, h) = (stream.width() as usize, stream.height() as usize);
    let plane = w * h;
    let mut values = vec![F::zero(); plane * num_bins];
    let scale = F::from_usize_lossy(num_bins - 1) / F::from_u64_lossy(t1 - t0);
    for e in &stream.events()[stream.index_range(t0, t1.saturating_add(1))] {
        let tau = F::from_u64_lossy(e.t - t0) * scale;
        let lower = tau.floor();
        let frac = tau - lower;
        let b = lower.to_usize().unwrap_or(0).min(num_bins - 1);
        let p = F::from_i32(e.p.sign()).unwrap();
        let pix = e.y as usize * w + e.x as usize;
        values[b * plane + pix] = values[b * plane + pix] + p * (F::one() - frac);
        if b + 1 < num_bins {
            values[(b + 1) * plane + pix] = values[(b + 1) * plane + pix] + p * frac;
        }
    }
    Ok(VoxelGrid {
        width: stream.width(),
        height: stream.height(),
        num_bins,
        t0,
        t1,
        values,
    })
}
