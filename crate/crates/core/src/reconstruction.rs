//! Grayscale video from events with a per-pixel leaky integrator.
//!
//! Each pixel holds a log-intensity estimate `S`. Between updates it decays
//! as `S(t) = S(t_last) * exp(-alpha * (t - t_last))`; every event adds
//! `p * c`. Decay is applied lazily, only when a pixel is touched or
//! sampled. Frames are taken every `sample_period` microseconds and the
//! last frame always lands on `t_end`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::events::{EventStream, Timestamp};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToneMap<F> {
    /// Linear stretch between the `lo` and `hi` quantiles (fractions) of
    /// all states of the sequence.
    Percentile { lo: F, hi: F },
    /// Linear stretch between fixed state values.
    Fixed { min: F, max: F },
}

impl<F: Scalar> Default for ToneMap<F> {
    fn default() -> Self {
        ToneMap::Percentile {
            lo: F::lit(0.01),
            hi: F::lit(0.99),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconConfig<F> {
    /// Decay rate in 1/s.
    pub alpha: F,
    /// Log-intensity step per event.
    pub contrast: F,
    /// Microseconds between output frames.
    pub sample_period: u64,
    pub tone_map: ToneMap<F>,
}

impl<F: Scalar> Default for ReconConfig<F> {
    fn default() -> Self {
        ReconConfig {
            alpha: F::lit(5.0),
            contrast: F::lit(0.2),
            sample_period: 33_333,
            tone_map: ToneMap::default(),
        }
    }
}

impl<F: Scalar> ReconConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= F::zero() && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.contrast > F::zero() && self.contrast.is_finite()) {
            return Err(Error::InvalidConfig(format!("contrast must be > 0, got {}", self.contrast)));
        }
        if self.sample_period == 0 {
            return Err(Error::InvalidConfig("sample period must be > 0".into()));
        }
        match self.tone_map {
            ToneMap::Percentile { lo, hi } => {
                if !(lo >= F::zero() && lo < hi && hi <= F::one()) {
                    return Err(Error::InvalidConfig(format!(
                        "percentiles must satisfy 0 <= lo < hi <= 1, got {lo}, {hi}"
                    )));
                }
            }
            ToneMap::Fixed { min, max } => {
                if !(min < max && min.is_finite() && max.is_finite()) {
                    return Err(Error::InvalidConfig(format!("fixed tone map needs min < max, got {min}, {max}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame<F> {
    pub width: u32,
    pub height: u32,
    pub t: Timestamp,
    pub state: Vec<F>,
    pub gray: Vec<u8>,
}

/// Instants at which frames are sampled: `t_start + k * period` for
/// `k = 1..=max(1, ceil(T / period))`, the last one clamped to `t_end`.
pub fn sample_instants(t_start: Timestamp, t_end: Timestamp, period: u64) -> Vec<Timestamp> {
    let n = (t_end - t_start).div_ceil(period).max(1);
    (1..=n).map(|k| (t_start + k * period).min(t_end)).collect()
}

/// `state` is kept in event units (a decayed sum of ±1) and scaled by the
/// contrast only when sampled, so a pure integrator stays an exact integer.
#[derive(Clone, Copy)]
struct Pixel<F> {
    state: F,
    t_last: Timestamp,
}

#[inline]
fn decay<F: Scalar>(state: F, alpha: F, dt_us: u64) -> F {
    if alpha == F::zero() || dt_us == 0 {
        state
    } else {
        state * (-alpha * F::from_u64_lossy(dt_us) * F::lit(1e-6)).exp()
    }
}

/// Per-pixel states at each sample instant, before tone mapping.
pub fn integrate<F: Scalar>(stream: &EventStream, cfg: &ReconConfig<F>) -> Result<Vec<(Timestamp, Vec<F>)>> {
    cfg.validate()?;
    let w = stream.width() as usize;
    let n = w * stream.height() as usize;
    let mut pixels = vec![
        Pixel {
            state: F::zero(),
            t_last: stream.t_start(),
        };
        n
    ];
    let events = stream.events();
    let mut next = 0usize;
    let mut out = Vec::new();
    for s in sample_instants(stream.t_start(), stream.t_end(), cfg.sample_period) {
        while next < events.len() && events[next].t <= s {
            let e = events[next];
            let px = &mut pixels[e.y as usize * w + e.x as usize];
            px.state = decay(px.state, cfg.alpha, e.t - px.t_last) + F::from_i32(e.p.sign()).unwrap();
            px.t_last = e.t;
            next += 1;
        }
        let state: Vec<F> = pixels
            .par_iter()
            .map(|px| decay(px.state, cfg.alpha, s - px.t_last) * cfg.contrast)
            .collect();
        out.push((s, state));
    }
    Ok(out)
}

/// Value at quantile `q` (nearest rank on `round(q * (n - 1))`).
fn quantile<F: Scalar>(sorted: &[F], q: F) -> F {
    let last = sorted.len() - 1;
    let idx = (q * F::from_usize_lossy(last)).round().to_usize().unwrap_or(0).min(last);
    sorted[idx]
}

/// Resolves the tone map to a `(low, high)` state range for `states`.
pub fn tone_range<F: Scalar>(tone_map: &ToneMap<F>, states: &[&[F]]) -> (F, F) {
    match *tone_map {
        ToneMap::Fixed { min, max } => (min, max),
        ToneMap::Percentile { lo, hi } => {
            let mut all: Vec<F> = states.iter().flat_map(|s| s.iter().copied()).collect();
            if all.is_empty() {
                return (F::zero(), F::zero());
            }
            all.par_sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            (quantile(&all, lo), quantile(&all, hi))
        }
    }
}

/// Linear map of `[low, high]` to `[0, 255]`, clamped. A collapsed range
/// maps everything to mid-gray.
pub fn tone_map_values<F: Scalar>(state: &[F], low: F, high: F) -> Vec<u8> {
    if high.partial_cmp(&low) != Some(std::cmp::Ordering::Greater) {
        return vec![128; state.len()];
    }
    let scale = F::lit(255.0) / (high - low);
    state
        .iter()
        .map(|&v| ((v - low) * scale).round().to_f64_lossy().clamp(0.0, 255.0) as u8)
        .collect()
}

pub fn reconstruct<F: Scalar>(stream: &EventStream, cfg: &ReconConfig<F>) -> Result<Vec<GrayFrame<F>>> {
    let samples = integrate(stream, cfg)?;
    let refs: Vec<&[F]> = samples.iter().map(|(_, s)| s.as_slice()).collect();
    let (low, high) = tone_range(&cfg.tone_map, &refs);
    Ok(samples
        .into_iter()
        .map(|(t, state)| GrayFrame {
            width: stream.width(),
            height: stream.height(),
            t,
            gray: tone_map_values(&state, low, high),
            state,
        })
        .collect())
}

pub const STATE_MAGIC: &[u8; 4] = b"RECS";

/// `RECS` dump: magic, width u32, height u32, t u64, then f32 states.
pub fn encode_state<F: Scalar>(frame: &GrayFrame<F>) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + frame.state.len() * 4);
    out.extend_from_slice(STATE_MAGIC);
    out.extend_from_slice(&frame.width.to_le_bytes());
    out.extend_from_slice(&frame.height.to_le_bytes());
    out.extend_from_slice(&frame.t.to_le_bytes());
    for v in &frame.state {
        out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
    }
    out
}
