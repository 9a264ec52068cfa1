//! Contrast-threshold event simulator driven by intensity frames.
//!
//! Each pixel integrates the change of its lin-log intensity against a
//! reference level. Whenever the change reaches a threshold an event of the
//! corresponding sign is emitted and the reference moves by exactly one
//! threshold, so sub-threshold residue carries over to later frames. Event
//! times are interpolated on the straight line joining the log intensities
//! of consecutive frames.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::events::{canonicalize, Event, EventStream, Polarity, StreamHeader, Timestamp};
use crate::pnm::{read_pnm, GrayImage};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatorConfig<F> {
    /// Log-intensity step that fires an ON event.
    pub theta_pos: F,
    /// Log-intensity step that fires an OFF event.
    pub theta_neg: F,
    /// Intensity (0..255 scale) below which the response is linear.
    pub linlog_knee: F,
    pub max_events_per_pixel_per_interval: Option<u32>,
}

impl<F: Scalar> Default for SimulatorConfig<F> {
    fn default() -> Self {
        SimulatorConfig {
            theta_pos: F::lit(0.2),
            theta_neg: F::lit(0.2),
            linlog_knee: F::lit(20.0),
            max_events_per_pixel_per_interval: None,
        }
    }
}

impl<F: Scalar> SimulatorConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_pos > F::zero() && self.theta_pos.is_finite()) {
            return Err(Error::InvalidConfig(format!("theta_pos must be > 0, got {}", self.theta_pos)));
        }
        if !(self.theta_neg > F::zero() && self.theta_neg.is_finite()) {
            return Err(Error::InvalidConfig(format!("theta_neg must be > 0, got {}", self.theta_neg)));
        }
        if !(self.linlog_knee > F::zero() && self.linlog_knee < F::lit(256.0)) {
            return Err(Error::InvalidConfig(format!(
                "linlog_knee must lie in (0, 256), got {}",
                self.linlog_knee
            )));
        }
        Ok(())
    }
}

/// Lin-log photoreceptor response: `ln(knee)/knee * I` below the knee,
/// `ln(I)` at and above it.
pub fn linlog<F: Scalar>(intensity: F, knee: F) -> F {
    if intensity < knee {
        intensity * knee.ln() / knee
    } else {
        intensity.ln()
    }
}

/// Inverse of [`linlog`] on its range.
pub fn linlog_inverse<F: Scalar>(log_intensity: F, knee: F) -> F {
    let at_knee = knee.ln();
    if log_intensity < at_knee {
        log_intensity * knee / at_knee
    } else {
        log_intensity.exp()
    }
}

/// Grayscale video: row-major frames with intensities on a 0..255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence<F> {
    width: u32,
    height: u32,
    fps: f64,
    frames: Vec<Vec<F>>,
}

impl<F: Scalar> FrameSequence<F> {
    pub fn new(width: u32, height: u32, fps: f64, frames: Vec<Vec<F>>) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::DegenerateFps(fps));
        }
        if frames.is_empty() {
            return Err(Error::GeometryMismatch("a frame sequence needs at least one frame".into()));
        }
        if width > u32::from(u16::MAX) + 1 || height > u32::from(u16::MAX) + 1 {
            return Err(Error::GeometryMismatch(format!("{width}x{height} exceeds 16-bit coordinates")));
        }
        let n = width as usize * height as usize;
        for (i, f) in frames.iter().enumerate() {
            if f.len() != n {
                return Err(Error::GeometryMismatch(format!(
                    "frame {i} has {} pixels, expected {width}x{height}",
                    f.len()
                )));
            }
            if let Some(v) = f.iter().find(|v| !(**v >= F::zero() && **v <= F::lit(255.0))) {
                return Err(Error::InvalidConfig(format!("frame {i} has intensity {v} outside [0, 255]")));
            }
        }
        Ok(FrameSequence {
            width,
            height,
            fps,
            frames,
        })
    }

    pub fn from_images(images: &[GrayImage], fps: f64) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::GeometryMismatch("no frames".into()))?;
        let (w, h) = (first.width, first.height);
        let mut frames = Vec::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            if (img.width, img.height) != (w, h) {
                return Err(Error::GeometryMismatch(format!(
                    "frame {i} is {}x{}, first frame is {w}x{h}",
                    img.width, img.height
                )));
            }
            frames.push(img.pixels.iter().map(|&v| F::lit(f64::from(v))).collect());
        }
        Self::new(w, h, fps, frames)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn frames(&self) -> &[Vec<F>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Exact (unrounded) time of frame `index` in microseconds.
    pub fn frame_time_us(&self, index: usize) -> f64 {
        index as f64 * 1e6 / self.fps
    }

    /// Stream end: the last frame instant rounded to whole microseconds.
    pub fn end_time_us(&self) -> Timestamp {
        round_half_up(self.frame_time_us(self.frames.len() - 1))
    }
}

/// Lists the PGM/PPM/PNM files of `dir` ordered by the number embedded in
/// their file name (ties broken by name).
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if matches!(ext.as_deref(), Some("pgm" | "ppm" | "pnm")) && path.is_file() {
            files.push(path);
        }
    }
    let key = |p: &PathBuf| {
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
        let digits: String = stem
            .chars()
            .rev()
            .skip_while(|c| !c.is_ascii_digit())
            .take_while(|c| c.is_ascii_digit())
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        (digits.parse::<u64>().ok(), stem)
    };
    files.sort_by_key(key);
    Ok(files)
}

pub fn read_frame_dir<F: Scalar>(dir: &Path, fps: f64) -> Result<FrameSequence<F>> {
    let files = list_frame_files(dir)?;
    if files.is_empty() {
        return Err(Error::GeometryMismatch(format!("no PGM/PPM frames in {}", dir.display())));
    }
    let images = files.iter().map(|p| read_pnm(p)).collect::<Result<Vec<_>>>()?;
    FrameSequence::from_images(&images, fps)
}

#[inline]
pub(crate) fn round_half_up(t: f64) -> Timestamp {
    (t + 0.5).floor().max(0.0) as Timestamp
}

/// Runs the threshold model on one pixel's intensity trajectory, pushing
/// `(t_us, polarity)` pairs in time order.
fn simulate_pixel<F: Scalar>(
    intensities: impl Iterator<Item = F>,
    frame_times: &[f64],
    cfg: &SimulatorConfig<F>,
    out: &mut Vec<(Timestamp, Polarity)>,
) {
    let mut intensities = intensities;
    let Some(first) = intensities.next() else { return };
    let l_first = linlog(first, cfg.linlog_knee);
    let mut l_prev = l_first;
    // The reference is kept as the initial level plus whole thresholds so it
    // never drifts: returning to the initial intensity cancels exactly.
    let (mut n_on, mut n_off) = (0u64, 0u64);
    for (j, intensity) in intensities.enumerate() {
        let l_new = linlog(intensity, cfg.linlog_knee);
        let offset = F::from_u64_lossy(n_on) * cfg.theta_pos - F::from_u64_lossy(n_off) * cfg.theta_neg;
        let l_ref = l_first + offset;
        let delta = (l_new - l_first) - offset;
        let (theta, polarity, sign) = if delta >= F::zero() {
            (cfg.theta_pos, Polarity::On, F::one())
        } else {
            (cfg.theta_neg, Polarity::Off, -F::one())
        };
        let mut k = (delta.abs() / theta).floor().to_u64().unwrap_or(0);
        if let Some(cap) = cfg.max_events_per_pixel_per_interval {
            k = k.min(u64::from(cap));
        }
        if k > 0 {
            let (ta, tb) = (frame_times[j], frame_times[j + 1]);
            let span = l_new - l_prev;
            for i in 1..=k {
                let level = l_ref + F::from_u64_lossy(i) * theta * sign;
                let frac = if span == F::zero() {
                    F::zero()
                } else {
                    ((level - l_prev) / span).max(F::zero()).min(F::one())
                };
                out.push((round_half_up(ta + frac.to_f64_lossy() * (tb - ta)), polarity));
            }
            match polarity {
                Polarity::On => n_on += k,
                Polarity::Off => n_off += k,
            }
        }
        l_prev = l_new;
    }
}

/// Converts a frame sequence into a canonical event stream covering
/// `[0, (frames - 1) / fps]` microseconds.
pub fn simulate<F: Scalar>(frames: &FrameSequence<F>, cfg: &SimulatorConfig<F>) -> Result<EventStream> {
    cfg.validate()?;
    if frames.len() < 2 {
        return Err(Error::InvalidConfig("simulation needs at least two frames".into()));
    }
    let (w, h) = (frames.width as usize, frames.height as usize);
    let frame_times: Vec<f64> = (0..frames.len()).map(|i| frames.frame_time_us(i)).collect();
    let rows: Vec<Vec<Event>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::new();
            let mut pixel = Vec::new();
            for x in 0..w {
                pixel.clear();
                let idx = y * w + x;
                simulate_pixel(frames.frames.iter().map(|f| f[idx]), &frame_times, cfg, &mut pixel);
                row.extend(pixel.iter().map(|&(t, p)| Event::new(t, x as u16, y as u16, p)));
            }
            row
        })
        .collect();
    let events: Vec<Event> = rows.into_iter().flatten().collect();
    let header = StreamHeader::new(frames.width, frames.height, 0, frames.end_time_us());
    canonicalize(header, events)
}
