//! VisDrone-VID ground truth, detector dumps, and their alignment to
//! event-time bins.
//!
//! Ground truth rows: `frame,target_id,left,top,width,height,score,category,truncation,occlusion`.
//! Rows with category 0 (ignored region) or score 0 become ignore regions.
//!
//! Detection rows: `frame,left,top,width,height,score,category`.
//!
//! Lines starting with `#` are comments in both formats.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::deteval::{BBox, EvalImage};
use crate::error::{Error, Result};
use crate::events::Timestamp;
use crate::representations::BinGrid;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruthBox<F> {
    pub frame_index: u32,
    pub track_id: i64,
    pub bbox: BBox<F>,
    pub category: u32,
    pub ignore: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection<F> {
    pub frame_index: u32,
    pub bbox: BBox<F>,
    pub category: u32,
    pub score: F,
}

/// A row that could not be used, with its 1-based line number.
#[derive(Debug)]
pub struct RowError {
    pub row: usize,
    pub error: Error,
}

/// Boxes grouped by frame plus the rows that were rejected.
#[derive(Debug)]
pub struct Parsed<T> {
    pub by_frame: BTreeMap<u32, Vec<T>>,
    pub rejected: Vec<RowError>,
}

impl<T> Parsed<T> {
    pub fn box_count(&self) -> usize {
        self.by_frame.values().map(Vec::len).sum()
    }
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, row: usize, name: &str) -> Result<T> {
    let raw = rec.get(i).ok_or_else(|| Error::parse(row, format!("missing field `{name}`")))?;
    raw.parse()
        .map_err(|_| Error::parse(row, format!("invalid {name} `{raw}`")))
}

/// Number of leading fields, ignoring trailing empty ones (`1,2,3,`).
fn used_len(rec: &csv::StringRecord) -> usize {
    let mut n = rec.len();
    while n > 0 && rec.get(n - 1) == Some("") {
        n -= 1;
    }
    n
}

fn parse_rows<R: Read, T>(
    reader: R,
    mut parse: impl FnMut(&csv::StringRecord, usize) -> Result<T>,
    frame_of: impl Fn(&T) -> u32,
) -> Result<Parsed<T>> {
    let mut by_frame: BTreeMap<u32, Vec<T>> = BTreeMap::new();
    let mut rejected = Vec::new();
    for rec in csv_reader(reader).records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let row = e.position().map_or(0, |p| p.line() as usize);
                if let csv::ErrorKind::Io(_) = e.kind() {
                    return Err(Error::Io(std::io::Error::other(e.to_string())));
                }
                rejected.push(RowError {
                    row,
                    error: Error::parse(row, e.to_string()),
                });
                continue;
            }
        };
        let row = rec.position().map_or(0, |p| p.line() as usize);
        if used_len(&rec) == 0 {
            continue;
        }
        match parse(&rec, row) {
            Ok(item) => by_frame.entry(frame_of(&item)).or_default().push(item),
            Err(error) => rejected.push(RowError { row, error }),
        }
    }
    Ok(Parsed { by_frame, rejected })
}

fn parse_gt_row<F: Scalar>(rec: &csv::StringRecord, row: usize) -> Result<GroundTruthBox<F>> {
    let n = used_len(rec);
    if !(8..=10).contains(&n) {
        return Err(Error::parse(row, format!("expected 10 fields, found {n}")));
    }
    let frame_index = field(rec, 0, row, "frame")?;
    let track_id = field(rec, 1, row, "target_id")?;
    let left: f64 = field(rec, 2, row, "left")?;
    let top: f64 = field(rec, 3, row, "top")?;
    let width: f64 = field(rec, 4, row, "width")?;
    let height: f64 = field(rec, 5, row, "height")?;
    let score: f64 = field(rec, 6, row, "score")?;
    let category: u32 = field(rec, 7, row, "category")?;
    for i in 8..n {
        field::<i64>(rec, i, row, "truncation/occlusion")?;
    }
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::NonPositiveBox { row });
    }
    Ok(GroundTruthBox {
        frame_index,
        track_id,
        bbox: BBox::new(F::lit(left), F::lit(top), F::lit(width), F::lit(height)),
        category,
        ignore: category == 0 || score == 0.0,
    })
}

fn parse_det_row<F: Scalar>(rec: &csv::StringRecord, row: usize) -> Result<Detection<F>> {
    let n = used_len(rec);
    if n != 7 {
        return Err(Error::parse(row, format!("expected 7 fields, found {n}")));
    }
    let frame_index = field(rec, 0, row, "frame")?;
    let left: f64 = field(rec, 1, row, "left")?;
    let top: f64 = field(rec, 2, row, "top")?;
    let width: f64 = field(rec, 3, row, "width")?;
    let height: f64 = field(rec, 4, row, "height")?;
    let score: f64 = field(rec, 5, row, "score")?;
    let category = field(rec, 6, row, "category")?;
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::parse(row, format!("score {score} outside [0, 1]")));
    }
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::NonPositiveBox { row });
    }
    Ok(Detection {
        frame_index,
        bbox: BBox::new(F::lit(left), F::lit(top), F::lit(width), F::lit(height)),
        category,
        score: F::lit(score),
    })
}

pub fn parse_annotations<F: Scalar, R: Read>(reader: R) -> Result<Parsed<GroundTruthBox<F>>> {
    parse_rows(reader, parse_gt_row, |g| g.frame_index)
}

pub fn read_annotations<F: Scalar>(path: &Path) -> Result<Parsed<GroundTruthBox<F>>> {
    parse_annotations(std::fs::File::open(path)?)
}

pub fn parse_detections<F: Scalar, R: Read>(reader: R) -> Result<Parsed<Detection<F>>> {
    parse_rows(reader, parse_det_row, |d| d.frame_index)
}

pub fn read_detections<F: Scalar>(path: &Path) -> Result<Parsed<Detection<F>>> {
    parse_detections(std::fs::File::open(path)?)
}

/// Writes detections in the CSV layout read by [`parse_detections`].
pub fn format_detections<F: Scalar>(dets: &[Detection<F>]) -> String {
    let mut out = String::new();
    for d in dets {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            d.frame_index, d.bbox.left, d.bbox.top, d.bbox.width, d.bbox.height, d.score, d.category
        ));
    }
    out
}

/// Clips a box to `[0, width] x [0, height]`; `None` if nothing remains.
pub fn clip_box<F: Scalar>(b: &BBox<F>, width: u32, height: u32) -> Option<BBox<F>> {
    let (w, h) = (F::from_u32(width).unwrap(), F::from_u32(height).unwrap());
    let l = b.left.max(F::zero());
    let t = b.top.max(F::zero());
    let r = b.right().min(w);
    let btm = b.bottom().min(h);
    (r > l && btm > t).then(|| BBox::new(l, t, r - l, btm - t))
}

/// Maps frame indices to event time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameClock {
    fps: f64,
}

impl FrameClock {
    pub fn new(fps: f64) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::DegenerateFps(fps));
        }
        Ok(FrameClock { fps })
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    /// `round(frame * 1e6 / fps)` microseconds.
    pub fn time_us(&self, frame: u32) -> Timestamp {
        (f64::from(frame) * 1e6 / self.fps + 0.5).floor() as Timestamp
    }
}

/// Boxes that can be attached to event-time bins.
pub trait FrameBox<F>: Clone {
    fn frame_index(&self) -> u32;
    fn bbox_mut(&mut self) -> &mut BBox<F>;
    /// Identity used to collapse repeated objects within one bin.
    fn track_key(&self) -> Option<i64>;
    /// Total order on content, for input-order independence.
    fn content_cmp(&self, other: &Self) -> Ordering;
}

fn cmp_box<F: Scalar>(a: &BBox<F>, b: &BBox<F>) -> Ordering {
    let key = |b: &BBox<F>| [b.left, b.top, b.width, b.height].map(|v| v.to_f64_lossy());
    let (ka, kb) = (key(a), key(b));
    ka.iter()
        .zip(kb.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

impl<F: Scalar> FrameBox<F> for GroundTruthBox<F> {
    fn frame_index(&self) -> u32 {
        self.frame_index
    }

    fn bbox_mut(&mut self) -> &mut BBox<F> {
        &mut self.bbox
    }

    fn track_key(&self) -> Option<i64> {
        (!self.ignore).then_some(self.track_id)
    }

    fn content_cmp(&self, other: &Self) -> Ordering {
        (self.frame_index, self.track_id, self.category, self.ignore)
            .cmp(&(other.frame_index, other.track_id, other.category, other.ignore))
            .then_with(|| cmp_box(&self.bbox, &other.bbox))
    }
}

impl<F: Scalar> FrameBox<F> for Detection<F> {
    fn frame_index(&self) -> u32 {
        self.frame_index
    }

    fn bbox_mut(&mut self) -> &mut BBox<F> {
        &mut self.bbox
    }

    fn track_key(&self) -> Option<i64> {
        None
    }

    fn content_cmp(&self, other: &Self) -> Ordering {
        (self.frame_index, self.category)
            .cmp(&(other.frame_index, other.category))
            .then_with(|| other.score.to_f64_lossy().total_cmp(&self.score.to_f64_lossy()))
            .then_with(|| cmp_box(&self.bbox, &other.bbox))
    }
}

/// Boxes grouped per bin, with bookkeeping for everything not attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Aligned<T> {
    pub bins: Vec<Vec<T>>,
    /// Frames whose instant falls outside the stream window.
    pub out_of_range_frames: Vec<u32>,
    pub out_of_range_boxes: usize,
    /// Boxes replaced by a later frame's box of the same track in one bin.
    pub deduplicated: usize,
    /// Boxes lying entirely outside the image.
    pub clipped_away: usize,
}

impl<T> Aligned<T> {
    pub fn box_count(&self) -> usize {
        self.bins.iter().map(Vec::len).sum()
    }
}

/// Attaches each frame's boxes to the bin whose window contains the frame
/// instant (half-open, the last bin also owning `t_end`).
pub fn align<F: Scalar, T: FrameBox<F>>(
    by_frame: &BTreeMap<u32, Vec<T>>,
    clock: &FrameClock,
    grid: &BinGrid,
) -> Result<Aligned<T>> {
    let mut out = Aligned {
        bins: vec![Vec::new(); grid.n],
        out_of_range_frames: Vec::new(),
        out_of_range_boxes: 0,
        deduplicated: 0,
        clipped_away: 0,
    };
    let mut track_slot: Vec<HashMap<i64, usize>> = vec![HashMap::new(); grid.n];
    for (&frame, boxes) in by_frame {
        let t = clock.time_us(frame);
        let Some(bin) = grid.bin_of(t) else {
            if t > grid.t_end.saturating_add(grid.window) {
                return Err(Error::FpsMismatch {
                    frame,
                    t,
                    t_end: grid.t_end,
                });
            }
            out.out_of_range_frames.push(frame);
            out.out_of_range_boxes += boxes.len();
            continue;
        };
        let mut sorted: Vec<T> = boxes.clone();
        sorted.sort_by(|a, b| a.content_cmp(b));
        for mut b in sorted {
            match clip_box(b.bbox_mut(), grid.width, grid.height) {
                Some(c) => *b.bbox_mut() = c,
                None => {
                    out.clipped_away += 1;
                    continue;
                }
            }
            let slot = &mut out.bins[bin];
            match b.track_key() {
                Some(track) => match track_slot[bin].get(&track) {
                    Some(&i) => {
                        slot[i] = b;
                        out.deduplicated += 1;
                    }
                    None => {
                        track_slot[bin].insert(track, slot.len());
                        slot.push(b);
                    }
                },
                None => slot.push(b),
            }
        }
    }
    for bin in &mut out.bins {
        bin.sort_by(|a, b| a.content_cmp(b));
    }
    Ok(out)
}

/// Pairs aligned ground truth and detections bin by bin.
pub fn eval_images<F: Scalar>(
    gts: Aligned<GroundTruthBox<F>>,
    dets: Aligned<Detection<F>>,
) -> Vec<EvalImage<F>> {
    gts.bins
        .into_iter()
        .zip(dets.bins)
        .map(|(gts, dets)| EvalImage { gts, dets })
        .collect()
}
