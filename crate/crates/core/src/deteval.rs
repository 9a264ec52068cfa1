//! Detection metrics: IoU, greedy matching and COCO-style average precision.
//!
//! Conventions follow the COCO evaluator: detections are matched greedily in
//! descending score order to the unmatched ground truth of highest IoU,
//! precision is made monotone (envelope) and sampled at the 101 recall
//! points `0, 0.01, ..., 1`. AP50 uses IoU 0.5 and mAP averages over the
//! IoU grid `0.50:0.05:0.95`. Classes without ground truth are excluded
//! from the class means.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::annotations::{Detection, GroundTruthBox};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Axis-aligned box as `(left, top, width, height)` in continuous pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BBox<F> {
    pub left: F,
    pub top: F,
    pub width: F,
    pub height: F,
}

impl<F: Scalar> BBox<F> {
    pub fn new(left: F, top: F, width: F, height: F) -> Self {
        BBox {
            left,
            top,
            width,
            height,
        }
    }

    pub fn right(&self) -> F {
        self.left + self.width
    }

    pub fn bottom(&self) -> F {
        self.top + self.height
    }

    pub fn area(&self) -> F {
        self.width * self.height
    }

    pub fn is_valid(&self) -> bool {
        self.width > F::zero() && self.height > F::zero()
    }

    pub fn scaled(&self, s: F) -> Self {
        BBox::new(self.left * s, self.top * s, self.width * s, self.height * s)
    }

    pub fn intersection_area(&self, other: &Self) -> F {
        let iw = self.right().min(other.right()) - self.left.max(other.left);
        let ih = self.bottom().min(other.bottom()) - self.top.max(other.top);
        if iw <= F::zero() || ih <= F::zero() {
            F::zero()
        } else {
            iw * ih
        }
    }
}

/// Intersection over union of two boxes with positive extent.
pub fn iou<F: Scalar>(a: &BBox<F>, b: &BBox<F>) -> Result<F> {
    if !a.is_valid() || !b.is_valid() {
        return Err(Error::DegenerateBox);
    }
    Ok(iou_unchecked(a, b))
}

/// IoU that reports 0 for degenerate inputs instead of failing.
pub fn iou_unchecked<F: Scalar>(a: &BBox<F>, b: &BBox<F>) -> F {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= F::zero() {
        F::zero()
    } else {
        inter / union
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionOutcome {
    /// True positive, matched to the ground truth at this index.
    Matched(usize),
    /// False positive.
    Unmatched,
    /// Unmatched but overlapping an ignore region; not scored.
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchResult {
    /// Outcome per detection, in input order.
    pub detections: Vec<DetectionOutcome>,
    /// Index of the detection matched to each ground truth, in input order.
    pub ground_truth: Vec<Option<usize>>,
}

impl MatchResult {
    pub fn true_positives(&self) -> usize {
        self.detections
            .iter()
            .filter(|d| matches!(d, DetectionOutcome::Matched(_)))
            .count()
    }

    pub fn false_positives(&self) -> usize {
        self.detections
            .iter()
            .filter(|d| matches!(d, DetectionOutcome::Unmatched))
            .count()
    }
}

/// Detection indices by descending score, input order breaking ties.
pub fn score_order<F: Scalar>(scores: &[F]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    order
}

/// Greedy single-class matching.
///
/// `dets` are `(box, score)` pairs. Each detection, highest score first,
/// takes the unmatched ground truth with the highest IoU `>= iou_thr`
/// (lowest index on ties). Unmatched detections whose IoU with an ignore
/// region exceeds `ignore_iou` are marked ignored.
pub fn match_detections<F: Scalar>(
    dets: &[(BBox<F>, F)],
    gts: &[BBox<F>],
    ignore_regions: &[BBox<F>],
    iou_thr: F,
    ignore_iou: F,
) -> MatchResult {
    let scores: Vec<F> = dets.iter().map(|d| d.1).collect();
    let mut result = MatchResult {
        detections: vec![DetectionOutcome::Unmatched; dets.len()],
        ground_truth: vec![None; gts.len()],
    };
    for d in score_order(&scores) {
        let det = &dets[d].0;
        let mut best: Option<(usize, F)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if result.ground_truth[g].is_some() {
                continue;
            }
            let v = iou_unchecked(det, gt);
            if v >= iou_thr && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        result.detections[d] = match best {
            Some((g, _)) => {
                result.ground_truth[g] = Some(d);
                DetectionOutcome::Matched(g)
            }
            None if ignore_regions.iter().any(|r| iou_unchecked(det, r) > ignore_iou) => {
                DetectionOutcome::Ignored
            }
            None => DetectionOutcome::Unmatched,
        };
    }
    result
}

pub const RECALL_POINTS: usize = 101;

/// Interpolated precision at the 101 recall points for detections already
/// sorted by descending score (`true` = TP).
pub fn interpolated_precision<F: Scalar>(tp_sorted: &[bool], num_gt: usize) -> Vec<F> {
    let mut samples = vec![F::zero(); RECALL_POINTS];
    if num_gt == 0 || tp_sorted.is_empty() {
        return samples;
    }
    let n_gt = F::from_usize_lossy(num_gt);
    let mut recall = Vec::with_capacity(tp_sorted.len());
    let mut precision = Vec::with_capacity(tp_sorted.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &is_tp in tp_sorted {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(F::from_usize_lossy(tp) / n_gt);
        precision.push(F::from_usize_lossy(tp) / F::from_usize_lossy(tp + fp));
    }
    for i in (0..precision.len() - 1).rev() {
        if precision[i + 1] > precision[i] {
            precision[i] = precision[i + 1];
        }
    }
    for (k, sample) in samples.iter_mut().enumerate() {
        let r = F::from_usize_lossy(k) / F::from_usize_lossy(RECALL_POINTS - 1);
        let idx = recall.partition_point(|&v| v < r);
        if idx < precision.len() {
            *sample = precision[idx];
        }
    }
    samples
}

/// 101-point interpolated AP; 0 when there is no ground truth.
pub fn average_precision<F: Scalar>(tp_sorted: &[bool], num_gt: usize) -> F {
    let samples = interpolated_precision::<F>(tp_sorted, num_gt);
    samples.iter().copied().sum::<F>() / F::from_usize_lossy(RECALL_POINTS)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig<F> {
    pub iou_thresholds: Vec<F>,
    /// IoU above which an unmatched detection is absorbed by an ignore region.
    pub ignore_iou: F,
}

impl<F: Scalar> Default for EvalConfig<F> {
    fn default() -> Self {
        EvalConfig {
            iou_thresholds: (0..10).map(|i| F::lit((50 + 5 * i) as f64 / 100.0)).collect(),
            ignore_iou: F::lit(0.5),
        }
    }
}

impl<F: Scalar> EvalConfig<F> {
    fn ap50_index(&self) -> Option<usize> {
        self.iou_thresholds
            .iter()
            .position(|t| (*t - F::lit(0.5)).abs() < F::lit(1e-6))
    }
}

/// Ground truth and detections of one evaluated image (a frame or a bin).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalImage<F> {
    pub gts: Vec<GroundTruthBox<F>>,
    pub dets: Vec<Detection<F>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport<F> {
    pub num_gt: usize,
    pub num_det: usize,
    /// False when the class has no ground truth and is left out of the means.
    pub evaluated: bool,
    /// AP per IoU threshold.
    pub ap: Vec<F>,
    pub ap50: F,
    pub map: F,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport<F> {
    pub iou_thresholds: Vec<F>,
    pub per_class: BTreeMap<u32, ClassReport<F>>,
    pub ap50: F,
    pub map: F,
    /// Interpolated precision at the 101 recall points, IoU 0.5, per class.
    pub pr_curves: BTreeMap<u32, Vec<F>>,
    pub warnings: Vec<String>,
}

fn class_threshold_eval<F: Scalar>(
    images: &[EvalImage<F>],
    class: u32,
    thr: F,
    ignore_iou: F,
) -> (Vec<bool>, usize) {
    let mut scored: Vec<(F, bool)> = Vec::new();
    let mut num_gt = 0usize;
    for img in images {
        let gts: Vec<BBox<F>> = img
            .gts
            .iter()
            .filter(|g| !g.ignore && g.category == class)
            .map(|g| g.bbox)
            .collect();
        let ignore: Vec<BBox<F>> = img.gts.iter().filter(|g| g.ignore).map(|g| g.bbox).collect();
        let dets: Vec<(BBox<F>, F)> = img
            .dets
            .iter()
            .filter(|d| d.category == class)
            .map(|d| (d.bbox, d.score))
            .collect();
        num_gt += gts.len();
        let m = match_detections(&dets, &gts, &ignore, thr, ignore_iou);
        let scores: Vec<F> = dets.iter().map(|d| d.1).collect();
        for d in score_order(&scores) {
            match m.detections[d] {
                DetectionOutcome::Matched(_) => scored.push((dets[d].1, true)),
                DetectionOutcome::Unmatched => scored.push((dets[d].1, false)),
                DetectionOutcome::Ignored => {}
            }
        }
    }
    // stable: equal scores keep image order
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    (scored.into_iter().map(|(_, tp)| tp).collect(), num_gt)
}

pub fn evaluate<F: Scalar>(images: &[EvalImage<F>], cfg: &EvalConfig<F>) -> Result<EvalReport<F>> {
    let ap50_idx = cfg
        .ap50_index()
        .ok_or_else(|| Error::InvalidConfig("IoU thresholds must include 0.5".into()))?;
    let mut classes = BTreeSet::new();
    for img in images {
        classes.extend(img.gts.iter().filter(|g| !g.ignore).map(|g| g.category));
        classes.extend(img.dets.iter().map(|d| d.category));
    }
    let classes: Vec<u32> = classes.into_iter().collect();
    let nthr = cfg.iou_thresholds.len();
    let jobs: Vec<(usize, usize)> = (0..classes.len())
        .flat_map(|c| (0..nthr).map(move |t| (c, t)))
        .collect();
    let results: Vec<(Vec<F>, usize)> = jobs
        .par_iter()
        .map(|&(c, t)| {
            let (tp, num_gt) = class_threshold_eval(images, classes[c], cfg.iou_thresholds[t], cfg.ignore_iou);
            (interpolated_precision::<F>(&tp, num_gt), num_gt)
        })
        .collect();

    let mut per_class = BTreeMap::new();
    let mut pr_curves = BTreeMap::new();
    let mut warnings = Vec::new();
    let (mut sum50, mut sum_map, mut evaluated) = (F::zero(), F::zero(), 0usize);
    let n_points = F::from_usize_lossy(RECALL_POINTS);
    for (ci, &class) in classes.iter().enumerate() {
        let rows = &results[ci * nthr..(ci + 1) * nthr];
        let num_gt = rows[0].1;
        let num_det = images
            .iter()
            .map(|img| img.dets.iter().filter(|d| d.category == class).count())
            .sum();
        let ap: Vec<F> = rows
            .iter()
            .map(|(samples, _)| samples.iter().copied().sum::<F>() / n_points)
            .collect();
        let ap50 = ap[ap50_idx];
        let map = ap.iter().copied().sum::<F>() / F::from_usize_lossy(nthr);
        let is_evaluated = num_gt > 0;
        if is_evaluated {
            sum50 = sum50 + ap50;
            sum_map = sum_map + map;
            evaluated += 1;
            pr_curves.insert(class, rows[ap50_idx].0.clone());
        }
        per_class.insert(
            class,
            ClassReport {
                num_gt,
                num_det,
                evaluated: is_evaluated,
                ap,
                ap50,
                map,
            },
        );
    }
    let (ap50, map) = if evaluated == 0 {
        warnings.push("no ground truth boxes; every metric is reported as 0".to_string());
        (F::zero(), F::zero())
    } else {
        let n = F::from_usize_lossy(evaluated);
        (sum50 / n, sum_map / n)
    };
    Ok(EvalReport {
        iou_thresholds: cfg.iou_thresholds.clone(),
        per_class,
        ap50,
        map,
        pr_curves,
        warnings,
    })
}

impl<F: Scalar> EvalReport<F> {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text table with one row per class and an `all` row.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<10} {:>8} {:>8} {:>7} {:>7}", "Class", "GT", "Det", "mAP", "AP 50").unwrap();
        writeln!(out, "{}", "-".repeat(44)).unwrap();
        for (class, r) in &self.per_class {
            if r.evaluated {
                writeln!(
                    out,
                    "{:<10} {:>8} {:>8} {:>7.3} {:>7.3}",
                    class,
                    r.num_gt,
                    r.num_det,
                    r.map.to_f64_lossy(),
                    r.ap50.to_f64_lossy()
                )
                .unwrap();
            } else {
                writeln!(out, "{:<10} {:>8} {:>8} {:>7} {:>7}", class, r.num_gt, r.num_det, "-", "-").unwrap();
            }
        }
        writeln!(out, "{}", "-".repeat(44)).unwrap();
        let (gt, det) = self
            .per_class
            .values()
            .fold((0, 0), |(g, d), r| (g + r.num_gt, d + r.num_det));
        writeln!(
            out,
            "{:<10} {:>8} {:>8} {:>7.3} {:>7.3}",
            "all",
            gt,
            det,
            self.map.to_f64_lossy(),
            self.ap50.to_f64_lossy()
        )
        .unwrap();
        out
    }
}
