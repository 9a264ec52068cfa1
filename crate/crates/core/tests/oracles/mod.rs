//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the code path it checks.

#![allow(dead_code)]

use evdet::events::{Event, Polarity};
use rand::Rng;

/// Insertion sort on the `(t, y, x, p)` key, then duplicate removal.
pub fn naive_sort(mut events: Vec<Event>) -> Vec<Event> {
    let key = |e: &Event| (e.t, e.y, e.x, if e.p == Polarity::Off { 0 } else { 1 });
    for i in 1..events.len() {
        let mut j = i;
        while j > 0 && key(&events[j - 1]) > key(&events[j]) {
            events.swap(j - 1, j);
            j -= 1;
        }
    }
    let mut out: Vec<Event> = Vec::with_capacity(events.len());
    for e in events {
        if out.last() != Some(&e) {
            out.push(e);
        }
    }
    out
}

pub fn linear_scan_slice(events: &[Event], t0: u64, t1: u64) -> Vec<Event> {
    events.iter().copied().filter(|e| e.t >= t0 && e.t < t1).collect()
}

pub fn random_events<R: Rng>(rng: &mut R, n: usize, w: u16, h: u16, t_max: u64) -> Vec<Event> {
    (0..n)
        .map(|_| Event {
            t: rng.gen_range(0..=t_max),
            x: rng.gen_range(0..w),
            y: rng.gen_range(0..h),
            p: if rng.gen_bool(0.5) { Polarity::On } else { Polarity::Off },
        })
        .collect()
}

fn ref_linlog(v: f64, knee: f64) -> f64 {
    if v >= knee {
        v.ln()
    } else {
        v / knee * knee.ln()
    }
}

/// Pixel-by-pixel simulator written as a crossing loop: the reference
/// level steps one threshold at a time while the new log intensity is at
/// least a threshold away from it.
pub fn reference_pixel_events(
    intensities: &[f64],
    fps: f64,
    theta_pos: f64,
    theta_neg: f64,
    knee: f64,
) -> Vec<(u64, i8)> {
    let mut out = Vec::new();
    let mut prev = ref_linlog(intensities[0], knee);
    let mut reference = prev;
    for j in 1..intensities.len() {
        let cur = ref_linlog(intensities[j], knee);
        let t_a = (j - 1) as f64 * 1e6 / fps;
        let t_b = j as f64 * 1e6 / fps;
        let at = |level: f64| -> u64 {
            let frac = ((level - prev) / (cur - prev)).clamp(0.0, 1.0);
            (t_a + frac * (t_b - t_a) + 0.5).floor() as u64
        };
        // count crossings with a tolerance-free comparison on whole steps
        let up = ((cur - reference) / theta_pos).floor();
        let down = ((reference - cur) / theta_neg).floor();
        if up >= 1.0 {
            for i in 1..=(up as u64) {
                out.push((at(reference + i as f64 * theta_pos), 1));
            }
            reference += up * theta_pos;
        } else if down >= 1.0 {
            for i in 1..=(down as u64) {
                out.push((at(reference - i as f64 * theta_neg), -1));
            }
            reference -= down * theta_neg;
        }
        prev = cur;
    }
    out
}

/// ECM raw maps by testing every (event, bin) pair for membership.
/// `mode`: 0 signed, 1 count.
pub fn ecm_bruteforce(
    events: &[Event],
    width: usize,
    height: usize,
    t_start: u64,
    t_end: u64,
    window: u64,
    n: usize,
    mode: u8,
) -> Vec<Vec<i64>> {
    let mut maps = vec![vec![0i64; width * height]; n];
    for e in events {
        for (i, map) in maps.iter_mut().enumerate() {
            let lo = t_start + i as u64 * window;
            let hi = lo + window;
            let inside = (e.t >= lo && e.t < hi) || (i == n - 1 && e.t >= lo && e.t <= t_end);
            if inside {
                let v = if mode == 0 {
                    if e.p == Polarity::On { 1 } else { -1 }
                } else {
                    1
                };
                map[e.y as usize * width + e.x as usize] += v;
            }
        }
    }
    maps
}

/// Leaky integrator state at `s` as a superposition of decayed impulses.
pub fn superposed_state(events: &[(u64, i8)], s: u64, alpha: f64, c: f64) -> f64 {
    events
        .iter()
        .filter(|(t, _)| *t <= s)
        .map(|(t, p)| f64::from(*p) * c * (-alpha * (s - t) as f64 * 1e-6).exp())
        .sum()
}

/// IoU of integer boxes `(left, top, w, h)` by counting covered unit cells.
pub fn raster_iou(a: (i32, i32, i32, i32), b: (i32, i32, i32, i32)) -> f64 {
    let lo_x = a.0.min(b.0);
    let hi_x = (a.0 + a.2).max(b.0 + b.2);
    let lo_y = a.1.min(b.1);
    let hi_y = (a.1 + a.3).max(b.1 + b.3);
    let inside = |r: (i32, i32, i32, i32), x: i32, y: i32| x >= r.0 && x < r.0 + r.2 && y >= r.1 && y < r.1 + r.3;
    let (mut inter, mut union) = (0u64, 0u64);
    for y in lo_y..hi_y {
        for x in lo_x..hi_x {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            if ia && ib {
                inter += 1;
            }
            if ia || ib {
                union += 1;
            }
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Enumerates every partial injective assignment of detections to ground
/// truths and keeps those consistent with greedy matching: in descending
/// score order (input order on ties) each detection holds the
/// highest-IoU (lowest index on ties) still-free gt with IoU >= thr, or
/// none if no such gt exists. Returns the labels of the unique survivor,
/// `Some(gt)` or `None` per detection.
pub fn exhaustive_greedy_labels(scores: &[f64], ious: &[Vec<f64>], thr: f64) -> Vec<Option<usize>> {
    let nd = scores.len();
    let ng = if nd == 0 { 0 } else { ious[0].len() };
    let mut order: Vec<usize> = (0..nd).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut survivors = Vec::new();
    let mut assign = vec![None; nd];
    fn rec(
        d: usize,
        nd: usize,
        ng: usize,
        assign: &mut Vec<Option<usize>>,
        survivors: &mut Vec<Vec<Option<usize>>>,
    ) {
        if d == nd {
            survivors.push(assign.clone());
            return;
        }
        assign[d] = None;
        rec(d + 1, nd, ng, assign, survivors);
        for g in 0..ng {
            if assign[..d].contains(&Some(g)) {
                continue;
            }
            assign[d] = Some(g);
            rec(d + 1, nd, ng, assign, survivors);
        }
        assign[d] = None;
    }
    let mut all = Vec::new();
    rec(0, nd, ng, &mut assign, &mut all);
    for cand in all {
        let mut taken = vec![false; ng];
        let mut ok = true;
        for &d in &order {
            let mut best: Option<usize> = None;
            for g in 0..ng {
                if taken[g] || ious[d][g] < thr {
                    continue;
                }
                best = match best {
                    Some(b) if ious[d][b] >= ious[d][g] => Some(b),
                    _ => Some(g),
                };
            }
            if cand[d] != best {
                ok = false;
                break;
            }
            if let Some(g) = best {
                taken[g] = true;
            }
        }
        if ok {
            survivors.push(cand);
        }
    }
    assert_eq!(survivors.len(), 1, "greedy matching must be unique");
    survivors.pop().unwrap()
}

/// Exact area under the monotone precision envelope over recall in [0, 1].
pub fn continuous_ap(tp_sorted: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut pts = Vec::new();
    let (mut tp, mut n) = (0usize, 0usize);
    for &is_tp in tp_sorted {
        n += 1;
        if is_tp {
            tp += 1;
        }
        pts.push((tp as f64 / num_gt as f64, tp as f64 / n as f64));
    }
    let mut breaks: Vec<f64> = pts.iter().map(|p| p.0).collect();
    breaks.push(0.0);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let mut area = 0.0;
    for w in breaks.windows(2) {
        let env = pts
            .iter()
            .filter(|p| p.0 >= w[1])
            .map(|p| p.1)
            .fold(0.0, f64::max);
        area += (w[1] - w[0]) * env;
    }
    area
}

/// Square of side `size` moving right by `speed` pixels per frame on a
/// uniform background. Returns frames and the square's left edge per frame.
pub fn moving_square(
    width: u32,
    height: u32,
    frames: usize,
    size: u32,
    speed: u32,
    x0: u32,
    y0: u32,
    bg: u8,
    fg: u8,
) -> (Vec<Vec<u8>>, Vec<u32>) {
    let mut out = Vec::with_capacity(frames);
    let mut lefts = Vec::with_capacity(frames);
    for k in 0..frames {
        let left = x0 + k as u32 * speed;
        let mut f = vec![bg; (width * height) as usize];
        for y in y0..(y0 + size).min(height) {
            for x in left..(left + size).min(width) {
                f[(y * width + x) as usize] = fg;
            }
        }
        out.push(f);
        lefts.push(left);
    }
    (out, lefts)
}

/// Thresholds `gray >= level` and returns the bounding boxes of 4-connected
/// components as `(left, top, w, h, score)`, score = mean gray / 255.
pub fn blob_detector(gray: &[u8], width: usize, height: usize, level: u8, min_area: usize) -> Vec<(f64, f64, f64, f64, f64)> {
    let mut seen = vec![false; gray.len()];
    let mut out = Vec::new();
    for start in 0..gray.len() {
        if seen[start] || gray[start] < level {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let (mut count, mut sum) = (0usize, 0u64);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % width, i / width);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            count += 1;
            sum += u64::from(gray[i]);
            let mut push = |j: usize| {
                if !seen[j] && gray[j] >= level {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < width {
                push(i + 1);
            }
            if y > 0 {
                push(i - width);
            }
            if y + 1 < height {
                push(i + width);
            }
        }
        if count >= min_area {
            out.push((
                x0 as f64,
                y0 as f64,
                (x1 - x0 + 1) as f64,
                (y1 - y0 + 1) as f64,
                (sum as f64 / count as f64 / 255.0).min(1.0),
            ));
        }
    }
    out
}
