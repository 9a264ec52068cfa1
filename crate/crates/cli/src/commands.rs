use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use evdet::annotations::{self, align, eval_images, FrameClock, Parsed};
use evdet::deteval::evaluate;
use evdet::events::{write_events, StreamHeader};
use evdet::pnm::{encode_pgm, GrayImage};
use evdet::reconstruction::{encode_state, reconstruct as run_reconstruction};
use evdet::representations::{build_ecm, encode_raw, BinGrid, EcmMode, Normalization};
use evdet::simulator::{read_frame_dir, simulate as run_simulation};
use evdet::{EvalConfig, ReconConfig, SimulatorConfig, ToneMap};

use crate::config::FileConfig;
use crate::error::{invalid, CliError, CliResult};
use crate::output::{output_format, read_events_auto, write_dir, write_file};
use crate::{EcmArgs, EvalArgs, ReconstructArgs, SimulateArgs, StatsArgs};


/// Writes to stdout, treating a closed pipe (`evdet stats f | head`) as success.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

macro_rules! say {
    ($($arg:tt)*) => {
        emit(&format!("{}\n", format_args!($($arg)*)))
    };
}

fn check_fps(fps: f64) -> CliResult<f64> {
    if fps > 0.0 && fps.is_finite() {
        Ok(fps)
    } else {
        Err(invalid(format!("--fps must be positive, got {fps}")))
    }
}

fn frame_period_us(fps: f64) -> u64 {
    (1e6 / fps).round().max(1.0) as u64
}

pub fn simulate(a: &SimulateArgs, file: &FileConfig) -> CliResult<()> {
    let s = &file.simulate;
    let fps = check_fps(a.fps.or(s.fps).ok_or_else(|| invalid("--fps is required"))?)?;
    let defaults = SimulatorConfig::default();
    let cfg = SimulatorConfig {
        theta_pos: a.theta_pos.or(s.theta_pos).unwrap_or(defaults.theta_pos),
        theta_neg: a.theta_neg.or(s.theta_neg).unwrap_or(defaults.theta_neg),
        linlog_knee: a.knee.or(s.knee).unwrap_or(defaults.linlog_knee),
        max_events_per_pixel_per_interval: a.max_events.or(s.max_events),
    };
    cfg.validate()?;
    if cfg.max_events_per_pixel_per_interval == Some(0) {
        return Err(invalid("--max-events must be at least 1"));
    }
    let format = output_format(&a.out, a.format)?;
    if !a.frames.is_dir() {
        return Err(CliError::Io(format!("{}: not a readable directory", a.frames.display())));
    }
    let frames = read_frame_dir::<f64>(&a.frames, fps)?;
    let stream = run_simulation(&frames, &cfg)?;
    write_events(&stream, &a.out, format)?;
    say!(
        "frames: {}\nwidth: {}\nheight: {}\nduration_us: {}\nevents: {}",
        frames.len(),
        stream.width(),
        stream.height(),
        stream.duration(),
        stream.len()
    );
    Ok(())
}

pub fn ecm(a: &EcmArgs, file: &FileConfig) -> CliResult<()> {
    let s = &file.ecm;
    let window = match a.window_us.or(s.window_us) {
        Some(w) => w,
        None => match a.fps.or(s.fps) {
            Some(fps) => frame_period_us(check_fps(fps)?),
            None => return Err(invalid("--window-us or --fps is required")),
        },
    };
    if window == 0 {
        return Err(invalid("--window-us must be positive"));
    }
    let mode: EcmMode = a.mode.clone().or(s.mode.clone()).map_or(Ok(EcmMode::default()), |m| m.parse()).map_err(invalid)?;
    let norm: Normalization = a
        .norm
        .clone()
        .or(s.norm.clone())
        .map_or(Ok(Normalization::default()), |m| m.parse())
        .map_err(invalid)?;
    let stream = read_events_auto(&a.events, a.format)?;
    let seq = build_ecm(&stream, window, mode, norm)?;

    let mut files = Vec::new();
    let suffixes: &[&str] = if mode == EcmMode::TwoChannel { &["_on", "_off"] } else { &[""] };
    for bin in &seq.bins {
        for (c, suffix) in suffixes.iter().enumerate() {
            let img = GrayImage::new(bin.width, bin.height, bin.gray_channel(c).to_vec())?;
            files.push((format!("ecm_{:06}{suffix}.pgm", bin.bin_index), encode_pgm(&img)));
            if a.dump_raw {
                files.push((format!("ecm_{:06}{suffix}.raw", bin.bin_index), encode_raw(bin, c)));
            }
        }
    }
    write_dir(&a.out, &files)?;

    say!("window_us: {window}\nbins: {}", seq.len());
    for bin in &seq.bins {
        say!(
            "bin {} [{}, {}){} events={}",
            bin.bin_index,
            bin.t0,
            bin.t1,
            if bin.partial { " partial" } else { "" },
            bin.event_count
        );
    }
    let total: usize = seq.bins.iter().map(|b| b.event_count).sum();
    say!("total_events: {total}");
    Ok(())
}

pub fn reconstruct(a: &ReconstructArgs, file: &FileConfig) -> CliResult<()> {
    let s = &file.reconstruct;
    let defaults = ReconConfig::default();
    let tone_kind = a.tone_map.clone().or(s.tone_map.clone()).unwrap_or_else(|| "percentile".into());
    let lo = a.tone_lo.or(s.tone_lo);
    let hi = a.tone_hi.or(s.tone_hi);
    let tone_map = match tone_kind.as_str() {
        "percentile" => ToneMap::Percentile {
            lo: lo.unwrap_or(0.01),
            hi: hi.unwrap_or(0.99),
        },
        "fixed" => ToneMap::Fixed {
            min: lo.ok_or_else(|| invalid("--tone-map fixed needs --tone-lo"))?,
            max: hi.ok_or_else(|| invalid("--tone-map fixed needs --tone-hi"))?,
        },
        other => return Err(invalid(format!("unknown tone map `{other}` (percentile, fixed)"))),
    };
    let cfg = ReconConfig {
        alpha: a.alpha.or(s.alpha).unwrap_or(defaults.alpha),
        contrast: a.contrast.or(s.contrast).unwrap_or(defaults.contrast),
        sample_period: a.sample_period_us.or(s.sample_period_us).unwrap_or(defaults.sample_period),
        tone_map,
    };
    cfg.validate()?;
    let stream = read_events_auto(&a.events, a.format)?;
    let frames = run_reconstruction(&stream, &cfg)?;
    let mut files = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        let img = GrayImage::new(f.width, f.height, f.gray.clone())?;
        files.push((format!("recon_{i:06}.pgm"), encode_pgm(&img)));
        if a.dump_state {
            files.push((format!("recon_{i:06}.raw"), encode_state(f)));
        }
    }
    write_dir(&a.out, &files)?;
    say!("frames: {}", frames.len());
    for (i, f) in frames.iter().enumerate() {
        say!("frame {i} t={}", f.t);
    }
    Ok(())
}

fn report_rejected<T>(what: &Path, parsed: &Parsed<T>) {
    for r in &parsed.rejected {
        eprintln!("evdet: warning: {}: row {}: {}", what.display(), r.row, r.error);
    }
}

pub fn eval(a: &EvalArgs, file: &FileConfig) -> CliResult<()> {
    let s = &file.eval;
    let fps = check_fps(a.fps.or(s.fps).ok_or_else(|| invalid("--fps is required"))?)?;
    let window = a.window_us.or(s.window_us).unwrap_or_else(|| frame_period_us(fps));
    if window == 0 {
        return Err(invalid("--window-us must be positive"));
    }
    let clock = FrameClock::new(fps)?;
    let gts = annotations::read_annotations::<f64>(&a.gt)?;
    let dets = annotations::read_detections::<f64>(&a.det)?;
    report_rejected(&a.gt, &gts);
    report_rejected(&a.det, &dets);

    let header = match &a.events {
        Some(path) => read_events_auto(path, None)?.header(),
        None => {
            let frames: BTreeSet<u32> = gts.by_frame.keys().chain(dets.by_frame.keys()).copied().collect();
            let last = frames.last().map_or(0, |f| clock.time_us(*f));
            StreamHeader::new(
                a.width.or(s.width).unwrap_or(u32::MAX),
                a.height.or(s.height).unwrap_or(u32::MAX),
                0,
                last + window,
            )
        }
    };
    let grid = BinGrid::new(header, window)?;
    let g = align(&gts.by_frame, &clock, &grid)?;
    let d = align(&dets.by_frame, &clock, &grid)?;
    for (what, frames) in [("ground truth", &g.out_of_range_frames), ("detections", &d.out_of_range_frames)] {
        if !frames.is_empty() {
            eprintln!("evdet: warning: {what} frames outside the stream window: {frames:?}");
        }
    }
    if g.clipped_away + d.clipped_away > 0 {
        eprintln!(
            "evdet: warning: dropped {} boxes lying outside the image",
            g.clipped_away + d.clipped_away
        );
    }
    let report = evaluate(&eval_images(g, d), &EvalConfig::default())?;
    for w in &report.warnings {
        eprintln!("evdet: warning: {w}");
    }
    write_file(&a.report, report.to_json().as_bytes())?;
    let table = report.to_table();
    if let Some(path) = &a.table {
        write_file(path, table.as_bytes())?;
    }
    emit(&table);
    Ok(())
}

pub fn stats(a: &StatsArgs) -> CliResult<()> {
    let stream = read_events_auto(&a.events, a.format)?;
    let (pos, neg) = stream.polarity_counts();
    let rate = if stream.duration() == 0 {
        0.0
    } else {
        stream.len() as f64 / (stream.duration() as f64 * 1e-6)
    };
    say!("width: {}", stream.width());
    say!("height: {}", stream.height());
    say!("t_start: {}", stream.t_start());
    say!("t_end: {}", stream.t_end());
    say!("duration_us: {}", stream.duration());
    say!("events: {}", stream.len());
    say!("events_per_second: {rate:.3}");
    say!("positive: {pos}");
    say!("negative: {neg}");
    Ok(())
}
