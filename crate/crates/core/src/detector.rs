//! Sparse gesture detection from frame-level probabilities.
//!
//! Probabilities below a threshold are zeroed, then maxima are picked greedily:
//! the highest remaining candidate (earliest frame on ties) is emitted and every
//! candidate closer than the minimum distance is discarded.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{compute_metrics, count_matches, validate_events, EvalCounts, EvalError};
use crate::timeline::{FrameEvent, ProbabilitySeries};

/// Minimum distance between detections, seconds.
pub const DEFAULT_MIN_DISTANCE_S: f64 = 2.0;
pub const DEFAULT_GRID_LO: f64 = 0.5;
pub const DEFAULT_GRID_HI: f64 = 1.0;
pub const DEFAULT_GRID_STEP: f64 = 0.001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("threshold must lie in [0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("minimum distance must be positive, got {0} s")]
    InvalidMinDistance(f64),
    #[error("invalid grid: lo {lo}, hi {hi}, step {step}")]
    InvalidGrid { lo: f64, hi: f64, step: f64 },
    #[error("detection frames must be strictly ascending (position {0})")]
    Unordered(usize),
    #[error("frame rate must be positive, got {0}")]
    InvalidFps(f64),
    #[error("no sessions to tune on")]
    NoSessions,
    #[error("no ground-truth events in any session; F1 is undefined")]
    NoGroundTruth,
    #[error("session {session}: {source}")]
    Events {
        session: usize,
        #[source]
        source: EvalError,
    },
}

pub type Result<T> = std::result::Result<T, DetectorError>;

/// Detected gesture frames (absolute indices, strictly ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionList {
    frames: Vec<u64>,
    fps: f64,
}

impl DetectionList {
    pub fn new(frames: Vec<u64>, fps: f64) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(DetectorError::InvalidFps(fps));
        }
        if let Some(pos) = frames.windows(2).position(|w| w[1] <= w[0]) {
            return Err(DetectorError::Unordered(pos + 1));
        }
        Ok(DetectionList { frames, fps })
    }

    pub fn frames(&self) -> &[u64] {
        &self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Detection times in seconds.
    pub fn times_s(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().map(move |&f| f as f64 / self.fps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub threshold: f64,
    pub min_distance_s: f64,
}

impl DetectorConfig {
    pub fn new(threshold: f64, min_distance_s: f64) -> Result<Self> {
        check_threshold(threshold)?;
        if !(min_distance_s.is_finite() && min_distance_s > 0.0) {
            return Err(DetectorError::InvalidMinDistance(min_distance_s));
        }
        Ok(DetectorConfig {
            threshold,
            min_distance_s,
        })
    }
}

/// Candidate thresholds `lo, lo+step, …` up to and including `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lo: DEFAULT_GRID_LO,
            hi: DEFAULT_GRID_HI,
            step: DEFAULT_GRID_STEP,
        }
    }
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let grid = GridSpec { lo, hi, step };
        grid.validate()?;
        Ok(grid)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.lo.is_finite()
            && self.hi.is_finite()
            && self.step.is_finite()
            && self.lo < self.hi
            && self.step > 0.0
            && self.lo >= 0.0
            && self.hi <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(DetectorError::InvalidGrid {
                lo: self.lo,
                hi: self.hi,
                step: self.step,
            })
        }
    }

    /// Grid points, each computed as `lo + i·step` and rounded to 12 decimals
    /// so that e.g. the 252nd point of the default grid is exactly `0.751`.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| ((self.lo + i as f64 * self.step) * 1e12).round() / 1e12)
            .filter(|&p| p <= self.hi + 1e-12)
            .map(|p| p.min(self.hi))
            .collect()
    }
}

fn check_threshold(p_t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p_t) {
        Ok(())
    } else {
        Err(DetectorError::InvalidThreshold(p_t))
    }
}

/// Minimum distance in frames: `d_s · fps` rounded half-up, at least 1.
pub fn min_distance_frames(d_s: f64, fps: f64) -> usize {
    ((d_s * fps + 0.5).floor() as usize).max(1)
}

/// Zeroes every probability strictly below `p_t`.
pub fn threshold_probs(series: &ProbabilitySeries, p_t: f64) -> Result<ProbabilitySeries> {
    check_threshold(p_t)?;
    Ok(series.with_probs(
        series
            .probs()
            .iter()
            .map(|&p| if p >= p_t { p } else { 0.0 })
            .collect(),
    ))
}

/// Candidate positions (p > 0) ordered by descending probability, then frame.
fn ranked_candidates(probs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order
}

/// Greedy selection over ranked candidates; returns accepted positions ascending.
fn greedy_select(ranked: &[usize], d_frames: usize) -> Vec<usize> {
    let mut accepted = BTreeSet::new();
    for &i in ranked {
        let lo = i.saturating_sub(d_frames - 1);
        let hi = i + (d_frames - 1);
        if accepted.range(lo..=hi).next().is_none() {
            accepted.insert(i);
        }
    }
    accepted.into_iter().collect()
}

/// Picks maxima of an already thresholded series with at least `d_frames`
/// frames between any two picks. Zero-probability frames are never picked.
pub fn detect_maxima(thresholded: &ProbabilitySeries, d_frames: usize) -> DetectionList {
    let d_frames = d_frames.max(1);
    let start = thresholded.start_frame();
    let frames = greedy_select(&ranked_candidates(thresholded.probs()), d_frames)
        .into_iter()
        .map(|i| start + i as u64)
        .collect();
    DetectionList {
        frames,
        fps: thresholded.fps(),
    }
}

pub fn detect(series: &ProbabilitySeries, config: &DetectorConfig) -> Result<DetectionList> {
    let thresholded = threshold_probs(series, config.threshold)?;
    if !(config.min_distance_s.is_finite() && config.min_distance_s > 0.0) {
        return Err(DetectorError::InvalidMinDistance(config.min_distance_s));
    }
    let d_frames = min_distance_frames(config.min_distance_s, series.fps());
    Ok(detect_maxima(&thresholded, d_frames))
}

/// A probability series with its ground-truth event spans.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSession {
    pub probs: ProbabilitySeries,
    pub events: Vec<FrameEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub threshold: f64,
    pub f1: f64,
    pub counts: EvalCounts,
    pub grid_points: usize,
}

/// Greedy picks at the lowest possible threshold, kept with their probability.
///
/// Raising the threshold only removes a tail of the ranked candidate order, and
/// each greedy decision depends only on earlier-ranked picks, so the picks at any
/// threshold `t` are exactly these picks with `p >= t`.
struct PickProfile {
    frames: Vec<u64>,
    probs: Vec<f64>,
}

impl PickProfile {
    fn new(series: &ProbabilitySeries, d_frames: usize) -> Self {
        let picks = greedy_select(&ranked_candidates(series.probs()), d_frames);
        PickProfile {
            frames: picks.iter().map(|&i| series.start_frame() + i as u64).collect(),
            probs: picks.iter().map(|&i| series.probs()[i]).collect(),
        }
    }

    fn at(&self, p_t: f64, out: &mut Vec<u64>) {
        out.clear();
        out.extend(
            self.frames
                .iter()
                .zip(&self.probs)
                .filter(|(_, &p)| p >= p_t)
                .map(|(&f, _)| f),
        );
    }
}

/// Grid search for the threshold maximizing F1 over counts pooled across all
/// sessions. Ties go to the smallest threshold.
pub fn tune_threshold(
    sessions: &[LabeledSession],
    grid: &GridSpec,
    d_s: f64,
) -> Result<TuneOutcome> {
    grid.validate()?;
    if !(d_s.is_finite() && d_s > 0.0) {
        return Err(DetectorError::InvalidMinDistance(d_s));
    }
    if sessions.is_empty() {
        return Err(DetectorError::NoSessions);
    }
    for (session, s) in sessions.iter().enumerate() {
        validate_events(&s.events).map_err(|source| DetectorError::Events { session, source })?;
    }
    if sessions.iter().all(|s| s.events.is_empty()) {
        return Err(DetectorError::NoGroundTruth);
    }

    let profiles: Vec<PickProfile> = sessions
        .iter()
        .map(|s| PickProfile::new(&s.probs, min_distance_frames(d_s, s.probs.fps())))
        .collect();

    let points = grid.points();
    let mut best: Option<TuneOutcome> = None;
    let mut frames = Vec::new();
    for &p_t in &points {
        let counts: EvalCounts = profiles
            .iter()
            .zip(sessions)
            .map(|(profile, s)| {
                profile.at(p_t, &mut frames);
                count_matches(&frames, &s.events)
            })
            .sum();
        let f1 = compute_metrics(&counts).f1;
        if best.is_none_or(|b| f1 > b.f1) {
            best = Some(TuneOutcome {
                threshold: p_t,
                f1,
                counts,
                grid_points: points.len(),
            });
        }
    }
    // `points` is never empty for a valid grid
    Ok(best.expect("grid has at least one point"))
}
