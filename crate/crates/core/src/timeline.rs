//! Annotations, per-frame labels and probability series, plus the
//! class-balancing loss utilities used when training frame classifiers.
//!
//! Frame `k` of a series sampled at `fps` has timestamp `k / fps`. Series may
//! start at a non-zero absolute frame (`start_frame`), e.g. when a model with a
//! 16-frame temporal context cannot predict the first 15 frames.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower clamp applied to probabilities before taking the logarithm.
pub const LOG_CLAMP: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimelineError {
    #[error("interval #{index} is invalid: start {start_s} s, end {end_s} s (need 0 <= start < end)")]
    InvalidInterval {
        index: usize,
        start_s: f64,
        end_s: f64,
    },
    #[error("frame rate must be positive and finite, got {0}")]
    InvalidFps(f64),
    #[error("series must contain at least one frame")]
    EmptySeries,
    #[error("downsampling factor must be >= 1, got {0}")]
    InvalidFactor(usize),
    #[error("probability at position {index} is {value}, outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("number of classes must be >= 1")]
    NoClasses,
    #[error("label {class} at position {index} is out of range for {n_classes} classes")]
    ClassOutOfRange {
        index: usize,
        class: usize,
        n_classes: usize,
    },
    #[error("length mismatch: {predictions} predictions, {labels} labels, {weights} weights")]
    LengthMismatch {
        predictions: usize,
        labels: usize,
        weights: usize,
    },
    #[error("prediction {index} sums to {sum}, not 1")]
    NotADistribution { index: usize, sum: f64 },
}

pub type Result<T> = std::result::Result<T, TimelineError>;

/// Gesture class of an annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GestureLabel {
    Intake,
}

impl GestureLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            GestureLabel::Intake => "intake",
        }
    }
}

impl std::str::FromStr for GestureLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "intake" => Ok(GestureLabel::Intake),
            other => Err(format!("unknown gesture label '{other}'")),
        }
    }
}

/// Per-frame class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameLabel {
    NonIntake,
    Intake,
}

impl FrameLabel {
    /// Class id used for loss and recall bookkeeping: non-intake 0, intake 1.
    pub fn class_id(self) -> usize {
        match self {
            FrameLabel::NonIntake => 0,
            FrameLabel::Intake => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FrameLabel::NonIntake => "non_intake",
            FrameLabel::Intake => "intake",
        }
    }
}

impl std::str::FromStr for FrameLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "intake" => Ok(FrameLabel::Intake),
            "non_intake" => Ok(FrameLabel::NonIntake),
            other => Err(format!("unknown frame label '{other}'")),
        }
    }
}

/// A ground-truth gesture, `[start_s, end_s]` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotationInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub label: GestureLabel,
}

impl AnnotationInterval {
    pub fn new(start_s: f64, end_s: f64, label: GestureLabel) -> Result<Self> {
        let interval = AnnotationInterval {
            start_s,
            end_s,
            label,
        };
        interval.validate(0)?;
        Ok(interval)
    }

    pub fn intake(start_s: f64, end_s: f64) -> Result<Self> {
        Self::new(start_s, end_s, GestureLabel::Intake)
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    fn validate(&self, index: usize) -> Result<()> {
        let ok = self.start_s.is_finite()
            && self.end_s.is_finite()
            && self.start_s >= 0.0
            && self.end_s > self.start_s;
        if ok {
            Ok(())
        } else {
            Err(TimelineError::InvalidInterval {
                index,
                start_s: self.start_s,
                end_s: self.end_s,
            })
        }
    }

    /// Whether the timestamp of `frame` lies inside the interval (both ends inclusive).
    pub fn covers_frame(&self, frame: u64, fps: f64) -> bool {
        let t = frame as f64 / fps;
        self.start_s <= t && t <= self.end_s
    }

    /// First and last frame (below `n_frames`) whose timestamps fall in the interval.
    pub fn frame_span(&self, fps: f64, n_frames: u64) -> Option<FrameEvent> {
        if n_frames == 0 {
            return None;
        }
        // Approximate bounds, then settle them with the exact timestamp predicate.
        let mut first = ((self.start_s * fps).floor().max(0.0) as u64).min(n_frames - 1);
        while first > 0 && self.covers_frame(first - 1, fps) {
            first -= 1;
        }
        while first < n_frames && (first as f64 / fps) < self.start_s {
            first += 1;
        }
        if first >= n_frames || !self.covers_frame(first, fps) {
            return None;
        }
        let mut last = ((self.end_s * fps).ceil().max(0.0) as u64).min(n_frames - 1);
        while last > first && !self.covers_frame(last, fps) {
            last -= 1;
        }
        while last + 1 < n_frames && self.covers_frame(last + 1, fps) {
            last += 1;
        }
        Some(FrameEvent { first, last })
    }
}

/// Inclusive run of absolute frame indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameEvent {
    pub first: u64,
    pub last: u64,
}

impl FrameEvent {
    pub fn new(first: u64, last: u64) -> Self {
        debug_assert!(first <= last);
        FrameEvent { first, last }
    }

    pub fn contains(&self, frame: u64) -> bool {
        self.first <= frame && frame <= self.last
    }

    pub fn len(&self) -> u64 {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

fn check_fps(fps: f64) -> Result<()> {
    if fps.is_finite() && fps > 0.0 {
        Ok(())
    } else {
        Err(TimelineError::InvalidFps(fps))
    }
}

/// One label per frame, starting at absolute frame `start_frame`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLabelSeries {
    fps: f64,
    labels: Vec<FrameLabel>,
    start_frame: u64,
}

impl FrameLabelSeries {
    pub fn new(fps: f64, labels: Vec<FrameLabel>, start_frame: u64) -> Result<Self> {
        check_fps(fps)?;
        if labels.is_empty() {
            return Err(TimelineError::EmptySeries);
        }
        Ok(FrameLabelSeries {
            fps,
            labels,
            start_frame,
        })
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn labels(&self) -> &[FrameLabel] {
        &self.labels
    }

    pub fn start_frame(&self) -> u64 {
        self.start_frame
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(absolute frame, label)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (u64, FrameLabel)> + '_ {
        self.labels
            .iter()
            .enumerate()
            .map(move |(i, &l)| (self.start_frame + i as u64, l))
    }
}

/// Per-frame intake probabilities, starting at absolute frame `start_frame`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilitySeries {
    fps: f64,
    probs: Vec<f64>,
    start_frame: u64,
}

impl ProbabilitySeries {
    pub fn new(fps: f64, probs: Vec<f64>, start_frame: u64) -> Result<Self> {
        check_fps(fps)?;
        if let Some((index, &value)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(TimelineError::ProbabilityOutOfRange { index, value });
        }
        Ok(ProbabilitySeries {
            fps,
            probs,
            start_frame,
        })
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn start_frame(&self) -> u64 {
        self.start_frame
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// One past the last absolute frame covered.
    pub fn end_frame(&self) -> u64 {
        self.start_frame + self.probs.len() as u64
    }

    pub(crate) fn with_probs(&self, probs: Vec<f64>) -> Self {
        ProbabilitySeries {
            fps: self.fps,
            probs,
            start_frame: self.start_frame,
        }
    }
}

/// Labels frames `0..n_frames` as intake when their timestamp falls inside any
/// interval (inclusive at both ends). Overlapping intervals act as their union.
pub fn labels_from_annotations(
    intervals: &[AnnotationInterval],
    fps: f64,
    n_frames: u64,
) -> Result<FrameLabelSeries> {
    check_fps(fps)?;
    if n_frames == 0 {
        return Err(TimelineError::EmptySeries);
    }
    for (index, interval) in intervals.iter().enumerate() {
        interval.validate(index)?;
    }
    warn_on_overlap(intervals);

    let mut labels = vec![FrameLabel::NonIntake; n_frames as usize];
    for interval in intervals {
        if let Some(span) = interval.frame_span(fps, n_frames) {
            labels[span.first as usize..=span.last as usize].fill(FrameLabel::Intake);
        }
    }
    FrameLabelSeries::new(fps, labels, 0)
}

fn warn_on_overlap(intervals: &[AnnotationInterval]) {
    let mut sorted: Vec<_> = intervals.iter().collect();
    sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for pair in sorted.windows(2) {
        if pair[1].start_s <= pair[0].end_s {
            log::warn!(
                "overlapping annotations [{}, {}] and [{}, {}] are merged",
                pair[0].start_s,
                pair[0].end_s,
                pair[1].start_s,
                pair[1].end_s
            );
        }
    }
}

/// Keeps every `factor`-th frame and divides the frame rate by `factor`.
///
/// Kept frames are those whose absolute index is a multiple of `factor`, so a
/// series starting at frame 0 keeps positions `0, factor, 2·factor, …`. The new
/// `start_frame` is the kept first frame expressed at the reduced rate.
pub fn downsample_labels(series: &FrameLabelSeries, factor: usize) -> Result<FrameLabelSeries> {
    if factor < 1 {
        return Err(TimelineError::InvalidFactor(factor));
    }
    let f = factor as u64;
    let labels: Vec<FrameLabel> = series
        .iter()
        .filter(|(frame, _)| frame % f == 0)
        .map(|(_, label)| label)
        .collect();
    FrameLabelSeries::new(series.fps / factor as f64, labels, series.start_frame.div_ceil(f))
}

/// Maximal runs of consecutive intake frames, as absolute frame spans.
pub fn events_from_labels(series: &FrameLabelSeries) -> Vec<FrameEvent> {
    let mut events = Vec::new();
    let mut open: Option<u64> = None;
    let mut previous = series.start_frame;
    for (frame, label) in series.iter() {
        match (label, open) {
            (FrameLabel::Intake, None) => open = Some(frame),
            (FrameLabel::NonIntake, Some(first)) => {
                events.push(FrameEvent::new(first, previous));
                open = None;
            }
            _ => {}
        }
        previous = frame;
    }
    if let Some(first) = open {
        events.push(FrameEvent::new(first, previous));
    }
    events
}

/// Per-example loss weights for one minibatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Self {
        WeightVector(weights)
    }

    pub fn uniform(len: usize) -> Self {
        WeightVector(vec![1.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Inverse-frequency weights `w_i = m / (C(i) · n)` for a batch of `m` labels
/// over `n` classes, where `C(i)` counts the labels equal to label `i`.
pub fn class_weights(batch_labels: &[usize], n_classes: usize) -> Result<WeightVector> {
    if n_classes == 0 {
        return Err(TimelineError::NoClasses);
    }
    if batch_labels.is_empty() {
        return Err(TimelineError::EmptyBatch);
    }
    let mut counts = vec![0usize; n_classes];
    for (index, &class) in batch_labels.iter().enumerate() {
        if class >= n_classes {
            return Err(TimelineError::ClassOutOfRange {
                index,
                class,
                n_classes,
            });
        }
        counts[class] += 1;
    }
    let m = batch_labels.len() as f64;
    let n = n_classes as f64;
    Ok(WeightVector(
        batch_labels
            .iter()
            .map(|&class| m / (counts[class] as f64 * n))
            .collect(),
    ))
}

/// Mean over the batch of `w_i · −ln p_i[y_i]`, with probabilities clamped to
/// `[LOG_CLAMP, 1]` before the logarithm.
pub fn weighted_cross_entropy(
    predicted_probs: &[Vec<f64>],
    true_labels: &[usize],
    weights: &WeightVector,
) -> Result<f64> {
    let m = predicted_probs.len();
    if m != true_labels.len() || m != weights.len() {
        return Err(TimelineError::LengthMismatch {
            predictions: m,
            labels: true_labels.len(),
            weights: weights.len(),
        });
    }
    if m == 0 {
        return Err(TimelineError::EmptyBatch);
    }
    let mut total = 0.0;
    for (index, ((probs, &label), &w)) in predicted_probs
        .iter()
        .zip(true_labels)
        .zip(weights.as_slice())
        .enumerate()
    {
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(TimelineError::NotADistribution { index, sum });
        }
        let p = *probs.get(label).ok_or(TimelineError::ClassOutOfRange {
            index,
            class: label,
            n_classes: probs.len(),
        })?;
        total += w * -p.clamp(LOG_CLAMP, 1.0).ln();
    }
    Ok(total / m as f64)
}
