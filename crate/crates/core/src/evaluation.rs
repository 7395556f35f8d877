//! Event-level detection scoring and frame-level unweighted average recall.
//!
//! Detections are matched against ground-truth frame spans:
//! the first detection inside an event is a true positive, further detections
//! inside the same event are type-1 false positives, detections outside every
//! event are type-2 false positives, and events never hit are false negatives.

use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::DetectionList;
use crate::timeline::{FrameEvent, FrameLabelSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("ground-truth events #{index} and #{next} overlap or are out of order")]
    OverlappingEvents { index: usize, next: usize },
    #[error("ground-truth event #{index} ends before it starts")]
    InvalidEvent { index: usize },
    #[error("series are not aligned: {0}")]
    Misaligned(String),
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvalCounts {
    pub tp: u64,
    pub fp1: u64,
    pub fp2: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl EvalCounts {
    pub fn new(tp: u64, fp1: u64, fp2: u64, fn_: u64) -> Self {
        EvalCounts { tp, fp1, fp2, fn_ }
    }

    pub fn detections(&self) -> u64 {
        self.tp + self.fp1 + self.fp2
    }

    pub fn events(&self) -> u64 {
        self.tp + self.fn_
    }
}

impl Add for EvalCounts {
    type Output = EvalCounts;

    fn add(self, rhs: EvalCounts) -> EvalCounts {
        EvalCounts {
            tp: self.tp + rhs.tp,
            fp1: self.fp1 + rhs.fp1,
            fp2: self.fp2 + rhs.fp2,
            fn_: self.fn_ + rhs.fn_,
        }
    }
}

impl AddAssign for EvalCounts {
    fn add_assign(&mut self, rhs: EvalCounts) {
        *self = *self + rhs;
    }
}

impl Sum for EvalCounts {
    fn sum<I: Iterator<Item = EvalCounts>>(iter: I) -> EvalCounts {
        iter.fold(EvalCounts::default(), Add::add)
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Checks that events are well formed, ascending and pairwise disjoint.
pub fn validate_events(events: &[FrameEvent]) -> Result<(), EvalError> {
    for (index, event) in events.iter().enumerate() {
        if event.first > event.last {
            return Err(EvalError::InvalidEvent { index });
        }
    }
    for (index, pair) in events.windows(2).enumerate() {
        if pair[1].first <= pair[0].last {
            return Err(EvalError::OverlappingEvents {
                index,
                next: index + 1,
            });
        }
    }
    Ok(())
}

pub fn evaluate_detections(
    detections: &DetectionList,
    gt_events: &[FrameEvent],
) -> Result<EvalCounts, EvalError> {
    validate_events(gt_events)?;
    Ok(count_matches(detections.frames(), gt_events))
}

/// Scan over ascending detection frames and validated events.
pub(crate) fn count_matches(frames: &[u64], events: &[FrameEvent]) -> EvalCounts {
    let mut counts = EvalCounts::default();
    let mut hit = vec![false; events.len()];
    let mut j = 0;
    for &frame in frames {
        while j < events.len() && events[j].last < frame {
            j += 1;
        }
        match events.get(j) {
            Some(event) if event.first <= frame => {
                if hit[j] {
                    counts.fp1 += 1;
                } else {
                    hit[j] = true;
                    counts.tp += 1;
                }
            }
            _ => counts.fp2 += 1,
        }
    }
    counts.fn_ = events.len() as u64 - counts.tp;
    counts
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision `TP/(TP+FP1+FP2)`, recall `TP/(TP+FN)` and their harmonic mean.
/// Zero denominators give zero.
pub fn compute_metrics(counts: &EvalCounts) -> Metrics {
    let precision = ratio(counts.tp, counts.detections());
    let recall = ratio(counts.tp, counts.events());
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics {
        precision,
        recall,
        f1,
    }
}

/// Mean of per-class recalls over the classes present in `truth`.
pub fn uar(predicted: &FrameLabelSeries, truth: &FrameLabelSeries) -> Result<f64, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::Misaligned(format!(
            "{} predicted frames vs {} ground-truth frames",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.fps() != truth.fps() {
        return Err(EvalError::Misaligned(format!(
            "{} fps vs {} fps",
            predicted.fps(),
            truth.fps()
        )));
    }
    if predicted.start_frame() != truth.start_frame() {
        return Err(EvalError::Misaligned(format!(
            "start frame {} vs {}",
            predicted.start_frame(),
            truth.start_frame()
        )));
    }
    let mut total = [0u64; 2];
    let mut correct = [0u64; 2];
    for (p, t) in predicted.labels().iter().zip(truth.labels()) {
        let class = t.class_id();
        total[class] += 1;
        if p == t {
            correct[class] += 1;
        }
    }
    let recalls: Vec<f64> = total
        .iter()
        .zip(correct)
        .filter(|(&n, _)| n > 0)
        .map(|(&n, c)| c as f64 / n as f64)
        .collect();
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

/// Scoring summary written as JSON by the command-line tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: u64,
    pub fp1: u64,
    pub fp2: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl EvalReport {
    pub fn new(counts: EvalCounts) -> Self {
        let m = compute_metrics(&counts);
        EvalReport {
            tp: counts.tp,
            fp1: counts.fp1,
            fp2: counts.fp2,
            fn_: counts.fn_,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            uar: None,
            threshold: None,
        }
    }

    pub fn counts(&self) -> EvalCounts {
        EvalCounts::new(self.tp, self.fp1, self.fp2, self.fn_)
    }
}
