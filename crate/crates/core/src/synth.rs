//! Seeded synthetic eating sessions: ground-truth intake gestures and a
//! matching frame-probability trace.
//!
//! Randomness comes from xoshiro256** seeded through SplitMix64
//! (`Xoshiro256StarStar::seed_from_u64`). Variates are derived explicitly so
//! the output can be reproduced in any language:
//! * uniform: `(next_u64 >> 11) · 2⁻⁵³` in `[0, 1)`
//! * normal: Box–Muller with `u1 = 1 − uniform`, `u2 = uniform`, cosine branch only
//! * exponential: `−mean · ln(1 − uniform)`
//!
//! Each event becomes a peak centred on its middle frame `c`:
//! `p = 1 − |k − c| / 3` for `|k − c| ≤ 2`, restricted to the event's frames,
//! zero elsewhere. Gaussian noise is then added and the trace clipped to `[0, 1]`.

use std::f64::consts::PI;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeline::{AnnotationInterval, FrameEvent, ProbabilitySeries};

/// Shortest gesture the generator emits, in seconds.
pub const MIN_GESTURE_S: f64 = 0.5;

/// Frames on each side of an event's centre that rise above the baseline.
pub const RAMP_FRAMES: u64 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("no gesture fits in a {duration_s} s session (seed {seed})")]
    NoEvents { duration_s: f64, seed: u64 },
}

pub type Result<T> = std::result::Result<T, SynthError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub duration_s: f64,
    /// Mean gesture duration of the generated events.
    pub gesture_mean_s: f64,
    pub gesture_std_s: f64,
    pub mean_gap_s: f64,
    /// Lower bound on every gap; `1/fps` applies when this is smaller.
    pub min_gap_s: f64,
    pub noise_std: f64,
    pub fps: f64,
    pub seed: u64,
}

impl Default for SessionConfig {
    /// Session and gesture statistics of the reference dataset: 47.95 gestures
    /// of 2.32 ± 1.02 s per 816.46 s session, i.e. gaps averaging 14.71 s.
    fn default() -> Self {
        SessionConfig {
            duration_s: 816.46,
            gesture_mean_s: 2.32,
            gesture_std_s: 1.02,
            mean_gap_s: 14.71,
            min_gap_s: 0.0,
            noise_std: 0.1,
            fps: 8.0,
            seed: 0,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SynthError::InvalidConfig(msg));
        let finite = [
            self.duration_s,
            self.gesture_mean_s,
            self.gesture_std_s,
            self.mean_gap_s,
            self.min_gap_s,
            self.noise_std,
            self.fps,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return bad("all parameters must be finite".into());
        }
        if self.fps <= 0.0 {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        if self.duration_s < MIN_GESTURE_S {
            return bad(format!(
                "duration {} s is shorter than the minimum gesture of {MIN_GESTURE_S} s",
                self.duration_s
            ));
        }
        if self.gesture_mean_s < MIN_GESTURE_S {
            return bad(format!(
                "gesture mean {} s is below the {MIN_GESTURE_S} s truncation point",
                self.gesture_mean_s
            ));
        }
        if self.gesture_std_s < 0.0 {
            return bad(format!("gesture std must be >= 0, got {}", self.gesture_std_s));
        }
        if self.mean_gap_s <= 0.0 {
            return bad(format!("mean gap must be positive, got {}", self.mean_gap_s));
        }
        if self.min_gap_s < 0.0 {
            return bad(format!("minimum gap must be >= 0, got {}", self.min_gap_s));
        }
        if !(0.0..1.0).contains(&self.noise_std) {
            return bad(format!("noise std must lie in [0, 1), got {}", self.noise_std));
        }
        Ok(())
    }

    pub fn n_frames(&self) -> u64 {
        (self.duration_s * self.fps).floor() as u64
    }

    fn gap_floor_s(&self) -> f64 {
        self.min_gap_s.max(1.0 / self.fps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSession {
    pub seed: u64,
    pub events: Vec<AnnotationInterval>,
    pub probs: ProbabilitySeries,
}

impl SyntheticSession {
    /// Ground-truth events as frame spans; events covering no frame timestamp are dropped.
    pub fn frame_events(&self) -> Vec<FrameEvent> {
        let n = self.probs.len() as u64;
        self.events
            .iter()
            .filter_map(|e| e.frame_span(self.probs.fps(), n))
            .collect()
    }
}

/// Explicit variate transforms over xoshiro256**.
struct Variates(Xoshiro256StarStar);

impl Variates {
    fn new(seed: u64) -> Self {
        Variates(Xoshiro256StarStar::seed_from_u64(seed))
    }

    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    fn exponential(&mut self, mean: f64) -> f64 {
        -mean * (1.0 - self.uniform()).ln()
    }
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Mean of `Normal(mu, sigma)` truncated to `[lo, ∞)`.
pub fn truncated_normal_mean(mu: f64, sigma: f64, lo: f64) -> f64 {
    if sigma == 0.0 {
        return mu.max(lo);
    }
    let a = (lo - mu) / sigma;
    let tail = std_normal_sf(a);
    if tail < 1e-300 {
        return lo;
    }
    mu + sigma * std_normal_pdf(a) / tail
}

/// Location of the untruncated normal whose truncation at `lo` has mean `target`.
fn calibrated_location(target: f64, sigma: f64, lo: f64) -> f64 {
    if sigma == 0.0 {
        return target;
    }
    // truncated mean is increasing in mu
    let (mut a, mut b) = (lo - 40.0 * sigma, target);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if truncated_normal_mean(mid, sigma, lo) < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

fn peak_trace(events: &[FrameEvent], n_frames: u64) -> Vec<f64> {
    let mut probs = vec![0.0f64; n_frames as usize];
    for e in events {
        let c = (e.first + e.last) / 2;
        let lo = c.saturating_sub(RAMP_FRAMES).max(e.first);
        let hi = (c + RAMP_FRAMES).min(e.last);
        for k in lo..=hi {
            let p = 1.0 - k.abs_diff(c) as f64 / (RAMP_FRAMES + 1) as f64;
            let slot = &mut probs[k as usize];
            *slot = slot.max(p);
        }
    }
    probs
}

pub fn generate_session(config: &SessionConfig) -> Result<SyntheticSession> {
    config.validate()?;
    let mut rng = Variates::new(config.seed);
    let mu = calibrated_location(config.gesture_mean_s, config.gesture_std_s, MIN_GESTURE_S);
    let gap_floor = config.gap_floor_s();

    let mut events = Vec::new();
    let mut t = rng.exponential(config.mean_gap_s).max(gap_floor);
    loop {
        let dur = loop {
            let d = mu + config.gesture_std_s * rng.normal();
            if d >= MIN_GESTURE_S {
                break d;
            }
        };
        if t + dur > config.duration_s {
            break;
        }
        events.push(AnnotationInterval::intake(t, t + dur).expect("positive duration"));
        t += dur + rng.exponential(config.mean_gap_s).max(gap_floor);
    }
    if events.is_empty() {
        return Err(SynthError::NoEvents {
            duration_s: config.duration_s,
            seed: config.seed,
        });
    }

    let n_frames = config.n_frames();
    let spans: Vec<FrameEvent> = events
        .iter()
        .filter_map(|e| e.frame_span(config.fps, n_frames))
        .collect();
    let mut probs = peak_trace(&spans, n_frames);
    if config.noise_std > 0.0 {
        for p in probs.iter_mut() {
            *p = (*p + config.noise_std * rng.normal()).clamp(0.0, 1.0);
        }
    }
    let probs = ProbabilitySeries::new(config.fps, probs, 0).expect("trace lies in [0, 1]");
    log::debug!(
        "seed {}: {} events over {} frames",
        config.seed,
        events.len(),
        n_frames
    );
    Ok(SyntheticSession {
        seed: config.seed,
        events,
        probs,
    })
}

/// `n_sessions` sessions; session `k` is generated with seed `base_seed + k`
/// (wrapping). `config.seed` is ignored.
pub fn generate_dataset(
    n_sessions: usize,
    base_seed: u64,
    config: &SessionConfig,
) -> Result<Vec<SyntheticSession>> {
    if n_sessions == 0 {
        return Err(SynthError::InvalidConfig("at least one session is required".into()));
    }
    (0..n_sessions as u64)
        .map(|k| {
            generate_session(&SessionConfig {
                seed: base_seed.wrapping_add(k),
                ..*config
            })
        })
        .collect()
}
