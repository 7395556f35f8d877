//! Intake gesture detection from frame-level probabilities: timelines and
//! labels, the two-stage detector, event-level evaluation, model architecture
//! bookkeeping, synthetic sessions and CSV interchange.

pub mod archspec;
pub mod detector;
pub mod evaluation;
pub mod timeline;
pub mod io;
pub mod synth;
