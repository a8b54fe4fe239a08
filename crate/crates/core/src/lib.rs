//! Streaming sensing toolkit for dyadic interaction studies.
//!
//! The pipeline runs MFCC features through a linear-SVM voice activity
//! detector, fuses the result with Bluetooth RSSI proximity in an
//! event-driven trigger state machine, and extracts multimodal features for
//! valence/arousal classification. A seeded simulation harness replays
//! synthetic two-device scenarios through the whole stack.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dsp;
pub mod emotion;
pub mod error;
pub mod par;
pub mod proximity;
pub mod sim;
pub mod trigger;
pub mod vad;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use par::Execution;
