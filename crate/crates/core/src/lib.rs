//! Toolkit for data-centric pavement distress detection benchmarks.
//!
//! The crate reads and writes the competition's annotation formats, scores
//! detector output with per-class F1, augments labeled images with exact box
//! remapping, fuses test-time-augmentation predictions, and supports
//! semi-supervised label drafting. Detector training and inference are
//! external; everything here consumes images, labels and detection files.

pub mod augment;
pub mod autolabel;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod postprocess;
pub mod rng;
pub mod scoring;

pub use dataset::{Annotation, Dataset, Detection, DistressClass, ImageRecord, Predictions};
pub use error::{Error, Result};
pub use geometry::BBox;
pub use scoring::{evaluate, EvalReport};
