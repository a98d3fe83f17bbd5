//! Team-aware multi-player tracking.
//!
//! Players are selected with point prompts on the first frame, segmented,
//! fingerprinted by jersey colour and followed with per-player correlation
//! filters. Tracks that lose their target are re-acquired by re-segmenting
//! around a motion-predicted position and matching jersey histograms.
//! [`metrics`] scores a run against ground truth along speed, accuracy and
//! robustness axes, and [`scenario`] renders synthetic scenes to run on.

pub mod appearance;
pub mod error;
pub mod media;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod scenario;
pub mod segmenter;
pub mod tracker;
pub mod tracklog;

pub use error::{Error, Result};
pub use model::{bbox_center, bbox_from_mask, iou, BBox, Frame, Mask, PlayerId, PointPrompt, TeamLabel};
