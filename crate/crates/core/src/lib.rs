//! Curriculum object-level blurring for layout-conditioned image datasets.
//!
//! Each training sample is blurred by shrinking it to an intermediate
//! resolution and growing it back, then either the object boxes or the
//! background receive the blurred pixels. A schedule lowers the blur strength
//! to zero over training so the final phase sees clean images only.
//!
//! * [`layouts`]: manifest parsing, filtering, mask rasterization
//! * [`resample`]: bilinear resize and the blur operator
//! * [`schedules`]: strength as a function of training progress
//! * [`compositor`]: mask compositing and ablation variants
//! * [`pipeline`]: deterministic, parallel dataset traversal

pub mod compositor;
pub mod image;
pub mod layouts;
pub mod pipeline;
pub mod resample;
pub mod rng;
pub mod schedules;
pub mod synth;

pub use compositor::{BlurPolicy, BlurVariant, BranchDecision};
pub use image::Image;
pub use layouts::{BBox, BinaryMask, FilterRules, Layout};
pub use pipeline::{AugmentedSample, Pipeline, PipelineConfig, PipelineError, RunReport};
pub use resample::BlurStrength;
pub use schedules::{ScheduleFamily, ScheduleSpec, TrainClock};
