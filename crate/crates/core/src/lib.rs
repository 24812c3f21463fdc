//! Authoring and placement of instruction steps on the surfaces of
//! real-world key objects.
//!
//! The authoring side turns instruction text into a [`DocumentProfile`]:
//! segmented steps, each tagged with the key object it concerns. The
//! consumption side replays gaze and hand context traces and searches the
//! discretized anchoring surfaces of a key object for the label placement
//! with the lowest total cost.

// `!(x > y)` is used on purpose so that NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod context_trace;
pub mod document_profile;
pub mod error;
pub mod geometry;
pub mod importance;
pub mod maps;
pub mod optimizer;
pub mod placement_cost;
pub mod spatial_profile;

pub use context_trace::{Frame, FrameWindow, HandSample};
pub use document_profile::{DocumentProfile, InstructionStep, LabelVocabulary, StepSource};
pub use error::{Error, Result};
pub use geometry::{Quat, Ray, Rect, Vec3};
pub use importance::{CellMask, ImportanceMap};
pub use optimizer::{AnnealingConfig, SearchResult};
pub use placement_cost::{CostContext, CostWeights, LabelGeometry, Placement};
pub use spatial_profile::{AnchoringSurface, KeyObject, Orientation, SpatialProfile};
