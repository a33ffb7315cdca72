//! Category-agnostic bounding-box proposal engine.
//!
//! Starting from a uniform grid of seed boxes, the engine repeatedly
//! scores each box's objectness and refines its location, accumulating
//! every scored refinement as a candidate. Refinement predicts, for each
//! column and row of an enlarged search region, the probability of lying
//! inside the nearest object box; decoding that prediction back to
//! coordinates is a per-axis maximum-likelihood run search. Candidates are
//! finally suppressed and re-ordered with a multi-threshold NMS so any
//! prefix of the output is a good proposal set for its size.
//!
//! The crate also ships the training machinery for a small learnable
//! refinement backend, a synthetic-scene generator, average-recall
//! evaluation, and the file formats used by the CLI.

pub mod backend;
pub mod datagen;
pub mod engine;
pub mod eval;
pub mod formats;
pub mod geometry;
pub mod inout;
pub mod nms;
pub mod scene;
pub mod seeds;
pub mod training;

pub use backend::{
    LearnedRefiner, ModelParams, NoisyRefiner, OracleRefiner, Refiner, RefineResult, SceneContext,
};
pub use engine::{attention_map, propose, propose_traced, EngineConfig, Heatmap, Proposal};
pub use geometry::{enlarge, iou, BBox, ImageExtent};
pub use inout::{decode_exhaustive, decode_ml, make_targets, ProbVectors, TargetVectors};
pub use nms::{greedy_nms, multithreshold_reorder, NmsSchedule};
pub use scene::SyntheticScene;
pub use seeds::{generate_seeds, SeedConfig};
