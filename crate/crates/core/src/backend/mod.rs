//! Pluggable box refinement backends.
//!
//! Every backend answers the same query: given a scene and a box, produce
//! in-out probability vectors over the enlarged search region plus a scalar
//! objectness. The search driver runs unmodified against any of them:
//!
//! * [`OracleRefiner`] — ideal answers straight from the ground truth;
//! * [`NoisyRefiner`] — the oracle with randomly corrupted probabilities;
//! * [`LearnedRefiner`] — a trained linear model over pooled grid features.

mod model;
mod oracle;
mod train;

pub use model::{
    loss_and_grad, region_descriptors, tiny_forward, LocSample, ModelParams, ObjSample,
    RegionDescriptors, PARAM_VERSION,
};
pub use oracle::{noisy_oracle_refine, oracle_refine};
pub use train::{train, SceneDataset, TrainConfig, TrainError, TrainOutcome};

use std::sync::OnceLock;

use crate::geometry::BBox;
use crate::inout::ProbVectors;
use crate::scene::{IntegralGrid, SyntheticScene};

/// Output of one refinement query: probability vectors over the search
/// region and the box's objectness.
#[derive(Clone, Debug)]
pub struct RefineResult {
    pub probs: ProbVectors,
    pub objectness: f64,
}

impl RefineResult {
    pub fn new(probs: ProbVectors, objectness: f64) -> Self {
        assert!(
            (0.0..=1.0).contains(&objectness),
            "objectness {objectness} outside [0, 1]"
        );
        RefineResult { probs, objectness }
    }
}

/// A scene handed to backends, with a lazily built feature cache so that
/// repeated queries against the same scene share the integral grid.
pub struct SceneContext<'a> {
    pub scene: &'a SyntheticScene,
    features: OnceLock<IntegralGrid>,
}

impl<'a> SceneContext<'a> {
    pub fn new(scene: &'a SyntheticScene) -> Self {
        SceneContext {
            scene,
            features: OnceLock::new(),
        }
    }

    /// Integral grid over the scene features, built on first use.
    pub fn features(&self) -> &IntegralGrid {
        self.features.get_or_init(|| IntegralGrid::build(&self.scene.grid))
    }
}

/// The uniform backend contract consumed by the search driver.
pub trait Refiner: Sync {
    fn refine(&self, ctx: &SceneContext<'_>, query: BBox, gamma: f64, m: usize) -> RefineResult;
}

/// Ideal refinement straight from the ground truth.
pub struct OracleRefiner;

impl Refiner for OracleRefiner {
    fn refine(&self, ctx: &SceneContext<'_>, query: BBox, gamma: f64, m: usize) -> RefineResult {
        oracle_refine(ctx.scene, &query, gamma, m)
    }
}

/// Oracle with per-element probability corruption, deterministic in the
/// base seed and the query box.
pub struct NoisyRefiner {
    pub noise: f64,
    pub seed: u64,
}

impl NoisyRefiner {
    /// Matches the default corruption fraction used when building
    /// training pools.
    pub const DEFAULT_NOISE: f64 = 0.20;
}

impl Refiner for NoisyRefiner {
    fn refine(&self, ctx: &SceneContext<'_>, query: BBox, gamma: f64, m: usize) -> RefineResult {
        let call_seed = mix_box_seed(self.seed, &query);
        noisy_oracle_refine(ctx.scene, &query, gamma, m, self.noise, call_seed)
    }
}

/// Trained model backend.
pub struct LearnedRefiner {
    pub params: ModelParams,
}

impl Refiner for LearnedRefiner {
    fn refine(&self, ctx: &SceneContext<'_>, query: BBox, gamma: f64, m: usize) -> RefineResult {
        tiny_forward(&self.params, ctx, &query, gamma, m)
    }
}

/// Derive a per-box seed so noise is reproducible regardless of the order
/// boxes are evaluated in.
pub(crate) fn mix_box_seed(seed: u64, b: &BBox) -> u64 {
    let mut z = seed;
    for v in [b.x1, b.y1, b.x2, b.y2] {
        z ^= v.to_bits().wrapping_mul(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z ^= z >> 27;
    }
    z
}
