//! SGD-with-momentum training of the refinement model over synthetic
//! scenes, with image-centric triplet sampling.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::model::{loss_and_grad, LocSample, ModelParams, ObjSample};
use super::SceneContext;
use crate::datagen::{generate_scene, SceneSpec, FEATURE_CHANNELS};
use crate::scene::SyntheticScene;
use crate::seeds::SeedConfig;
use crate::training::{build_pool, label_pool, TrainingTriplets};

/// A lazily generated family of scenes: the dataset is fully described by
/// the distribution parameters and a count, and any scene can be
/// regenerated on demand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDataset {
    pub spec: SceneSpec,
    pub count: usize,
}

impl SceneDataset {
    pub fn new(spec: SceneSpec, count: usize) -> Self {
        SceneDataset { spec, count }
    }

    pub fn scene(&self, index: usize) -> SyntheticScene {
        generate_scene(&self.spec, index as u64)
    }
}

/// Optimization settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Iteration at which the learning rate drops by 10x.
    pub lr_drop_at: usize,
    pub momentum: f64,
    /// Scenes sampled per mini-batch.
    pub batch_scenes: usize,
    /// Objectness triplets drawn per scene (half positive, half negative
    /// when both labels are available).
    pub objectness_per_scene: usize,
    /// Localization triplets drawn per scene.
    pub localization_per_scene: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 5000,
            learning_rate: 0.01,
            lr_drop_at: 4000,
            momentum: 0.9,
            batch_scenes: 4,
            objectness_per_scene: 64,
            localization_per_scene: 32,
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub enum TrainError {
    EmptyDataset,
    Diverged { iteration: usize, loss: f64 },
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::EmptyDataset => write!(f, "training dataset is empty"),
            TrainError::Diverged { iteration, loss } => {
                write!(f, "training diverged at iteration {iteration}: loss {loss}")
            }
        }
    }
}

impl std::error::Error for TrainError {}

/// Final parameters plus the per-iteration loss trace.
pub struct TrainOutcome {
    pub params: ModelParams,
    pub loss_trace: Vec<f64>,
}

/// Label pools of one scene, split for stratified objectness sampling.
struct ScenePools {
    positives: Vec<usize>,
    negatives: Vec<usize>,
    triplets: TrainingTriplets,
}

/// Train the model on `dataset` with SGD plus momentum.
///
/// Triplet pools are built once per scene from seed boxes and their ideal
/// and noise-corrupted refinement chains; mini-batches then draw
/// `batch_scenes` scenes per iteration (shuffled epochs) and sample the
/// configured number of triplets from each. Deterministic for a fixed
/// config.
pub fn train(
    dataset: &SceneDataset,
    seed_cfg: &SeedConfig,
    gamma: f64,
    m: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if dataset.count == 0 {
        return Err(TrainError::EmptyDataset);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut pools: Vec<Option<ScenePools>> = (0..dataset.count).map(|_| None).collect();

    let mut params = ModelParams::zeros(m, FEATURE_CHANNELS);
    let mut velocity = vec![0.0; params.dim()];
    let mut trace = Vec::with_capacity(cfg.iterations);

    let mut order: Vec<usize> = (0..dataset.count).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0usize;

    for iteration in 0..cfg.iterations {
        let mut loc_batch: Vec<LocSample> = Vec::new();
        let mut obj_batch: Vec<ObjSample> = Vec::new();

        for _ in 0..cfg.batch_scenes {
            if cursor >= order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let index = order[cursor];
            cursor += 1;

            let scene = dataset.scene(index);
            if pools[index].is_none() {
                let pool_seed = cfg.seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
                let pool = build_pool(&scene, seed_cfg, gamma, m, pool_seed);
                let triplets = label_pool(&pool, &scene, gamma, m);
                let positives = triplets
                    .objectness
                    .iter()
                    .enumerate()
                    .filter(|(_, (_, y))| *y)
                    .map(|(i, _)| i)
                    .collect();
                let negatives = triplets
                    .objectness
                    .iter()
                    .enumerate()
                    .filter(|(_, (_, y))| !*y)
                    .map(|(i, _)| i)
                    .collect();
                pools[index] = Some(ScenePools {
                    positives,
                    negatives,
                    triplets,
                });
            }
            let scene_pools = pools[index].as_ref().expect("pool just built");
            let ctx = SceneContext::new(&scene);

            // Objectness: half positives, half negatives; fall back to
            // whichever side exists when one is empty.
            let half = cfg.objectness_per_scene / 2;
            let quotas = [
                (&scene_pools.positives, half),
                (&scene_pools.negatives, cfg.objectness_per_scene - half),
            ];
            for (side, want) in quotas {
                let (side, want) = if side.is_empty() {
                    let other = if std::ptr::eq(side, &scene_pools.positives) {
                        &scene_pools.negatives
                    } else {
                        &scene_pools.positives
                    };
                    (other, want)
                } else {
                    (side, want)
                };
                if side.is_empty() {
                    continue;
                }
                for _ in 0..want {
                    let i = side[rng.gen_range(0..side.len())];
                    let (bbox, label) = scene_pools.triplets.objectness[i];
                    obj_batch.push(ObjSample::prepare(&ctx, &bbox, label, gamma, m));
                }
            }

            let loc = &scene_pools.triplets.localization;
            if !loc.is_empty() {
                for _ in 0..cfg.localization_per_scene {
                    let (bbox, targets) = &loc[rng.gen_range(0..loc.len())];
                    loc_batch.push(LocSample::prepare(&ctx, bbox, targets, gamma, m));
                }
            }
        }

        if loc_batch.is_empty() && obj_batch.is_empty() {
            // Nothing labeled in this batch; record a zero step.
            trace.push(trace.last().copied().unwrap_or(0.0));
            continue;
        }

        let (loss, grad) = loss_and_grad(&params, &loc_batch, &obj_batch);
        if !loss.is_finite() {
            return Err(TrainError::Diverged { iteration, loss });
        }
        trace.push(loss);

        let lr = if iteration >= cfg.lr_drop_at {
            cfg.learning_rate * 0.1
        } else {
            cfg.learning_rate
        };
        let mut flat = params.to_flat();
        for k in 0..flat.len() {
            velocity[k] = cfg.momentum * velocity[k] + grad[k];
            flat[k] -= lr * velocity[k];
        }
        params = ModelParams::from_flat(m, FEATURE_CHANNELS, &flat);
    }

    Ok(TrainOutcome {
        params,
        loss_trace: trace,
    })
}
