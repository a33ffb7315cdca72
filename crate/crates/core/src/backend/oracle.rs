//! Ideal and noise-corrupted refinement answers derived from ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::RefineResult;
use crate::geometry::{closest_object, enlarge, iou, BBox};
use crate::inout::{make_targets, ProbVectors, TargetVectors};
use crate::scene::SyntheticScene;

/// Ideal refinement: the target vectors of the closest ground-truth object
/// inside the enlarged search region, cast to probabilities, scored by the
/// query's best IoU against any object.
///
/// With no objects in the scene the probabilities are all near-zero and
/// the objectness is 0. Note the decoded box can only recover the part of
/// the target that falls inside the search region.
pub fn oracle_refine(scene: &SyntheticScene, query: &BBox, gamma: f64, m: usize) -> RefineResult {
    let region = enlarge(query, gamma, scene.extent);
    let gts = scene.gt_boxes();
    let targets = match closest_object(query, &gts) {
        Some(i) => make_targets(region, &gts[i], m),
        None => TargetVectors {
            tx: vec![false; m],
            ty: vec![false; m],
        },
    };
    let objectness = gts
        .iter()
        .map(|g| iou(query, g))
        .fold(0.0f64, f64::max);
    RefineResult::new(targets.to_probs(region), objectness)
}

/// [`oracle_refine`] with each probability element independently replaced,
/// with probability `noise`, by a uniform random value in `[0, 1]`.
/// Deterministic for a fixed `rng_seed`.
pub fn noisy_oracle_refine(
    scene: &SyntheticScene,
    query: &BBox,
    gamma: f64,
    m: usize,
    noise: f64,
    rng_seed: u64,
) -> RefineResult {
    assert!((0.0..=1.0).contains(&noise), "noise fraction outside [0, 1]");
    let clean = oracle_refine(scene, query, gamma, m);
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let mut corrupt = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&p| {
                if rng.gen::<f64>() < noise {
                    rng.gen::<f64>()
                } else {
                    p
                }
            })
            .collect()
    };
    let px = corrupt(clean.probs.px());
    let py = corrupt(clean.probs.py());
    RefineResult::new(
        ProbVectors::new(px, py, clean.probs.region()),
        clean.objectness,
    )
}
