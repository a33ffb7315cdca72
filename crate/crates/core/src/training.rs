//! Training-pool construction and labeling: seed boxes plus their ideal
//! and noise-corrupted refinement chains, labeled by IoU thresholds.

use std::collections::HashSet;

use crate::backend::{mix_box_seed, noisy_oracle_refine, oracle_refine, NoisyRefiner};
use crate::geometry::{closest_object, enlarge, iou, BBox};
use crate::inout::{decode_ml, make_targets, TargetVectors};
use crate::scene::SyntheticScene;
use crate::seeds::{generate_seeds, SeedConfig};

/// Labeled triplets for the two training tasks.
///
/// Localization boxes overlap some object at IoU >= 0.5 and carry the
/// target vectors of their closest object. Objectness positives overlap at
/// IoU >= 0.5, negatives at < 0.4; the band in between is left out.
#[derive(Clone, Debug)]
pub struct TrainingTriplets {
    pub localization: Vec<(BBox, TargetVectors)>,
    pub objectness: Vec<(BBox, bool)>,
}

/// IoU at or above which a box is a positive (and a localization box).
pub const POSITIVE_IOU: f64 = 0.5;
/// IoU below which a box is a negative.
pub const NEGATIVE_IOU: f64 = 0.4;

fn bits_key(b: &BBox) -> (u64, u64, u64, u64) {
    (
        b.x1.to_bits(),
        b.y1.to_bits(),
        b.x2.to_bits(),
        b.y2.to_bits(),
    )
}

/// Build the pool of boxes the search is likely to visit: the seed grid,
/// two generations of ideal refinements, and two generations of
/// noise-corrupted refinements, deduplicated by exact coordinates in
/// first-appearance order. Deterministic for a fixed `rng_seed`.
pub fn build_pool(
    scene: &SyntheticScene,
    seed_cfg: &SeedConfig,
    gamma: f64,
    m: usize,
    rng_seed: u64,
) -> Vec<BBox> {
    let seeds = generate_seeds(scene.extent, seed_cfg);

    let refine_clean = |boxes: &[BBox]| -> Vec<BBox> {
        boxes
            .iter()
            .map(|b| decode_ml(&oracle_refine(scene, b, gamma, m).probs))
            .collect()
    };
    let refine_noisy = |boxes: &[BBox]| -> Vec<BBox> {
        boxes
            .iter()
            .map(|b| {
                let call_seed = mix_box_seed(rng_seed, b);
                let r = noisy_oracle_refine(
                    scene,
                    b,
                    gamma,
                    m,
                    NoisyRefiner::DEFAULT_NOISE,
                    call_seed,
                );
                decode_ml(&r.probs)
            })
            .collect()
    };

    let clean1 = refine_clean(&seeds);
    let clean2 = refine_clean(&clean1);
    let noisy1 = refine_noisy(&seeds);
    let noisy2 = refine_noisy(&noisy1);

    let mut seen = HashSet::new();
    let mut pool = Vec::new();
    for b in seeds
        .iter()
        .chain(&clean1)
        .chain(&clean2)
        .chain(&noisy1)
        .chain(&noisy2)
    {
        if seen.insert(bits_key(b)) {
            pool.push(*b);
        }
    }
    pool
}

/// Label every pool box for the two tasks.
pub fn label_pool(
    pool: &[BBox],
    scene: &SyntheticScene,
    gamma: f64,
    m: usize,
) -> TrainingTriplets {
    assert!(!pool.is_empty(), "pool must be nonempty");
    let gts = scene.gt_boxes();
    let mut localization = Vec::new();
    let mut objectness = Vec::new();
    for b in pool {
        let best = gts.iter().map(|g| iou(b, g)).fold(0.0f64, f64::max);
        if best >= POSITIVE_IOU {
            objectness.push((*b, true));
            let target = &gts[closest_object(b, &gts).expect("positive box has a gt")];
            let region = enlarge(b, gamma, scene.extent);
            localization.push((*b, make_targets(region, target, m)));
        } else if best < NEGATIVE_IOU {
            objectness.push((*b, false));
        }
        // boxes in [NEGATIVE_IOU, POSITIVE_IOU) are dropped from both tasks
    }
    TrainingTriplets {
        localization,
        objectness,
    }
}
