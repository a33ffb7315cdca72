//! The active proposal search driver: score and refine a working set of
//! boxes for several iterations, accumulate every scored refinement, then
//! suppress and re-order the candidates.

use serde::{Deserialize, Serialize};

use crate::backend::{Refiner, SceneContext};
use crate::geometry::{iou, BBox};
use crate::inout::decode_ml;
use crate::nms::{greedy_nms, multithreshold_reorder, NmsSchedule};
use crate::scene::SyntheticScene;
use crate::seeds::{generate_seeds, SeedConfig};

/// A box with its objectness score. Scores are probabilities in `[0, 1]`
/// up to the final re-ordering step, which rewrites them with additive
/// tier bonuses.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub bbox: BBox,
    pub score: f64,
}

/// All tunables of the proposal engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Search-region enlargement factor.
    pub gamma: f64,
    /// Discretization of each search region (columns and rows).
    pub m: usize,
    /// Total refinement repetitions, including the pass over the seeds.
    pub iterations: usize,
    /// Working-set truncation applied after the first repetition.
    pub keep_after_first: usize,
    /// Freeze a chain once two consecutive refinements overlap above this
    /// IoU; `None` disables early stopping.
    pub early_stop_iou: Option<f64>,
    pub seed_cfg: SeedConfig,
    pub nms_schedule: NmsSchedule,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            gamma: 1.8,
            m: 56,
            iterations: 5,
            keep_after_first: 2000,
            early_stop_iou: None,
            seed_cfg: SeedConfig::default(),
            nms_schedule: NmsSchedule::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.gamma < 1.0 {
            return Err("gamma must be at least 1".into());
        }
        if self.m == 0 {
            return Err("m must be positive".into());
        }
        if self.iterations == 0 {
            return Err("iterations must be at least 1".into());
        }
        if self.keep_after_first == 0 {
            return Err("keep_after_first must be at least 1".into());
        }
        if let Some(t) = self.early_stop_iou {
            if !(0.0 < t && t <= 1.0) {
                return Err("early_stop_iou must lie in (0, 1]".into());
            }
        }
        self.seed_cfg.validate()?;
        self.nms_schedule.validate()
    }
}

/// One chain slot of the working set.
struct Chain {
    /// Box to evaluate next (the latest refinement, or the seed).
    current: BBox,
    /// Previous refinement output, for the early-stop comparison.
    previous: Option<BBox>,
    /// Frozen chains skip the backend; their last result is re-appended.
    frozen: Option<Proposal>,
}

/// Everything observable about one search run.
pub struct ProposeTrace {
    /// Final re-ordered proposals.
    pub proposals: Vec<Proposal>,
    /// Scored refinements appended at each iteration.
    pub per_iteration: Vec<Vec<Proposal>>,
    /// Candidate set size before the final NMS.
    pub candidate_count: usize,
    /// Number of actual backend evaluations (frozen chains excluded).
    pub backend_evals: usize,
}

/// Run the full search and return the re-ordered proposal list.
pub fn propose(scene: &SyntheticScene, backend: &dyn Refiner, cfg: &EngineConfig) -> Vec<Proposal> {
    propose_traced(scene, backend, cfg).proposals
}

/// [`propose`] with per-iteration candidates and evaluation counts kept
/// for inspection.
pub fn propose_traced(
    scene: &SyntheticScene,
    backend: &dyn Refiner,
    cfg: &EngineConfig,
) -> ProposeTrace {
    cfg.validate().expect("invalid engine config");
    let ctx = SceneContext::new(scene);
    let seeds = generate_seeds(scene.extent, &cfg.seed_cfg);
    if seeds.is_empty() {
        return ProposeTrace {
            proposals: Vec::new(),
            per_iteration: Vec::new(),
            candidate_count: 0,
            backend_evals: 0,
        };
    }

    let mut chains: Vec<Chain> = seeds
        .into_iter()
        .map(|b| Chain {
            current: b,
            previous: None,
            frozen: None,
        })
        .collect();
    let mut candidates: Vec<Proposal> = Vec::new();
    let mut per_iteration: Vec<Vec<Proposal>> = Vec::new();
    let mut backend_evals = 0usize;

    for t in 0..cfg.iterations {
        let mut appended = Vec::with_capacity(chains.len());
        for chain in chains.iter_mut() {
            if let Some(last) = chain.frozen {
                appended.push(last);
                continue;
            }
            let result = backend.refine(&ctx, chain.current, cfg.gamma, cfg.m);
            backend_evals += 1;
            let refined = decode_ml(&result.probs);
            let scored = Proposal {
                bbox: refined,
                score: result.objectness,
            };
            appended.push(scored);
            if let Some(stop_iou) = cfg.early_stop_iou {
                if let Some(prev) = chain.previous {
                    if iou(&prev, &refined) > stop_iou {
                        chain.frozen = Some(scored);
                    }
                }
            }
            chain.previous = Some(refined);
            chain.current = refined;
        }
        candidates.extend(appended.iter().copied());
        per_iteration.push(appended.clone());

        // After the first repetition only the best-scored chains continue.
        if t == 0 && chains.len() > cfg.keep_after_first {
            let mut order: Vec<usize> = (0..chains.len()).collect();
            order.sort_by(|&a, &b| {
                appended[b]
                    .score
                    .partial_cmp(&appended[a].score)
                    .expect("finite scores")
                    .then_with(|| {
                        let (x, y) = (&appended[a].bbox, &appended[b].bbox);
                        (x.x1, x.y1, x.x2, x.y2)
                            .partial_cmp(&(y.x1, y.y1, y.x2, y.y2))
                            .expect("finite boxes")
                    })
                    .then(a.cmp(&b))
            });
            order.truncate(cfg.keep_after_first);
            order.sort_unstable();
            let mut survivors = order.into_iter().peekable();
            let mut idx = 0usize;
            chains.retain(|_| {
                let keep = survivors.peek() == Some(&idx);
                if keep {
                    survivors.next();
                }
                idx += 1;
                keep
            });
        }
    }

    let candidate_count = candidates.len();
    let kept = greedy_nms(&candidates, cfg.nms_schedule.final_threshold());
    let top: Vec<Proposal> = kept
        .into_iter()
        .take(cfg.nms_schedule.final_count())
        .collect();
    let proposals = multithreshold_reorder(&top, &cfg.nms_schedule);
    ProposeTrace {
        proposals,
        per_iteration,
        candidate_count,
        backend_evals,
    }
}

/// A dense grid of values in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Render where the candidate boxes of each iteration sit: every grid cell
/// counts the boxes overlapping it, normalized by the maximum count.
pub fn attention_map(
    per_iteration: &[Vec<Proposal>],
    extent: crate::geometry::ImageExtent,
    cell: u32,
) -> Vec<Heatmap> {
    assert!(cell >= 1, "cell size must be at least 1 px");
    let grid_w = (extent.width as f64 / cell as f64).ceil() as usize;
    let grid_h = (extent.height as f64 / cell as f64).ceil() as usize;
    per_iteration
        .iter()
        .map(|props| {
            let mut counts = vec![0u32; grid_w * grid_h];
            for p in props {
                let b = &p.bbox;
                let gx1 = ((b.x1 / cell as f64).floor().max(0.0)) as usize;
                let gy1 = ((b.y1 / cell as f64).floor().max(0.0)) as usize;
                let gx2 = ((b.x2 / cell as f64).ceil() as usize).min(grid_w);
                let gy2 = ((b.y2 / cell as f64).ceil() as usize).min(grid_h);
                for gy in gy1..gy2 {
                    for gx in gx1..gx2 {
                        let cx1 = (gx * cell as usize) as f64;
                        let cy1 = (gy * cell as usize) as f64;
                        let cell_box = BBox::new(
                            cx1,
                            cy1,
                            cx1 + cell as f64,
                            cy1 + cell as f64,
                        );
                        if b.intersection_area(&cell_box) > 0.0 {
                            counts[gy * grid_w + gx] += 1;
                        }
                    }
                }
            }
            let max = *counts.iter().max().unwrap_or(&0);
            let values = counts
                .iter()
                .map(|&c| {
                    if max == 0 {
                        0.0
                    } else {
                        c as f64 / max as f64
                    }
                })
                .collect();
            Heatmap {
                width: grid_w,
                height: grid_h,
                values,
            }
        })
        .collect()
}
