//! Greedy non-maximum suppression and tiered multi-threshold re-ordering.
//!
//! The re-ordering runs independent NMS passes at several IoU thresholds
//! and fills the output in tiers, so that for each budget `K_i` the top
//! `K_i` proposals approximate what a single NMS pass tuned for that
//! budget would return.

use serde::{Deserialize, Serialize};

use crate::engine::Proposal;
use crate::geometry::iou;

/// Ascending IoU thresholds paired with ascending proposal budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NmsSchedule {
    pub thresholds: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Default for NmsSchedule {
    fn default() -> Self {
        NmsSchedule {
            thresholds: vec![0.55, 0.60, 0.65, 0.75, 0.80, 0.85, 0.90, 0.95],
            counts: vec![10, 20, 40, 100, 200, 400, 1000, 2000],
        }
    }
}

impl NmsSchedule {
    pub fn validate(&self) -> Result<(), String> {
        if self.thresholds.is_empty() || self.thresholds.len() != self.counts.len() {
            return Err("thresholds and counts must be nonempty and equal length".into());
        }
        if !self.thresholds.windows(2).all(|w| w[0] < w[1]) {
            return Err("thresholds must be strictly ascending".into());
        }
        if !self.counts.windows(2).all(|w| w[0] < w[1]) {
            return Err("counts must be strictly ascending".into());
        }
        if self
            .thresholds
            .iter()
            .any(|t| !(0.0 < *t && *t <= 1.0))
        {
            return Err("thresholds must lie in (0, 1]".into());
        }
        Ok(())
    }

    pub fn tiers(&self) -> usize {
        self.thresholds.len()
    }

    /// The loosest threshold, used for the driver's single pre-pass.
    pub fn final_threshold(&self) -> f64 {
        *self.thresholds.last().expect("nonempty schedule")
    }

    /// The largest budget, the size of the final proposal set.
    pub fn final_count(&self) -> usize {
        *self.counts.last().expect("nonempty schedule")
    }
}

/// Indices of `props` surviving greedy NMS, in selection order.
fn greedy_nms_indices(props: &[Proposal], iou_thresh: f64) -> Vec<usize> {
    assert!(
        0.0 < iou_thresh && iou_thresh <= 1.0,
        "IoU threshold must lie in (0, 1]"
    );
    let mut order: Vec<usize> = (0..props.len()).collect();
    // stable: equal scores keep insertion order
    order.sort_by(|&a, &b| {
        props[b]
            .score
            .partial_cmp(&props[a].score)
            .expect("finite scores")
    });
    let mut suppressed = vec![false; props.len()];
    let mut keep = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(i);
        for &j in &order[pos + 1..] {
            if !suppressed[j] && iou(&props[i].bbox, &props[j].bbox) > iou_thresh {
                suppressed[j] = true;
            }
        }
    }
    keep
}

/// Greedy non-maximum suppression: repeatedly keep the highest-scoring
/// remaining proposal and drop everything overlapping it with IoU strictly
/// above the threshold. Score ties break by insertion order.
pub fn greedy_nms(props: &[Proposal], iou_thresh: f64) -> Vec<Proposal> {
    greedy_nms_indices(props, iou_thresh)
        .into_iter()
        .map(|i| props[i])
        .collect()
}

/// Multi-threshold re-ordering.
///
/// Each threshold gets its own NMS pass over the full input. Tiers are
/// then filled in ascending-threshold order: tier `i` (1-based) admits the
/// top `counts[i-1] - already_admitted` survivors of pass `i` not yet
/// admitted, rewriting each admitted score `o` to `o + (tiers - i)`. When
/// a pass runs out the shortfall carries over to the next tier.
///
/// Input scores must lie in `[0, 1]` so that tier ranks dominate raw
/// scores in the rewritten ordering.
pub fn multithreshold_reorder(props: &[Proposal], sched: &NmsSchedule) -> Vec<Proposal> {
    sched.validate().expect("invalid NMS schedule");
    assert!(
        props
            .iter()
            .all(|p| (0.0..=1.0).contains(&p.score)),
        "input scores must lie in [0, 1]"
    );
    let n_tiers = sched.tiers();
    let mut admitted = vec![false; props.len()];
    let mut out: Vec<Proposal> = Vec::new();
    for (tier, (&thresh, &budget)) in sched
        .thresholds
        .iter()
        .zip(&sched.counts)
        .enumerate()
    {
        let pass = greedy_nms_indices(props, thresh);
        let bonus = (n_tiers - tier - 1) as f64;
        for i in pass {
            if out.len() >= budget {
                break;
            }
            if admitted[i] {
                continue;
            }
            admitted[i] = true;
            out.push(Proposal {
                bbox: props[i].bbox,
                score: props[i].score + bonus,
            });
        }
    }
    out
}
