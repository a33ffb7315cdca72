//! Average-recall evaluation of proposal lists against ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::Proposal;
use crate::geometry::{iou, BBox};

/// The ten matching thresholds AR averages over: 0.50, 0.55, ..., 0.95.
pub fn ar_thresholds() -> Vec<f64> {
    (10..20).map(|i| i as f64 * 0.05).collect()
}

/// Object-size bands by ground-truth box area.
pub const SMALL_MAX_AREA: f64 = 32.0 * 32.0;
pub const MEDIUM_MAX_AREA: f64 = 96.0 * 96.0;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SizeBand {
    Small,
    Medium,
    Large,
}

pub fn size_band(gt: &BBox) -> SizeBand {
    let a = gt.area();
    if a < SMALL_MAX_AREA {
        SizeBand::Small
    } else if a <= MEDIUM_MAX_AREA {
        SizeBand::Medium
    } else {
        SizeBand::Large
    }
}

/// AR of one size band; `vacuous` marks bands with no ground truth, which
/// report 1 by convention.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandAr {
    pub value: f64,
    pub vacuous: bool,
}

/// Evaluation report: AR per proposal budget, size-stratified AR at 100
/// proposals, and recall-vs-IoU curves per budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArReport {
    pub ar_at: BTreeMap<usize, f64>,
    pub size_ar_at_100: BTreeMap<String, BandAr>,
    pub recall_curves: BTreeMap<usize, Vec<(f64, f64)>>,
}

fn top_k(proposals: &[Proposal], k: usize) -> Vec<&Proposal> {
    let mut order: Vec<&Proposal> = proposals.iter().collect();
    order.sort_by(|a, b| b.score.partial_cmp(&a.score).expect("finite scores"));
    order.truncate(k);
    order
}

/// Number of ground truths matched by the given proposals at one IoU
/// threshold, greedily in proposal-score order; each proposal consumes at
/// most one ground truth (the highest-IoU unmatched one).
fn matched_count(ordered: &[&Proposal], gts: &[BBox], iou_thresh: f64) -> usize {
    let mut taken = vec![false; gts.len()];
    let mut matched = 0;
    for p in ordered {
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if taken[gi] {
                continue;
            }
            let v = iou(&p.bbox, g);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((gi, v));
            }
        }
        if let Some((gi, v)) = best {
            if v >= iou_thresh {
                taken[gi] = true;
                matched += 1;
            }
        }
    }
    matched
}

/// Fraction of ground truths recalled by the top-`k` proposals at the
/// given IoU threshold. Defined as 1 when there is nothing to recall.
pub fn recall(proposals: &[Proposal], gts: &[BBox], k: usize, iou_thresh: f64) -> f64 {
    if gts.is_empty() {
        return 1.0;
    }
    let ordered = top_k(proposals, k);
    matched_count(&ordered, gts, iou_thresh) as f64 / gts.len() as f64
}

/// Mean recall over the ten thresholds 0.50:0.05:0.95 at budget `k`.
pub fn average_recall(proposals: &[Proposal], gts: &[BBox], k: usize) -> f64 {
    assert!(k >= 1, "budget must be at least 1");
    let ts = ar_thresholds();
    ts.iter()
        .map(|&t| recall(proposals, gts, k, t))
        .sum::<f64>()
        / ts.len() as f64
}

/// Dataset-level AR: per threshold, recall counts are pooled over all
/// images (each image contributes its own top-`k`), then averaged over
/// thresholds. Defined as 1 when no image has ground truth.
pub fn dataset_average_recall(per_image: &[(&[Proposal], &[BBox])], k: usize) -> f64 {
    assert!(k >= 1, "budget must be at least 1");
    let total_gts: usize = per_image.iter().map(|(_, g)| g.len()).sum();
    if total_gts == 0 {
        return 1.0;
    }
    let ts = ar_thresholds();
    let mut acc = 0.0;
    for &t in &ts {
        let mut matched = 0usize;
        for (props, gts) in per_image {
            let ordered = top_k(props, k);
            matched += matched_count(&ordered, gts, t);
        }
        acc += matched as f64 / total_gts as f64;
    }
    acc / ts.len() as f64
}

/// AR at budget `k` restricted to ground truths of each size band. Bands
/// without ground truth report 1, flagged as vacuous.
pub fn size_stratified_ar(
    proposals: &[Proposal],
    gts: &[BBox],
    k: usize,
) -> BTreeMap<String, BandAr> {
    let mut out = BTreeMap::new();
    for (name, band) in [
        ("small", SizeBand::Small),
        ("medium", SizeBand::Medium),
        ("large", SizeBand::Large),
    ] {
        let banded: Vec<BBox> = gts
            .iter()
            .filter(|g| size_band(g) == band)
            .copied()
            .collect();
        let entry = if banded.is_empty() {
            BandAr {
                value: 1.0,
                vacuous: true,
            }
        } else {
            BandAr {
                value: average_recall(proposals, &banded, k),
                vacuous: false,
            }
        };
        out.insert(name.to_string(), entry);
    }
    out
}

/// Recall at each requested threshold for the top-`k` proposals.
pub fn recall_vs_iou_curve(
    proposals: &[Proposal],
    gts: &[BBox],
    k: usize,
    thresholds: &[f64],
) -> Vec<(f64, f64)> {
    thresholds
        .iter()
        .map(|&t| (t, recall(proposals, gts, k, t)))
        .collect()
}

/// Full report over one image set.
pub fn build_report(
    per_image: &[(&[Proposal], &[BBox])],
    ks: &[usize],
) -> ArReport {
    let mut ar_at = BTreeMap::new();
    for &k in ks {
        ar_at.insert(k, dataset_average_recall(per_image, k));
    }

    // Size stratification at 100 proposals, pooled over images.
    let mut size_ar = BTreeMap::new();
    for (name, band) in [
        ("small", SizeBand::Small),
        ("medium", SizeBand::Medium),
        ("large", SizeBand::Large),
    ] {
        let filtered: Vec<(&[Proposal], Vec<BBox>)> = per_image
            .iter()
            .map(|(p, g)| {
                (
                    *p,
                    g.iter()
                        .filter(|gt| size_band(gt) == band)
                        .copied()
                        .collect::<Vec<BBox>>(),
                )
            })
            .collect();
        let total: usize = filtered.iter().map(|(_, g)| g.len()).sum();
        let entry = if total == 0 {
            BandAr {
                value: 1.0,
                vacuous: true,
            }
        } else {
            let views: Vec<(&[Proposal], &[BBox])> = filtered
                .iter()
                .map(|(p, g)| (*p, g.as_slice()))
                .collect();
            BandAr {
                value: dataset_average_recall(&views, 100),
                vacuous: false,
            }
        };
        size_ar.insert(name.to_string(), entry);
    }

    let mut curves = BTreeMap::new();
    let ts = ar_thresholds();
    for &k in ks {
        let total_gts: usize = per_image.iter().map(|(_, g)| g.len()).sum();
        let curve = ts
            .iter()
            .map(|&t| {
                if total_gts == 0 {
                    return (t, 1.0);
                }
                let matched: usize = per_image
                    .iter()
                    .map(|(props, gts)| {
                        let ordered = top_k(props, k);
                        matched_count(&ordered, gts, t)
                    })
                    .sum();
                (t, matched as f64 / total_gts as f64)
            })
            .collect();
        curves.insert(k, curve);
    }

    ArReport {
        ar_at,
        size_ar_at_100: size_ar,
        recall_curves: curves,
    }
}
