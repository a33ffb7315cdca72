//! In-out membership probabilities over a search region, training-target
//! construction and maximum-likelihood box decoding.
//!
//! A search region is discretized into `M` columns and `M` rows; `px[i]`
//! (`py[i]`) is the probability that column (row) `i` lies inside the target
//! box. Decoding picks, per axis independently, the contiguous run of
//! elements that maximizes the in/out log-likelihood and maps the run back
//! to continuous coordinates.

use crate::geometry::BBox;

/// Probabilities are clamped into `[EPS, 1 - EPS]` before any logarithm.
pub const EPS: f64 = 1e-6;

/// Per-axis in-out probability vectors over a search region.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVectors {
    px: Vec<f64>,
    py: Vec<f64>,
    region: BBox,
}

impl ProbVectors {
    pub fn new(px: Vec<f64>, py: Vec<f64>, region: BBox) -> Self {
        assert_eq!(px.len(), py.len(), "px and py must have equal length");
        assert!(!px.is_empty(), "discretization must be at least 1");
        assert!(region.area() > 0.0, "search region must have positive area");
        assert!(
            px.iter().chain(py.iter()).all(|p| (0.0..=1.0).contains(p)),
            "probabilities must lie in [0, 1]"
        );
        ProbVectors { px, py, region }
    }

    pub fn m(&self) -> usize {
        self.px.len()
    }

    pub fn px(&self) -> &[f64] {
        &self.px
    }

    pub fn py(&self) -> &[f64] {
        &self.py
    }

    pub fn region(&self) -> BBox {
        self.region
    }
}

/// Binary target vectors for the localization task. The 1-entries of each
/// vector form one contiguous (possibly empty) run.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetVectors {
    pub tx: Vec<bool>,
    pub ty: Vec<bool>,
}

impl TargetVectors {
    /// Cast targets to probabilities: 0 becomes `EPS`, 1 becomes `1 - EPS`.
    pub fn to_probs(&self, region: BBox) -> ProbVectors {
        let cast = |v: &[bool]| -> Vec<f64> {
            v.iter().map(|&t| if t { 1.0 - EPS } else { EPS }).collect()
        };
        ProbVectors::new(cast(&self.tx), cast(&self.ty), region)
    }

    fn run_is_contiguous(v: &[bool]) -> bool {
        let first = v.iter().position(|&t| t);
        let last = v.iter().rposition(|&t| t);
        match (first, last) {
            (Some(a), Some(b)) => v[a..=b].iter().all(|&t| t),
            _ => true,
        }
    }

    pub fn is_contiguous(&self) -> bool {
        Self::run_is_contiguous(&self.tx) && Self::run_is_contiguous(&self.ty)
    }
}

/// Build the binary target vectors for `target` inside `region`.
///
/// The region splits into `m` equal columns and rows; an element is marked
/// 1 when its center falls inside the target's span on that axis. A target
/// that does not intersect the region at all yields all-zero vectors.
pub fn make_targets(region: BBox, target: &BBox, m: usize) -> TargetVectors {
    assert!(m >= 1, "discretization must be at least 1");
    assert!(region.area() > 0.0, "search region must have positive area");

    let disjoint = region.intersection_area(target) <= 0.0;
    let axis = |lo: f64, span: f64, t_lo: f64, t_hi: f64| -> Vec<bool> {
        let cell = span / m as f64;
        (0..m)
            .map(|i| {
                if disjoint {
                    return false;
                }
                let center = lo + (i as f64 + 0.5) * cell;
                t_lo <= center && center <= t_hi
            })
            .collect()
    };
    TargetVectors {
        tx: axis(region.x1, region.width(), target.x1, target.x2),
        ty: axis(region.y1, region.height(), target.y1, target.y2),
    }
}

/// Log-likelihood weights: `w[i] = log p[i] - log (1 - p[i])` after clamping.
fn logit_weights(p: &[f64]) -> Vec<f64> {
    p.iter()
        .map(|&v| {
            let v = v.clamp(EPS, 1.0 - EPS);
            v.ln() - (1.0 - v).ln()
        })
        .collect()
}

/// Best run `(lo, hi)` (inclusive, 0-based) of `w` by summed weight.
///
/// Maximizing the in/out likelihood over runs reduces to maximizing the sum
/// of logit weights inside the run, since the all-out term is constant.
/// Runs are scanned with an incremental prefix sum, O(m^2) total. Ties go
/// to the smallest start, then the smallest end.
fn best_run(w: &[f64]) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_sum = f64::NEG_INFINITY;
    for lo in 0..w.len() {
        let mut sum = 0.0;
        for (hi, &weight) in w.iter().enumerate().skip(lo) {
            sum += weight;
            if sum > best_sum {
                best_sum = sum;
                best = (lo, hi);
            }
        }
    }
    best
}

fn run_to_span(lo_idx: usize, hi_idx: usize, lo: f64, span: f64, m: usize) -> (f64, f64) {
    let cell = span / m as f64;
    (lo + lo_idx as f64 * cell, lo + (hi_idx + 1) as f64 * cell)
}

/// Maximum-likelihood decode: per axis, the run of elements maximizing
/// `sum_in log p + sum_out log(1-p)`, mapped back to the outer edges of the
/// chosen columns/rows. The result always lies inside the region.
pub fn decode_ml(p: &ProbVectors) -> BBox {
    let m = p.m();
    let region = p.region();
    let (lx, rx) = best_run(&logit_weights(p.px()));
    let (ly, ry) = best_run(&logit_weights(p.py()));
    let (x1, x2) = run_to_span(lx, rx, region.x1, region.width(), m);
    let (y1, y2) = run_to_span(ly, ry, region.y1, region.height(), m);
    BBox::new(x1, y1, x2, y2)
}

/// Brute-force decoder used as an equivalence oracle for [`decode_ml`].
///
/// Evaluates the full likelihood `sum_in log p + sum_out log(1-p)` for every
/// `(lo, hi)` run from scratch, with the same tie-break rule (smallest
/// start, then smallest end).
pub fn decode_exhaustive(p: &ProbVectors) -> BBox {
    let m = p.m();
    let region = p.region();
    let full = |probs: &[f64]| -> (usize, usize) {
        let clamped: Vec<f64> = probs.iter().map(|&v| v.clamp(EPS, 1.0 - EPS)).collect();
        let mut best = (0, 0);
        let mut best_ll = f64::NEG_INFINITY;
        for lo in 0..m {
            for hi in lo..m {
                let mut ll = 0.0;
                for (i, &v) in clamped.iter().enumerate() {
                    ll += if i >= lo && i <= hi {
                        v.ln()
                    } else {
                        (1.0 - v).ln()
                    };
                }
                if ll > best_ll {
                    best_ll = ll;
                    best = (lo, hi);
                }
            }
        }
        best
    };
    let (lx, rx) = full(p.px());
    let (ly, ry) = full(p.py());
    let (x1, x2) = run_to_span(lx, rx, region.x1, region.width(), m);
    let (y1, y2) = run_to_span(ly, ry, region.y1, region.height(), m);
    BBox::new(x1, y1, x2, y2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::iou;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn region40() -> BBox {
        BBox::new(0.0, 0.0, 40.0, 40.0)
    }

    #[test]
    fn targets_all_ones_when_target_covers_region() {
        let t = make_targets(region40(), &BBox::new(-5.0, -5.0, 45.0, 45.0), 4);
        assert_eq!(t.tx, vec![true; 4]);
        assert_eq!(t.ty, vec![true; 4]);
    }

    #[test]
    fn targets_half_width() {
        // column centers at 5, 15, 25, 35; the first two are <= 20
        let t = make_targets(region40(), &BBox::new(0.0, 0.0, 20.0, 40.0), 4);
        assert_eq!(t.tx, vec![true, true, false, false]);
        assert_eq!(t.ty, vec![true; 4]);
    }

    #[test]
    fn targets_disjoint_are_all_zero() {
        let t = make_targets(region40(), &BBox::new(50.0, 50.0, 60.0, 60.0), 4);
        assert_eq!(t.tx, vec![false; 4]);
        assert_eq!(t.ty, vec![false; 4]);
    }

    #[test]
    fn targets_offset_in_one_axis_only_still_zero() {
        // Overlaps the region's x-span but lies fully below it.
        let t = make_targets(region40(), &BBox::new(10.0, 50.0, 30.0, 60.0), 4);
        assert_eq!(t.tx, vec![false; 4]);
        assert_eq!(t.ty, vec![false; 4]);
    }

    #[test]
    fn decode_ml_picks_high_probability_prefix() {
        let p = ProbVectors::new(
            vec![0.9, 0.9, 0.1, 0.1],
            vec![0.9, 0.9, 0.1, 0.1],
            region40(),
        );
        assert_eq!(decode_ml(&p), BBox::new(0.0, 0.0, 20.0, 20.0));
    }

    #[test]
    fn decode_ml_all_high_gives_full_region() {
        let p = ProbVectors::new(vec![0.99; 8], vec![0.99; 8], region40());
        assert_eq!(decode_ml(&p), region40());
    }

    #[test]
    fn decode_exhaustive_uniform_above_half_gives_full_run() {
        let p = ProbVectors::new(vec![0.51; 6], vec![0.51; 6], region40());
        assert_eq!(decode_exhaustive(&p), region40());
    }

    #[test]
    fn decode_exhaustive_single_spike() {
        let mut px = vec![0.01; 8];
        px[2] = 0.99;
        let p = ProbVectors::new(px.clone(), px, region40());
        let b = decode_exhaustive(&p);
        // run [2,2] in an 8-cell grid over 40px: cell = 5
        assert_eq!(b, BBox::new(10.0, 10.0, 15.0, 15.0));
    }

    #[test]
    fn decode_roundtrip_recovers_target_within_one_cell() {
        let region = BBox::new(10.0, 20.0, 90.0, 80.0);
        let g = BBox::new(25.0, 30.0, 60.0, 70.0);
        let m = 56;
        let decoded = decode_ml(&make_targets(region, &g, m).to_probs(region));
        let cell_w = region.width() / m as f64;
        let cell_h = region.height() / m as f64;
        assert!((decoded.x1 - g.x1).abs() <= cell_w);
        assert!((decoded.x2 - g.x2).abs() <= cell_w);
        assert!((decoded.y1 - g.y1).abs() <= cell_h);
        assert!((decoded.y2 - g.y2).abs() <= cell_h);
    }

    fn random_probs(rng: &mut ChaCha12Rng, m: usize) -> ProbVectors {
        let px = (0..m).map(|_| rng.gen::<f64>()).collect();
        let py = (0..m).map(|_| rng.gen::<f64>()).collect();
        ProbVectors::new(px, py, region40())
    }

    #[test]
    fn decoder_matches_oracle_on_random_inputs() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for trial in 0..1000 {
            let m = rng.gen_range(1..=20);
            let p = random_probs(&mut rng, m);
            assert_eq!(
                decode_ml(&p),
                decode_exhaustive(&p),
                "mismatch at trial {trial} with m={m}"
            );
        }
    }

    #[test]
    fn decode_invariant_under_logit_scaling() {
        // Scaling every log-term by a positive constant maps p to
        // sigmoid(c * logit(p)) and must not change the decoded runs.
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let scale = |p: &[f64], c: f64| -> Vec<f64> {
            p.iter()
                .map(|&v| {
                    let z = c * (v.ln() - (1.0 - v).ln());
                    1.0 / (1.0 + (-z).exp())
                })
                .collect()
        };
        for _ in 0..200 {
            let m = rng.gen_range(1..=16);
            let p = random_probs(&mut rng, m);
            for c in [0.5, 2.0] {
                let scaled =
                    ProbVectors::new(scale(p.px(), c), scale(p.py(), c), p.region());
                assert_eq!(decode_ml(&p), decode_ml(&scaled));
            }
        }
    }

    proptest! {
        #[test]
        fn decode_output_contained_in_region(seed in 0u64..5000) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let m = rng.gen_range(1..=24);
            let p = random_probs(&mut rng, m);
            let b = decode_ml(&p);
            prop_assert!(p.region().contains(&b));
            prop_assert!(b.area() > 0.0);
        }

        #[test]
        fn roundtrip_within_one_cell(
            gx1 in 0.0..70.0f64,
            gy1 in 0.0..50.0f64,
            w in 4.0..30.0f64,
            h in 4.0..30.0f64,
            m in 4usize..32,
        ) {
            let region = BBox::new(0.0, 0.0, 100.0, 80.0);
            let g = BBox::new(gx1, gy1, (gx1 + w).min(100.0), (gy1 + h).min(80.0));
            prop_assume!(iou(&g, &region) > 0.0);
            // keep targets at least two cells wide so the run is nonempty
            let cell_w = region.width() / m as f64;
            let cell_h = region.height() / m as f64;
            prop_assume!(g.width() >= 2.0 * cell_w && g.height() >= 2.0 * cell_h);
            let decoded = decode_ml(&make_targets(region, &g, m).to_probs(region));
            prop_assert!((decoded.x1 - g.x1).abs() <= cell_w);
            prop_assert!((decoded.x2 - g.x2).abs() <= cell_w);
            prop_assert!((decoded.y1 - g.y1).abs() <= cell_h);
            prop_assert!((decoded.y2 - g.y2).abs() <= cell_h);
        }

        #[test]
        fn targets_runs_are_contiguous(
            gx1 in -20.0..50.0f64,
            gy1 in -20.0..50.0f64,
            w in 0.5..60.0f64,
            h in 0.5..60.0f64,
            m in 1usize..24,
        ) {
            let g = BBox::new(gx1, gy1, gx1 + w, gy1 + h);
            let t = make_targets(region40(), &g, m);
            prop_assert!(t.is_contiguous());
        }
    }
}
