//! The trainable refinement model: a logistic head shared across all
//! columns (and one across all rows) over pooled region features, plus a
//! logistic objectness head over a box-vs-region contrast descriptor.

use serde::{Deserialize, Serialize};

use super::{RefineResult, SceneContext};
use crate::geometry::{enlarge, BBox};
use crate::inout::{ProbVectors, TargetVectors, EPS};

pub const PARAM_VERSION: u32 = 1;

/// Learnable parameters. One weight vector is shared by every column, one
/// by every row, one scores the objectness contrast; `m` and `c` record the
/// discretization and channel count the model was trained with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub version: u32,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub wx: Vec<f64>,
    pub bx: f64,
    pub wy: Vec<f64>,
    pub by: f64,
    pub wo: Vec<f64>,
    pub bo: f64,
}

impl ModelParams {
    pub fn zeros(m: usize, c: usize) -> Self {
        ModelParams {
            version: PARAM_VERSION,
            m,
            c,
            wx: vec![0.0; c],
            bx: 0.0,
            wy: vec![0.0; c],
            by: 0.0,
            wo: vec![0.0; c],
            bo: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.wx.len() != self.c || self.wy.len() != self.c || self.wo.len() != self.c {
            return Err("weight vector length does not match channel count".into());
        }
        let finite = self
            .wx
            .iter()
            .chain(&self.wy)
            .chain(&self.wo)
            .chain([&self.bx, &self.by, &self.bo])
            .all(|v| v.is_finite());
        if !finite {
            return Err("parameters must be finite".into());
        }
        Ok(())
    }

    /// Number of scalar parameters.
    pub fn dim(&self) -> usize {
        3 * self.c + 3
    }

    /// Flatten as `[wx.., bx, wy.., by, wo.., bo]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.wx);
        v.push(self.bx);
        v.extend_from_slice(&self.wy);
        v.push(self.by);
        v.extend_from_slice(&self.wo);
        v.push(self.bo);
        v
    }

    pub fn from_flat(m: usize, c: usize, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), 3 * c + 3);
        ModelParams {
            version: PARAM_VERSION,
            m,
            c,
            wx: flat[0..c].to_vec(),
            bx: flat[c],
            wy: flat[c + 1..2 * c + 1].to_vec(),
            by: flat[2 * c + 1],
            wo: flat[2 * c + 2..3 * c + 2].to_vec(),
            bo: flat[3 * c + 2],
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Pooled descriptors of one query: per-column and per-row means over the
/// enlarged search region, plus the center-surround contrast the
/// objectness head consumes, each of length `channels`.
#[derive(Clone, Debug)]
pub struct RegionDescriptors {
    pub cols: Vec<Vec<f64>>,
    pub rows: Vec<Vec<f64>>,
    /// Mean over the query box minus mean over its search region. A plain
    /// region (or box) mean scales monotonically with object coverage, so
    /// a linear head cannot place tight boxes above boxes sitting inside a
    /// larger object; the contrast peaks exactly for tight boxes.
    pub contrast: Vec<f64>,
    pub region: BBox,
}

/// Pool the scene features over the enlarged search region of `query`:
/// `m` column strips, `m` row strips and the box-vs-region contrast, each
/// averaged with fractional cells weighted by overlap.
pub fn region_descriptors(
    ctx: &SceneContext<'_>,
    query: &BBox,
    gamma: f64,
    m: usize,
) -> RegionDescriptors {
    let region = enlarge(query, gamma, ctx.scene.extent);
    let ig = ctx.features();
    let cw = region.width() / m as f64;
    let ch = region.height() / m as f64;
    let cols = (0..m)
        .map(|i| {
            ig.rect_mean(
                region.x1 + i as f64 * cw,
                region.y1,
                region.x1 + (i + 1) as f64 * cw,
                region.y2,
            )
        })
        .collect();
    let rows = (0..m)
        .map(|i| {
            ig.rect_mean(
                region.x1,
                region.y1 + i as f64 * ch,
                region.x2,
                region.y1 + (i + 1) as f64 * ch,
            )
        })
        .collect();
    let whole = ig.rect_mean(region.x1, region.y1, region.x2, region.y2);
    let inner = ig.rect_mean(query.x1, query.y1, query.x2, query.y2);
    let contrast = inner
        .iter()
        .zip(&whole)
        .map(|(b, r)| b - r)
        .collect();
    RegionDescriptors {
        cols,
        rows,
        contrast,
        region,
    }
}

/// Forward pass of the learned model over one query box.
pub fn tiny_forward(
    params: &ModelParams,
    ctx: &SceneContext<'_>,
    query: &BBox,
    gamma: f64,
    m: usize,
) -> RefineResult {
    debug_assert!(params.validate().is_ok());
    let d = region_descriptors(ctx, query, gamma, m);
    let px = d
        .cols
        .iter()
        .map(|col| sigmoid(dot(&params.wx, col) + params.bx))
        .collect();
    let py = d
        .rows
        .iter()
        .map(|row| sigmoid(dot(&params.wy, row) + params.by))
        .collect();
    let objectness = sigmoid(dot(&params.wo, &d.contrast) + params.bo);
    RefineResult::new(ProbVectors::new(px, py, d.region), objectness)
}

/// One localization training sample: pooled descriptors plus the binary
/// target vectors.
#[derive(Clone, Debug)]
pub struct LocSample {
    pub cols: Vec<Vec<f64>>,
    pub rows: Vec<Vec<f64>>,
    pub tx: Vec<bool>,
    pub ty: Vec<bool>,
}

impl LocSample {
    pub fn prepare(
        ctx: &SceneContext<'_>,
        query: &BBox,
        targets: &TargetVectors,
        gamma: f64,
        m: usize,
    ) -> Self {
        let d = region_descriptors(ctx, query, gamma, m);
        assert_eq!(targets.tx.len(), m);
        LocSample {
            cols: d.cols,
            rows: d.rows,
            tx: targets.tx.clone(),
            ty: targets.ty.clone(),
        }
    }
}

/// One objectness training sample: contrast descriptor plus the label.
#[derive(Clone, Debug)]
pub struct ObjSample {
    pub features: Vec<f64>,
    pub label: bool,
}

impl ObjSample {
    pub fn prepare(
        ctx: &SceneContext<'_>,
        query: &BBox,
        label: bool,
        gamma: f64,
        m: usize,
    ) -> Self {
        let d = region_descriptors(ctx, query, gamma, m);
        ObjSample {
            features: d.contrast,
            label,
        }
    }
}

fn logistic_loss(p: f64, t: bool) -> f64 {
    let p = p.clamp(EPS, 1.0 - EPS);
    if t {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean localization loss plus mean objectness loss, with the exact
/// analytic gradient in the flat parameter layout of
/// [`ModelParams::to_flat`].
///
/// The localization term averages the per-element logistic losses over the
/// `2m` elements of each sample and over samples; the objectness term
/// averages the per-sample logistic loss. An empty batch on both tasks is
/// a contract violation.
pub fn loss_and_grad(
    params: &ModelParams,
    loc: &[LocSample],
    obj: &[ObjSample],
) -> (f64, Vec<f64>) {
    assert!(
        !loc.is_empty() || !obj.is_empty(),
        "both task batches are empty"
    );
    let c = params.c;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.dim()];

    if !loc.is_empty() {
        let m = loc[0].tx.len();
        let norm = 1.0 / (2.0 * m as f64 * loc.len() as f64);
        let (gx, rest) = grad.split_at_mut(c + 1);
        let gy = &mut rest[..c + 1];
        for sample in loc {
            for (col, &t) in sample.cols.iter().zip(&sample.tx) {
                let p = sigmoid(dot(&params.wx, col) + params.bx);
                loss += norm * logistic_loss(p, t);
                let dz = norm * (p - if t { 1.0 } else { 0.0 });
                for k in 0..c {
                    gx[k] += dz * col[k];
                }
                gx[c] += dz;
            }
            for (row, &t) in sample.rows.iter().zip(&sample.ty) {
                let p = sigmoid(dot(&params.wy, row) + params.by);
                loss += norm * logistic_loss(p, t);
                let dz = norm * (p - if t { 1.0 } else { 0.0 });
                for k in 0..c {
                    gy[k] += dz * row[k];
                }
                gy[c] += dz;
            }
        }
    }

    if !obj.is_empty() {
        let norm = 1.0 / obj.len() as f64;
        let go = &mut grad[2 * c + 2..];
        for sample in obj {
            let p = sigmoid(dot(&params.wo, &sample.features) + params.bo);
            loss += norm * logistic_loss(p, sample.label);
            let dz = norm * (p - if sample.label { 1.0 } else { 0.0 });
            for (slot, x) in go.iter_mut().zip(&sample.features) {
                *slot += dz * x;
            }
            go[c] += dz;
        }
    }

    (loss, grad)
}
