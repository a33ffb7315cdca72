//! Desk-scale scene representation: ground-truth boxes plus a per-pixel
//! feature grid that stands in for an image.

use crate::geometry::{BBox, ImageExtent};

/// Dense `width x height x channels` feature grid, one feature vector per
/// pixel cell. Row-major, channel-contiguous.
#[derive(Clone, Debug)]
pub struct FeatureGrid {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureGrid {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        assert!(width > 0 && height > 0 && channels > 0);
        FeatureGrid {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    fn idx(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    pub fn cell(&self, x: usize, y: usize) -> &[f64] {
        let i = self.idx(x, y);
        &self.data[i..i + self.channels]
    }

    pub fn cell_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = self.idx(x, y);
        &mut self.data[i..i + self.channels]
    }
}

/// A scene: image extent, feature grid and ground-truth boxes with
/// category ids. Every ground-truth box lies inside the extent and is at
/// least 4 px on each side.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub extent: ImageExtent,
    pub grid: FeatureGrid,
    pub gts: Vec<(BBox, u32)>,
}

impl SyntheticScene {
    pub fn new(extent: ImageExtent, grid: FeatureGrid, gts: Vec<(BBox, u32)>) -> Self {
        assert_eq!(grid.width(), extent.width as usize);
        assert_eq!(grid.height(), extent.height as usize);
        let frame = extent.as_bbox();
        for (b, _) in &gts {
            assert!(frame.contains(b), "gt box {b:?} outside extent");
            assert!(
                b.width() >= 4.0 && b.height() >= 4.0,
                "gt box {b:?} smaller than 4 px"
            );
        }
        SyntheticScene { extent, grid, gts }
    }

    pub fn gt_boxes(&self) -> Vec<BBox> {
        self.gts.iter().map(|(b, _)| *b).collect()
    }
}

/// Summed-area table over a [`FeatureGrid`], supporting exact integrals of
/// the piecewise-constant feature field over arbitrary continuous
/// rectangles. Fractional cell coverage is weighted by overlap area, which
/// is what bilinear region pooling amounts to for axis-aligned queries.
pub struct IntegralGrid {
    width: usize,
    height: usize,
    channels: usize,
    // (width+1) x (height+1) table of channel sums
    table: Vec<f64>,
}

impl IntegralGrid {
    pub fn build(grid: &FeatureGrid) -> Self {
        let (w, h, c) = (grid.width(), grid.height(), grid.channels());
        let stride = (w + 1) * c;
        let mut table = vec![0.0; (w + 1) * (h + 1) * c];
        for y in 0..h {
            for x in 0..w {
                let cell = grid.cell(x, y);
                let base = (y + 1) * stride + (x + 1) * c;
                let up = y * stride + (x + 1) * c;
                let left = (y + 1) * stride + x * c;
                let diag = y * stride + x * c;
                for k in 0..c {
                    table[base + k] =
                        cell[k] + table[up + k] + table[left + k] - table[diag + k];
                }
            }
        }
        IntegralGrid {
            width: w,
            height: h,
            channels: c,
            table,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Continuous summed-area lookup: the integral of the field over
    /// `[0, x] x [0, y]`. For a piecewise-constant field this is exactly
    /// the bilinear interpolation of the discrete table.
    fn at(&self, x: f64, y: f64, out: &mut [f64]) {
        let xi = (x.floor() as usize).min(self.width.saturating_sub(1));
        let yi = (y.floor() as usize).min(self.height.saturating_sub(1));
        let fx = x - xi as f64;
        let fy = y - yi as f64;
        let c = self.channels;
        let stride = (self.width + 1) * c;
        let i00 = yi * stride + xi * c;
        let i10 = i00 + c;
        let i01 = i00 + stride;
        let i11 = i01 + c;
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = (1.0 - fx) * (1.0 - fy) * self.table[i00 + k]
                + fx * (1.0 - fy) * self.table[i10 + k]
                + (1.0 - fx) * fy * self.table[i01 + k]
                + fx * fy * self.table[i11 + k];
        }
    }

    /// Integral of the feature field over a continuous rectangle, clipped
    /// to the grid. Cells partially covered contribute proportionally to
    /// the covered area.
    pub fn rect_integral(&self, x1: f64, y1: f64, x2: f64, y2: f64) -> Vec<f64> {
        let c = self.channels;
        let x1 = x1.clamp(0.0, self.width as f64);
        let x2 = x2.clamp(0.0, self.width as f64);
        let y1 = y1.clamp(0.0, self.height as f64);
        let y2 = y2.clamp(0.0, self.height as f64);
        if x2 <= x1 || y2 <= y1 {
            return vec![0.0; c];
        }
        let mut s11 = vec![0.0; c];
        let mut s01 = vec![0.0; c];
        let mut s10 = vec![0.0; c];
        let mut s00 = vec![0.0; c];
        self.at(x2, y2, &mut s11);
        self.at(x1, y2, &mut s01);
        self.at(x2, y1, &mut s10);
        self.at(x1, y1, &mut s00);
        (0..c)
            .map(|k| s11[k] - s01[k] - s10[k] + s00[k])
            .collect()
    }

    /// Mean feature over a continuous rectangle (zero vector for empty
    /// queries).
    pub fn rect_mean(&self, x1: f64, y1: f64, x2: f64, y2: f64) -> Vec<f64> {
        let cx1 = x1.clamp(0.0, self.width as f64);
        let cx2 = x2.clamp(0.0, self.width as f64);
        let cy1 = y1.clamp(0.0, self.height as f64);
        let cy2 = y2.clamp(0.0, self.height as f64);
        let area = (cx2 - cx1).max(0.0) * (cy2 - cy1).max(0.0);
        let mut v = self.rect_integral(x1, y1, x2, y2);
        if area > 0.0 {
            for k in v.iter_mut() {
                *k /= area;
            }
        }
        v
    }
}
