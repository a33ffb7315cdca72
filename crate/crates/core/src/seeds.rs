//! Seed-box generation: a deterministic grid of fixed-shape boxes that
//! initializes the active search.

use serde::{Deserialize, Serialize};

use crate::geometry::{BBox, ImageExtent};

/// Configuration for the seed grid.
///
/// Each (aspect ratio, size) pair is one box shape; `min_dims` gives the
/// smaller side of the box for that size class and the ratio is width:height.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedConfig {
    pub aspect_ratios: Vec<f64>,
    pub min_dims: Vec<f64>,
    pub target_count: usize,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            aspect_ratios: vec![0.5, 2.0, 1.0],
            min_dims: vec![16.0, 32.0, 50.0, 72.0, 96.0, 128.0, 192.0, 256.0, 384.0],
            target_count: 10_000,
        }
    }
}

impl SeedConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.aspect_ratios.is_empty() || self.aspect_ratios.iter().any(|&r| r <= 0.0) {
            return Err("aspect_ratios must be nonempty and positive".into());
        }
        if self.min_dims.is_empty() || self.min_dims.iter().any(|&d| d <= 0.0) {
            return Err("min_dims must be nonempty and positive".into());
        }
        if self.target_count == 0 {
            return Err("target_count must be positive".into());
        }
        Ok(())
    }

    /// Width and height of the box shape for one (ratio, size) pair; the
    /// smaller side equals `dim`.
    fn shape(ratio: f64, dim: f64) -> (f64, f64) {
        if ratio >= 1.0 {
            (dim * ratio, dim)
        } else {
            (dim, dim / ratio)
        }
    }
}

/// Grid sizing for one shape: `n` placements spread over `span`.
fn grid_positions(span: f64, n: usize) -> Vec<f64> {
    if n <= 1 || span <= 0.0 {
        return vec![span / 2.0];
    }
    let stride = span / (n - 1) as f64;
    (0..n).map(|i| i as f64 * stride).collect()
}

/// Uniformly distribute fixed-shape boxes over the image.
///
/// Every (ratio, size) configuration that fits inside the image gets a
/// uniform grid of centers sized so the total lands near
/// `cfg.target_count` (never above `ceil(1.05 * target_count)`).
/// Configurations that do not fit are skipped. Output order is
/// deterministic: by configuration (ratio-major), then row-major within a
/// configuration. All emitted boxes lie fully inside the extent.
pub fn generate_seeds(extent: ImageExtent, cfg: &SeedConfig) -> Vec<BBox> {
    cfg.validate().expect("invalid seed config");
    let img_w = extent.width as f64;
    let img_h = extent.height as f64;

    let shapes: Vec<(f64, f64)> = cfg
        .aspect_ratios
        .iter()
        .flat_map(|&r| cfg.min_dims.iter().map(move |&d| SeedConfig::shape(r, d)))
        .filter(|&(w, h)| w <= img_w && h <= img_h)
        .collect();
    if shapes.is_empty() {
        return Vec::new();
    }

    let budget =
        ((cfg.target_count as f64 / shapes.len() as f64).round() as usize).max(1);
    let cap = (1.05 * cfg.target_count as f64).ceil() as usize;
    let aspect = img_w / img_h;

    // Near-square grid proportional to the image aspect: ny * nx ~= budget
    // with nx/ny ~= aspect.
    let mut grids: Vec<(usize, usize)> = shapes
        .iter()
        .map(|_| {
            let ny = ((budget as f64 / aspect).sqrt().round() as usize).max(1);
            let nx = ((budget as f64 / ny as f64).round() as usize).max(1);
            (nx, ny)
        })
        .collect();

    // Shrink the largest grids until the workspace-wide cap holds.
    let mut total: usize = grids.iter().map(|&(nx, ny)| nx * ny).sum();
    while total > cap {
        let (i, _) = grids
            .iter()
            .enumerate()
            .max_by_key(|(_, &(nx, ny))| nx * ny)
            .expect("nonempty");
        let (nx, ny) = grids[i];
        grids[i] = if nx >= ny && nx > 1 {
            (nx - 1, ny)
        } else if ny > 1 {
            (nx, ny - 1)
        } else {
            break;
        };
        total = grids.iter().map(|&(nx, ny)| nx * ny).sum();
    }

    let mut seeds = Vec::with_capacity(total);
    for (&(w, h), &(nx, ny)) in shapes.iter().zip(&grids) {
        let xs = grid_positions(img_w - w, nx);
        let ys = grid_positions(img_h - h, ny);
        for &y in &ys {
            for &x in &xs {
                seeds.push(BBox::new(x, y, x + w, y + h));
            }
        }
    }
    seeds
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_exact_fit_yields_one_box() {
        let cfg = SeedConfig {
            aspect_ratios: vec![1.0],
            min_dims: vec![16.0],
            target_count: 1,
        };
        let seeds = generate_seeds(ImageExtent::new(16, 16), &cfg);
        assert_eq!(seeds, vec![BBox::new(0.0, 0.0, 16.0, 16.0)]);
    }

    #[test]
    fn two_budget_splits_the_span() {
        let cfg = SeedConfig {
            aspect_ratios: vec![1.0],
            min_dims: vec![16.0],
            target_count: 2,
        };
        let seeds = generate_seeds(ImageExtent::new(32, 16), &cfg);
        assert_eq!(
            seeds,
            vec![
                BBox::new(0.0, 0.0, 16.0, 16.0),
                BBox::new(16.0, 0.0, 32.0, 16.0),
            ]
        );
    }

    #[test]
    fn default_config_hits_budget_window() {
        let seeds = generate_seeds(ImageExtent::new(1000, 600), &SeedConfig::default());
        assert!(
            (9500..=10500).contains(&seeds.len()),
            "got {} seeds",
            seeds.len()
        );
    }

    #[test]
    fn image_smaller_than_every_shape_is_empty() {
        let cfg = SeedConfig {
            aspect_ratios: vec![1.0],
            min_dims: vec![64.0],
            target_count: 100,
        };
        assert!(generate_seeds(ImageExtent::new(32, 32), &cfg).is_empty());
    }

    #[test]
    fn seeds_are_inside_extent_and_valid() {
        let extent = ImageExtent::new(640, 480);
        let frame = extent.as_bbox();
        for b in generate_seeds(extent, &SeedConfig::default()) {
            assert!(frame.contains(&b));
            assert!(b.area() > 0.0);
        }
    }

    #[test]
    fn deterministic_output() {
        let extent = ImageExtent::new(333, 471);
        let a = generate_seeds(extent, &SeedConfig::default());
        let b = generate_seeds(extent, &SeedConfig::default());
        assert_eq!(a, b);
    }

    #[test]
    fn corner_placements_present_for_each_fitting_shape() {
        let extent = ImageExtent::new(512, 256);
        let cfg = SeedConfig::default();
        let seeds = generate_seeds(extent, &cfg);
        let img_w = extent.width as f64;
        let img_h = extent.height as f64;
        for &r in &cfg.aspect_ratios {
            for &d in &cfg.min_dims {
                let (w, h) = SeedConfig::shape(r, d);
                if w > img_w || h > img_h {
                    continue;
                }
                // Corner boxes of the feasible center grid for this shape.
                for (x, y) in [
                    (0.0, 0.0),
                    (img_w - w, 0.0),
                    (0.0, img_h - h),
                    (img_w - w, img_h - h),
                ] {
                    let corner = BBox::new(x, y, x + w, y + h);
                    assert!(
                        seeds.iter().any(|s| {
                            (s.x1 - corner.x1).abs() < 1e-9
                                && (s.y1 - corner.y1).abs() < 1e-9
                                && (s.x2 - corner.x2).abs() < 1e-9
                                && (s.y2 - corner.y2).abs() < 1e-9
                        }),
                        "missing corner seed {corner:?} for shape {w}x{h}"
                    );
                }
            }
        }
    }
}
