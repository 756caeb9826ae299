//! Random-dot stereograms with exact integer ground truth.
//!
//! Ground truth lives on the left view: left pixel `(x, y)` with disparity
//! `d` appears at right pixel `(x − d, y)`. When several left pixels land
//! on one right pixel the largest disparity (nearest surface) wins. Right
//! pixels that receive nothing are filled with fresh noise. A left pixel is
//! non-occluded iff its target lies inside the image and it won that target.

use serde::{Deserialize, Serialize};
use sled_tensor::{Tensor, XorShift64};

use crate::disparity::DisparityMap;
use crate::error::{DataError, Result};

/// One stereo pair with ground truth on the left view.
#[derive(Clone, Debug, PartialEq)]
pub struct StereoSample {
    /// `[3,H,W]`, values in `[0,1]`.
    pub left: Tensor,
    pub right: Tensor,
    pub gt: DisparityMap,
    pub fg_mask: Option<Vec<bool>>,
    pub noc_mask: Option<Vec<bool>>,
}

impl StereoSample {
    pub fn width(&self) -> usize {
        self.gt.width()
    }

    pub fn height(&self) -> usize {
        self.gt.height()
    }
}

/// Piecewise-constant integer disparity layouts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisparityField {
    Constant { disparity: usize },
    /// `left` on columns `x < width/2`, `right` elsewhere.
    TwoPlane { left: usize, right: usize },
    /// `foreground` inside the half-open rectangle, `background` outside.
    Box { background: usize, foreground: usize, x0: usize, y0: usize, x1: usize, y1: usize },
}

impl DisparityField {
    pub fn at(&self, x: usize, y: usize, width: usize) -> usize {
        match *self {
            DisparityField::Constant { disparity } => disparity,
            DisparityField::TwoPlane { left, right } => {
                if x < width / 2 {
                    left
                } else {
                    right
                }
            }
            DisparityField::Box { background, foreground, x0, y0, x1, y1 } => {
                if (x0..x1).contains(&x) && (y0..y1).contains(&y) {
                    foreground
                } else {
                    background
                }
            }
        }
    }
}

/// Parameters of one synthetic sample, as listed in manifests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    pub field: DisparityField,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn generate(&self) -> Result<StereoSample> {
        generate_stereogram(self.width, self.height, |x, y| self.field.at(x, y, self.width), self.seed)
    }
}

/// `count` box-on-plane scenes with disparities below `max_disp`, drawn
/// deterministically from `seed`.
pub fn benchmark_specs(count: usize, width: usize, height: usize, max_disp: usize, seed: u64) -> Vec<SyntheticSpec> {
    let mut rng = XorShift64::new(seed);
    let limit = max_disp.min(width.div_ceil(2)).max(2);
    (0..count)
        .map(|_| {
            let background = rng.below(limit / 2);
            let foreground = background + 1 + rng.below(limit - background - 1);
            let (bw, bh) = (width / 4 + rng.below(width / 4), height / 4 + rng.below(height / 4));
            let x0 = rng.below(width - bw);
            let y0 = rng.below(height - bh);
            SyntheticSpec {
                width,
                height,
                field: DisparityField::Box { background, foreground, x0, y0, x1: x0 + bw, y1: y0 + bh },
                seed: rng.next_u64(),
            }
        })
        .collect()
}

/// Renders a stereogram whose left view carries disparity `field(x, y)`.
pub fn generate_stereogram(
    width: usize,
    height: usize,
    field: impl Fn(usize, usize) -> usize,
    texture_seed: u64,
) -> Result<StereoSample> {
    if width == 0 || height == 0 {
        return Err(DataError::Parameter(format!("empty image {width}x{height}")));
    }
    let plane = width * height;
    let disp: Vec<usize> = (0..plane).map(|i| field(i % width, i / width)).collect();
    if let Some((i, &d)) = disp.iter().enumerate().find(|(_, &d)| 2 * d >= width) {
        return Err(DataError::Parameter(format!(
            "disparity {d} at ({}, {}) must be below width/2 = {}",
            i % width,
            i / width,
            width as f64 / 2.0
        )));
    }
    let d_min = disp.iter().copied().min().unwrap_or(0);

    let mut rng = XorShift64::new(texture_seed);
    let left = rng.uniform_tensor(vec![3, height, width], 0.0, 1.0);

    // owner[y*w + xr] = left column that won right pixel xr
    let mut owner: Vec<Option<usize>> = vec![None; plane];
    for y in 0..height {
        for x in 0..width {
            let d = disp[y * width + x];
            if d > x {
                continue;
            }
            let slot = &mut owner[y * width + x - d];
            match *slot {
                Some(prev) if disp[y * width + prev] >= d => {}
                _ => *slot = Some(x),
            }
        }
    }

    let mut right = Tensor::zeros(vec![3, height, width]);
    let (l, r) = (left.data(), right.data_mut());
    for y in 0..height {
        for xr in 0..width {
            let p = y * width + xr;
            for c in 0..3 {
                r[c * plane + p] = match owner[p] {
                    Some(xl) => l[c * plane + y * width + xl],
                    None => rng.next_f64(),
                };
            }
        }
    }

    let mut noc = vec![false; plane];
    for y in 0..height {
        for xr in 0..width {
            if let Some(xl) = owner[y * width + xr] {
                noc[y * width + xl] = true;
            }
        }
    }
    let fg = disp.iter().map(|&d| d > d_min).collect();
    let gt = DisparityMap::from_values(width, height, disp.iter().map(|&d| d as f64).collect())?;
    Ok(StereoSample { left, right, gt, fg_mask: Some(fg), noc_mask: Some(noc) })
}
