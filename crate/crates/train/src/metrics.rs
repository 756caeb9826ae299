//! Disparity error metrics.
//!
//! All functions take flat, equally long slices. A pixel participates only
//! where its mask entry is set. D1 counts a pixel as an outlier when its
//! absolute error exceeds both 3 px and 5% of the ground truth.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sled_data::DisparityMap;

use crate::error::{Result, TrainError};

pub const THRESHOLDS: [u32; 3] = [1, 3, 5];

fn check_lengths(pred: &[f64], gt: &[f64], mask: &[bool]) -> Result<()> {
    if pred.len() != gt.len() || gt.len() != mask.len() {
        return Err(TrainError::Evaluation(format!(
            "length mismatch: pred {}, gt {}, mask {}",
            pred.len(),
            gt.len(),
            mask.len()
        )));
    }
    Ok(())
}

fn masked(pred: &[f64], gt: &[f64], mask: &[bool]) -> Result<Vec<(f64, f64)>> {
    check_lengths(pred, gt, mask)?;
    let pairs: Vec<_> = pred.iter().zip(gt).zip(mask).filter(|(_, &m)| m).map(|((&p, &g), _)| (p, g)).collect();
    if pairs.is_empty() {
        return Err(TrainError::Evaluation("mask selects no pixels".into()));
    }
    Ok(pairs)
}

/// Mean `|pred − gt|` over masked pixels.
pub fn end_point_error(pred: &[f64], gt: &[f64], mask: &[bool]) -> Result<f64> {
    let pairs = masked(pred, gt, mask)?;
    Ok(pairs.iter().map(|(p, g)| (p - g).abs()).sum::<f64>() / pairs.len() as f64)
}

/// Percentage of masked pixels with `|pred − gt| > t`.
pub fn threshold_error(pred: &[f64], gt: &[f64], mask: &[bool], t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(TrainError::Evaluation(format!("threshold must be positive, got {t}")));
    }
    let pairs = masked(pred, gt, mask)?;
    let bad = pairs.iter().filter(|(p, g)| (p - g).abs() > t).count();
    Ok(100.0 * bad as f64 / pairs.len() as f64)
}

pub fn is_d1_outlier(pred: f64, gt: f64) -> bool {
    let err = (pred - gt).abs();
    err > 3.0 && err > 0.05 * gt
}

/// Pixels that take part in loss and metrics: valid and `gt < max_disp`.
pub fn valid_mask(gt: &DisparityMap, max_disp: usize) -> Vec<bool> {
    gt.values().iter().zip(gt.valid()).map(|(&v, &ok)| ok && v < max_disp as f64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    All,
    Noc,
}

/// Additive error tallies; reports derived from merged tallies are
/// count-weighted averages of the per-image values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub pixels: u64,
    pub abs_error: f64,
    pub over: [u64; 3],
    pub bg_pixels: u64,
    pub bg_outliers: u64,
    pub fg_pixels: u64,
    pub fg_outliers: u64,
}

impl Tally {
    /// `fg`, when given, splits the masked pixels into foreground and
    /// background; without it every pixel counts as background.
    pub fn collect(pred: &[f64], gt: &[f64], mask: &[bool], fg: Option<&[bool]>) -> Result<Self> {
        check_lengths(pred, gt, mask)?;
        if let Some(f) = fg {
            if f.len() != mask.len() {
                return Err(TrainError::Evaluation(format!("fg mask has {} entries, expected {}", f.len(), mask.len())));
            }
        }
        let mut t = Tally::default();
        for i in (0..pred.len()).filter(|&i| mask[i]) {
            let err = (pred[i] - gt[i]).abs();
            t.pixels += 1;
            t.abs_error += err;
            for (k, &th) in THRESHOLDS.iter().enumerate() {
                t.over[k] += u64::from(err > th as f64);
            }
            let outlier = u64::from(is_d1_outlier(pred[i], gt[i]));
            if fg.is_some_and(|f| f[i]) {
                t.fg_pixels += 1;
                t.fg_outliers += outlier;
            } else {
                t.bg_pixels += 1;
                t.bg_outliers += outlier;
            }
        }
        Ok(t)
    }

    pub fn merge(&mut self, other: &Tally) {
        self.pixels += other.pixels;
        self.abs_error += other.abs_error;
        for k in 0..3 {
            self.over[k] += other.over[k];
        }
        self.bg_pixels += other.bg_pixels;
        self.bg_outliers += other.bg_outliers;
        self.fg_pixels += other.fg_pixels;
        self.fg_outliers += other.fg_outliers;
    }

    pub fn report(&self, region: Region) -> Result<MetricReport> {
        if self.pixels == 0 {
            return Err(TrainError::Evaluation(format!("no valid pixels in region {region:?}")));
        }
        let pct = |num: u64, den: u64| (den > 0).then(|| 100.0 * num as f64 / den as f64);
        let gt_px = THRESHOLDS
            .iter()
            .zip(self.over)
            .map(|(t, n)| (t.to_string(), 100.0 * n as f64 / self.pixels as f64))
            .collect();
        Ok(MetricReport {
            epe: self.abs_error / self.pixels as f64,
            gt_px,
            d1_bg: pct(self.bg_outliers, self.bg_pixels),
            d1_fg: pct(self.fg_outliers, self.fg_pixels),
            d1_all: pct(self.bg_outliers + self.fg_outliers, self.pixels),
            region,
        })
    }
}

/// Metrics for one region. Absent D1 entries mean the class was empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub epe: f64,
    /// Threshold in px ("1", "3", "5") → percent of pixels above it.
    pub gt_px: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1_bg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1_fg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1_all: Option<f64>,
    pub region: Region,
}

impl MetricReport {
    pub fn over(&self, t: u32) -> f64 {
        self.gt_px[&t.to_string()]
    }

    /// One `key=value` line per field, keys prefixed with `prefix.` when non-empty.
    pub fn to_key_values(&self, prefix: &str) -> String {
        let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        let mut out = String::new();
        let region = match self.region {
            Region::All => "all",
            Region::Noc => "noc",
        };
        writeln!(out, "{}={region}", key("region")).unwrap();
        writeln!(out, "{}={}", key("epe"), self.epe).unwrap();
        for (t, v) in &self.gt_px {
            writeln!(out, "{}={v}", key(&format!("gt_px.{t}"))).unwrap();
        }
        for (name, v) in [("d1_bg", self.d1_bg), ("d1_fg", self.d1_fg), ("d1_all", self.d1_all)] {
            if let Some(v) = v {
                writeln!(out, "{}={v}", key(name)).unwrap();
            }
        }
        out
    }
}

/// D1 percentages for one region; `None` marks an empty class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct D1 {
    pub bg: Option<f64>,
    pub fg: Option<f64>,
    pub all: Option<f64>,
}

/// D1-bg/fg/all over the valid pixels (All) and over valid ∧ noc (Noc).
pub fn d1_metric(pred: &[f64], gt: &[f64], valid: &[bool], fg: &[bool], noc: &[bool]) -> Result<(D1, D1)> {
    let region = |mask: &[bool]| -> Result<D1> {
        let t = Tally::collect(pred, gt, mask, Some(fg))?;
        let pct = |num: u64, den: u64| (den > 0).then(|| 100.0 * num as f64 / den as f64);
        Ok(D1 {
            bg: pct(t.bg_outliers, t.bg_pixels),
            fg: pct(t.fg_outliers, t.fg_pixels),
            all: pct(t.bg_outliers + t.fg_outliers, t.pixels),
        })
    };
    if noc.len() != valid.len() {
        return Err(TrainError::Evaluation("noc mask length differs from valid mask".into()));
    }
    let noc_valid: Vec<bool> = valid.iter().zip(noc).map(|(&v, &n)| v && n).collect();
    Ok((region(valid)?, region(&noc_valid)?))
}

/// Tallies for both regions of one prediction.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SampleTally {
    pub all: Tally,
    /// Only populated when the sample carries a noc mask.
    pub noc: Option<Tally>,
}

impl SampleTally {
    pub fn collect(pred: &[f64], gt: &DisparityMap, fg: Option<&[bool]>, noc: Option<&[bool]>, max_disp: usize) -> Result<Self> {
        let gt_values = gt.values();
        let valid = valid_mask(gt, max_disp);
        let all = Tally::collect(pred, gt_values, &valid, fg)?;
        let noc = match noc {
            Some(n) => {
                if n.len() != valid.len() {
                    return Err(TrainError::Evaluation("noc mask length differs from ground truth".into()));
                }
                let mask: Vec<bool> = valid.iter().zip(n).map(|(&v, &n)| v && n).collect();
                Some(Tally::collect(pred, gt_values, &mask, fg)?)
            }
            None => None,
        };
        Ok(SampleTally { all, noc })
    }

    pub fn merge(&mut self, other: &SampleTally) {
        self.all.merge(&other.all);
        match (&mut self.noc, &other.noc) {
            (Some(a), Some(b)) => a.merge(b),
            (None, Some(b)) => self.noc = Some(*b),
            _ => {}
        }
    }

    pub fn reports(&self) -> Result<Vec<MetricReport>> {
        let mut out = vec![self.all.report(Region::All)?];
        if let Some(noc) = &self.noc {
            if noc.pixels > 0 {
                out.push(noc.report(Region::Noc)?);
            }
        }
        Ok(out)
    }
}
