//! Yellowness index `(y - g) / (y + g)` from classified clouds and leaf masses,
//! plus validation of estimated against ground-truth indices.

use serde::{Deserialize, Serialize};

use crate::cluster::{ClassifiedCloud, PointLabel};
use crate::error::{Error, Result};
use crate::pcio::ColoredPointCloud;
use crate::treeseg::Vertical;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YellownessIndex {
    pub value: f64,
    pub yellow: u64,
    pub green: u64,
}

impl YellownessIndex {
    pub fn from_counts(yellow: u64, green: u64) -> Result<Self> {
        let total = yellow + green;
        if total == 0 {
            return Err(Error::NoFoliage);
        }
        Ok(YellownessIndex {
            value: (yellow as f64 - green as f64) / total as f64,
            yellow,
            green,
        })
    }
}

/// One tree at one capture week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeObservation {
    pub tree_id: String,
    pub week: u32,
    pub index: YellownessIndex,
    pub ground_truth: Option<f64>,
    pub leaf_n_percent: Option<f64>,
}

impl TreeObservation {
    pub fn validate(&self) -> Result<()> {
        if self.week < 1 {
            return Err(Error::Validation(format!("tree {}: week must be >= 1", self.tree_id)));
        }
        if let Some(gt) = self.ground_truth {
            if !(-1.0..=1.0).contains(&gt) {
                return Err(Error::Validation(format!(
                    "tree {}: ground truth {gt} outside [-1, 1]",
                    self.tree_id
                )));
            }
        }
        if let Some(n) = self.leaf_n_percent {
            if !(n > 0.0 && n < 10.0) {
                return Err(Error::Validation(format!("tree {}: leaf N {n} outside (0, 10)", self.tree_id)));
            }
        }
        Ok(())
    }
}

/// Counts Yellow and Green labels; Trunk and Unassigned are ignored.
pub fn yellowness(classified: &ClassifiedCloud) -> Result<YellownessIndex> {
    let mut y = 0u64;
    let mut g = 0u64;
    for l in &classified.labels {
        match l {
            PointLabel::Yellow => y += 1,
            PointLabel::Green => g += 1,
            PointLabel::Trunk | PointLabel::Unassigned => {}
        }
    }
    YellownessIndex::from_counts(y, g)
}

pub fn ground_truth_index(yellow_mass_g: f64, green_mass_g: f64) -> Result<f64> {
    if !(yellow_mass_g >= 0.0 && green_mass_g >= 0.0) {
        return Err(Error::Validation(format!(
            "leaf masses must be nonnegative, got ({yellow_mass_g}, {green_mass_g})"
        )));
    }
    let total = yellow_mass_g + green_mass_g;
    if total == 0.0 {
        return Err(Error::NoFoliage);
    }
    Ok((yellow_mass_g - green_mass_g) / total)
}

/// Points whose height lies in `[low, high)`.
pub fn crop_band(cloud: &ColoredPointCloud, low_m: f64, high_m: f64, vertical: Vertical) -> Result<ColoredPointCloud> {
    if !(low_m < high_m) {
        return Err(Error::Validation(format!("band [{low_m}, {high_m}) is empty")));
    }
    let keep: Vec<usize> = cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let h = vertical.height(p);
            h >= low_m && h < high_m
        })
        .map(|(i, _)| i)
        .collect();
    Ok(cloud.select(&keep))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub tree_id: String,
    pub week: u32,
    pub estimate: f64,
    pub ground_truth: f64,
    /// Ground truth minus the fitted line at the estimate.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub r_squared: f64,
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<Residual>,
}

/// Least-squares fit of ground truth on estimated index over all observations
/// carrying a ground truth. A constant estimate explains nothing: R² = 0.
pub fn validate(observations: &[TreeObservation]) -> Result<ValidationReport> {
    let pairs: Vec<(&TreeObservation, f64)> = observations
        .iter()
        .filter_map(|o| o.ground_truth.map(|gt| (o, gt)))
        .collect();
    if pairs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 observations with ground truth, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|(o, _)| o.index.value).sum::<f64>() / n;
    let my = pairs.iter().map(|(_, t)| t).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (o, t) in &pairs {
        let dx = o.index.value - mx;
        let dy = t - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let residuals: Vec<Residual> = pairs
        .iter()
        .map(|(o, t)| Residual {
            tree_id: o.tree_id.clone(),
            week: o.week,
            estimate: o.index.value,
            ground_truth: *t,
            residual: t - (intercept + slope * o.index.value),
        })
        .collect();
    let ss_res: f64 = residuals.iter().map(|r| r.residual * r.residual).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else if ss_res == 0.0 { 1.0 } else { 0.0 };
    Ok(ValidationReport {
        n: pairs.len(),
        r_squared,
        slope,
        intercept,
        residuals,
    })
}
