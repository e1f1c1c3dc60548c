//! Foreground tree isolation: sky color filter, depth clip, ground band
//! removal and stride downsampling, applied in that order.
//!
//! Every filter keeps the surviving points in their original relative order.
//! The `*_indices` variants work on index lists so callers can track
//! per-point provenance through the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pcio::{ColoredPoint, ColoredPointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpAxis {
    #[default]
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum UpSign {
    #[default]
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

/// Which camera axis (and direction) measures height along the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Vertical {
    pub axis: UpAxis,
    pub sign: UpSign,
}

impl Vertical {
    pub fn new(axis: UpAxis, sign: UpSign) -> Self {
        Vertical { axis, sign }
    }

    pub fn height(&self, p: &ColoredPoint) -> f64 {
        let v = match self.axis {
            UpAxis::X => p.x,
            UpAxis::Y => p.y,
        } as f64;
        match self.sign {
            UpSign::Positive => v,
            UpSign::Negative => -v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationParams {
    /// Points with blue above this value are treated as sky.
    pub sky_blue_threshold: u8,
    pub max_depth_m: f64,
    pub ground_band_m: f64,
    pub downsample_stride: usize,
    pub up_axis: UpAxis,
    pub up_sign: UpSign,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            sky_blue_threshold: 153,
            max_depth_m: 3.0,
            ground_band_m: 0.5,
            downsample_stride: 10,
            up_axis: UpAxis::X,
            up_sign: UpSign::Positive,
        }
    }
}

impl SegmentationParams {
    pub fn vertical(&self) -> Vertical {
        Vertical::new(self.up_axis, self.up_sign)
    }

    pub fn validate(&self) -> Result<()> {
        if self.downsample_stride < 1 {
            return Err(Error::Validation("downsample_stride must be >= 1".into()));
        }
        if !(self.max_depth_m > 0.0) {
            return Err(Error::Validation("max_depth_m must be > 0".into()));
        }
        if !(self.ground_band_m >= 0.0) {
            return Err(Error::Validation("ground_band_m must be >= 0".into()));
        }
        Ok(())
    }
}

pub fn sky_indices(cloud: &ColoredPointCloud, idx: &[usize], params: &SegmentationParams) -> Vec<usize> {
    idx.iter()
        .copied()
        .filter(|&i| cloud.points[i].b <= params.sky_blue_threshold)
        .collect()
}

pub fn depth_indices(cloud: &ColoredPointCloud, idx: &[usize], params: &SegmentationParams) -> Vec<usize> {
    idx.iter()
        .copied()
        .filter(|&i| {
            let z = cloud.points[i].z as f64;
            z > 0.0 && z <= params.max_depth_m
        })
        .collect()
}

pub fn ground_indices(
    cloud: &ColoredPointCloud,
    idx: &[usize],
    params: &SegmentationParams,
) -> Result<Vec<usize>> {
    if idx.is_empty() {
        return Err(Error::EmptyInput("ground removal needs at least one point".into()));
    }
    let vertical = params.vertical();
    let h_min = idx
        .iter()
        .map(|&i| vertical.height(&cloud.points[i]))
        .fold(f64::INFINITY, f64::min);
    let cut = h_min + params.ground_band_m;
    Ok(idx
        .iter()
        .copied()
        .filter(|&i| vertical.height(&cloud.points[i]) >= cut)
        .collect())
}

pub fn stride_indices(idx: &[usize], stride: usize) -> Vec<usize> {
    idx.iter().copied().step_by(stride.max(1)).collect()
}

/// Original indices of the points that survive the full pipeline.
pub fn segment_indices(cloud: &ColoredPointCloud, params: &SegmentationParams) -> Result<Vec<usize>> {
    params.validate()?;
    let all: Vec<usize> = (0..cloud.len()).collect();
    let kept = sky_indices(cloud, &all, params);
    let kept = depth_indices(cloud, &kept, params);
    let kept = ground_indices(cloud, &kept, params)?;
    Ok(stride_indices(&kept, params.downsample_stride))
}

fn all_indices(cloud: &ColoredPointCloud) -> Vec<usize> {
    (0..cloud.len()).collect()
}

/// Keeps points with `blue <= sky_blue_threshold`.
pub fn remove_sky(cloud: &ColoredPointCloud, params: &SegmentationParams) -> ColoredPointCloud {
    cloud.select(&sky_indices(cloud, &all_indices(cloud), params))
}

/// Keeps points with `0 < z <= max_depth_m`.
pub fn clip_depth(cloud: &ColoredPointCloud, params: &SegmentationParams) -> ColoredPointCloud {
    cloud.select(&depth_indices(cloud, &all_indices(cloud), params))
}

/// Drops points lower than `h_min + ground_band_m`, where `h_min` is the
/// lowest height in this cloud.
pub fn remove_ground(cloud: &ColoredPointCloud, params: &SegmentationParams) -> Result<ColoredPointCloud> {
    Ok(cloud.select(&ground_indices(cloud, &all_indices(cloud), params)?))
}

/// Keeps points at indices `0, stride, 2 * stride, ...`.
pub fn downsample(cloud: &ColoredPointCloud, params: &SegmentationParams) -> ColoredPointCloud {
    cloud.select(&stride_indices(&all_indices(cloud), params.downsample_stride))
}

pub fn segment_tree(cloud: &ColoredPointCloud, params: &SegmentationParams) -> Result<ColoredPointCloud> {
    Ok(cloud.select(&segment_indices(cloud, params)?))
}
