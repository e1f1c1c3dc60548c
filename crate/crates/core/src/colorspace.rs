//! sRGB to CIE-L\*a\*b\* (D65, 2° observer) and HSV, plus per-cloud channel
//! histograms.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pcio::ColoredPointCloud;

/// D65 reference white, 2° observer, Y normalized to 1.
pub const D65_WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

// Linear sRGB -> XYZ (D65).
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabColor {
    pub l: f64,
    pub a_star: f64,
    pub b_star: f64,
}

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsvColor {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_table() -> &'static [f64; 256] {
    static TABLE: OnceLock<[f64; 256]> = OnceLock::new();
    TABLE.get_or_init(|| std::array::from_fn(|i| srgb_to_linear(i as f64 / 255.0)))
}

fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

/// Converts linear-light RGB in `[0, 1]` to L\*a\*b\*.
pub fn linear_rgb_to_lab(rgb: [f64; 3]) -> LabColor {
    let mut f = [0.0; 3];
    for (k, row) in RGB_TO_XYZ.iter().enumerate() {
        let xyz = row[0] * rgb[0] + row[1] * rgb[1] + row[2] * rgb[2];
        f[k] = lab_f(xyz / D65_WHITE[k]);
    }
    LabColor {
        l: 116.0 * f[1] - 16.0,
        a_star: 500.0 * (f[0] - f[1]),
        b_star: 200.0 * (f[1] - f[2]),
    }
}

pub fn srgb_to_lab(r: u8, g: u8, b: u8) -> LabColor {
    let lin = linear_table();
    linear_rgb_to_lab([lin[r as usize], lin[g as usize], lin[b as usize]])
}

/// Hexcone HSV from channel values in `[0, 1]`. Achromatic colors get hue 0.
pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> HsvColor {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta <= 0.0 {
        return HsvColor { h: 0.0, s, v };
    }
    let sector = if max == r {
        (g - b) / delta
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut h = 60.0 * sector;
    if h < 0.0 {
        h += 360.0;
    }
    if h >= 360.0 {
        h -= 360.0;
    }
    HsvColor { h, s, v }
}

pub fn srgb_to_hsv(r: u8, g: u8, b: u8) -> HsvColor {
    rgb_to_hsv(r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Hue,
    AStar,
    BStar,
}

impl Channel {
    /// Fixed histogram range for the channel.
    pub fn range(self) -> (f64, f64) {
        match self {
            Channel::Hue => (0.0, 360.0),
            Channel::AStar | Channel::BStar => (-128.0, 128.0),
        }
    }

    pub fn value(self, r: u8, g: u8, b: u8) -> f64 {
        match self {
            Channel::Hue => srgb_to_hsv(r, g, b).h,
            Channel::AStar => srgb_to_lab(r, g, b).a_star,
            Channel::BStar => srgb_to_lab(r, g, b).b_star,
        }
    }
}

/// Normalized fixed-width histogram: `sum(density * width) == 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub channel: Channel,
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
}

impl DistributionSummary {
    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn integral(&self) -> f64 {
        self.densities.iter().sum::<f64>() * self.bin_width()
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        0.5 * (self.bin_edges[i] + self.bin_edges[i + 1])
    }

    /// Bins that are strict local maxima of the density, ascending.
    pub fn modes(&self) -> Vec<usize> {
        let d = &self.densities;
        (0..d.len())
            .filter(|&i| {
                d[i] > 0.0
                    && (i == 0 || d[i] > d[i - 1])
                    && (i + 1 == d.len() || d[i] >= d[i + 1])
            })
            .collect()
    }
}

/// Histogram of one color channel over every point of the cloud. Values
/// outside the channel's fixed range fall into the edge bins.
pub fn summarize_channel(
    cloud: &ColoredPointCloud,
    channel: Channel,
    bins: usize,
) -> Result<DistributionSummary> {
    if bins < 2 {
        return Err(Error::Validation(format!("bins must be >= 2, got {bins}")));
    }
    if cloud.is_empty() {
        return Err(Error::EmptyInput("cannot summarize an empty cloud".into()));
    }
    let (lo, hi) = channel.range();
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for p in &cloud.points {
        let v = channel.value(p.r, p.g, p.b);
        let bin = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[bin] += 1;
    }
    let n = cloud.len() as f64;
    Ok(DistributionSummary {
        channel,
        bin_edges: (0..=bins).map(|i| lo + i as f64 * width).collect(),
        densities: counts.iter().map(|&c| c as f64 / (n * width)).collect(),
    })
}
