//! Per-point feature vectors: colorimetric channels plus the eigen-structure
//! of each point's local neighborhood.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::colorspace::srgb_to_lab;
use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::pcio::ColoredPointCloud;

/// Human-assigned point class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Green,
    Yellow,
    Trunk,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Green, Label::Yellow, Label::Trunk];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Green => "Green",
            Label::Yellow => "Yellow",
            Label::Trunk => "Trunk",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Green" => Ok(Label::Green),
            "Yellow" => Ok(Label::Yellow),
            "Trunk" => Ok(Label::Trunk),
            other => Err(Error::Validation(format!("unknown label '{other}'"))),
        }
    }
}

/// Eigenvalues (descending) and matching unit eigenvectors of a local
/// covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodEigen {
    pub values: [f64; 3],
    pub vectors: [[f64; 3]; 3],
}

/// One labeled point as stored in the label dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPointRecord {
    pub label: Label,
    pub a_star: f64,
    pub b_star: f64,
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub eigenvalues: [f64; 3],
    pub eigenvectors: [[f64; 3]; 3],
}

impl LabeledPointRecord {
    pub fn validate(&self) -> Result<()> {
        let [l1, l2, l3] = self.eigenvalues;
        if !(l1 >= l2 && l2 >= l3 && l3 >= 0.0) {
            return Err(Error::Validation(format!(
                "eigenvalues must be sorted descending and nonnegative, got {:?}",
                self.eigenvalues
            )));
        }
        for v in &self.eigenvectors {
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::Validation(format!("eigenvector {v:?} is not unit length")));
            }
        }
        Ok(())
    }

    /// Feature vector for this record under `schema`.
    pub fn features(&self, schema: &FeatureSchema) -> FeatureVector {
        let eigen = NeighborhoodEigen {
            values: self.eigenvalues,
            vectors: self.eigenvectors,
        };
        let mut out = Vec::with_capacity(schema.arity());
        schema.push_features(&mut out, self.a_star, self.b_star, [self.r, self.g, self.b], Some(&eigen));
        FeatureVector(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureChannel {
    AStar,
    BStar,
    R,
    G,
    B,
    /// Three eigenvalues followed by the three eigenvectors (12 columns).
    Eigen,
}

impl FeatureChannel {
    pub fn width(self) -> usize {
        match self {
            FeatureChannel::Eigen => 12,
            _ => 1,
        }
    }

    pub fn column_names(self) -> &'static [&'static str] {
        match self {
            FeatureChannel::AStar => &["a_star"],
            FeatureChannel::BStar => &["b_star"],
            FeatureChannel::R => &["r"],
            FeatureChannel::G => &["g"],
            FeatureChannel::B => &["b"],
            FeatureChannel::Eigen => &[
                "eig1", "eig2", "eig3", "ev1x", "ev1y", "ev1z", "ev2x", "ev2y", "ev2z", "ev3x", "ev3y", "ev3z",
            ],
        }
    }
}

/// Ordered list of channels making up a feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSchema {
    pub channels: Vec<FeatureChannel>,
    pub k_neighbors: usize,
}

impl Default for FeatureSchema {
    fn default() -> Self {
        FeatureSchema {
            channels: vec![
                FeatureChannel::AStar,
                FeatureChannel::BStar,
                FeatureChannel::R,
                FeatureChannel::G,
                FeatureChannel::B,
            ],
            k_neighbors: 30,
        }
    }
}

impl FeatureSchema {
    pub fn with_eigen() -> Self {
        let mut s = Self::default();
        s.channels.push(FeatureChannel::Eigen);
        s
    }

    pub fn arity(&self) -> usize {
        self.channels.iter().map(|c| c.width()).sum()
    }

    pub fn uses_eigen(&self) -> bool {
        self.channels.contains(&FeatureChannel::Eigen)
    }

    pub fn column_names(&self) -> Vec<&'static str> {
        self.channels
            .iter()
            .flat_map(|c| c.column_names().iter().copied())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::Validation("feature schema has no channels".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if !self.channels.iter().all(|c| seen.insert(*c)) {
            return Err(Error::Validation("feature schema repeats a channel".into()));
        }
        if self.uses_eigen() && self.k_neighbors < 3 {
            return Err(Error::Validation("k_neighbors must be >= 3".into()));
        }
        Ok(())
    }

    fn push_features(
        &self,
        out: &mut Vec<f64>,
        a_star: f64,
        b_star: f64,
        rgb: [u8; 3],
        eigen: Option<&NeighborhoodEigen>,
    ) {
        for ch in &self.channels {
            match ch {
                FeatureChannel::AStar => out.push(a_star),
                FeatureChannel::BStar => out.push(b_star),
                FeatureChannel::R => out.push(rgb[0] as f64),
                FeatureChannel::G => out.push(rgb[1] as f64),
                FeatureChannel::B => out.push(rgb[2] as f64),
                FeatureChannel::Eigen => {
                    let e = eigen.expect("eigen features requested without neighborhood");
                    out.extend_from_slice(&e.values);
                    out.extend(e.vectors.iter().flatten());
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Neighbor index over a cloud's xyz coordinates, built once and shared.
#[derive(Debug)]
pub struct NeighborIndex {
    tree: KdTree,
}

impl NeighborIndex {
    pub fn new(cloud: &ColoredPointCloud) -> Self {
        NeighborIndex {
            tree: KdTree::new(cloud.points.iter().map(|p| p.position()).collect()),
        }
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.len() == 0
    }

    /// Indices of the `k` nearest other points, nearest first.
    pub fn neighbors(&self, point_index: usize, k: usize) -> Vec<usize> {
        let q = *self.tree.point(point_index);
        self.tree.nearest(&q, k, Some(point_index))
    }

    /// Eigen-decomposition of the covariance of the `k` nearest neighbors of
    /// `point_index` (the point itself excluded).
    pub fn eigen(&self, point_index: usize, k: usize) -> Result<NeighborhoodEigen> {
        if k < 3 {
            return Err(Error::Validation(format!("k must be >= 3, got {k}")));
        }
        if self.len() < k + 1 {
            return Err(Error::InsufficientPoints {
                needed: k + 1,
                got: self.len(),
            });
        }
        if point_index >= self.len() {
            return Err(Error::Validation(format!("point index {point_index} out of range")));
        }
        let nbrs = self.neighbors(point_index, k);
        let pts: Vec<[f64; 3]> = nbrs.iter().map(|&i| *self.tree.point(i)).collect();
        Ok(covariance_eigen(&pts))
    }
}

/// Population covariance (1/n) of `pts` and its sorted eigen-decomposition.
pub fn covariance(pts: &[[f64; 3]]) -> [[f64; 3]; 3] {
    let n = pts.len() as f64;
    let mut mean = [0.0; 3];
    for p in pts {
        for a in 0..3 {
            mean[a] += p[a];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = [[0.0; 3]; 3];
    for p in pts {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    cov.iter_mut().flatten().for_each(|c| *c /= n);
    cov
}

pub fn covariance_eigen(pts: &[[f64; 3]]) -> NeighborhoodEigen {
    let cov = covariance(pts);
    let m = Matrix3::from_fn(|i, j| cov[i][j]);
    let eig = SymmetricEigen::new(m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut values = [0.0; 3];
    let mut vectors = [[0.0; 3]; 3];
    for (slot, &col) in order.iter().enumerate() {
        values[slot] = eig.eigenvalues[col].max(0.0);
        let v = eig.eigenvectors.column(col);
        let norm = v.norm();
        let mut u = [v[0] / norm, v[1] / norm, v[2] / norm];
        // Sign convention: largest-magnitude component positive.
        let lead = (0..3)
            .max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()).then(b.cmp(&a)))
            .unwrap();
        if u[lead] < 0.0 {
            u.iter_mut().for_each(|c| *c = -*c);
        }
        vectors[slot] = u;
    }
    NeighborhoodEigen { values, vectors }
}

/// Convenience wrapper that builds a one-off neighbor index.
pub fn neighborhood_eigen(cloud: &ColoredPointCloud, point_index: usize, k: usize) -> Result<NeighborhoodEigen> {
    if k >= 3 && cloud.len() < k + 1 {
        return Err(Error::InsufficientPoints {
            needed: k + 1,
            got: cloud.len(),
        });
    }
    NeighborIndex::new(cloud).eigen(point_index, k)
}

/// One feature vector per point, in cloud order.
pub fn featurize(cloud: &ColoredPointCloud, schema: &FeatureSchema) -> Result<Vec<FeatureVector>> {
    schema.validate()?;
    let index = if schema.uses_eigen() {
        if cloud.len() < schema.k_neighbors + 1 {
            return Err(Error::InsufficientPoints {
                needed: schema.k_neighbors + 1,
                got: cloud.len(),
            });
        }
        Some(NeighborIndex::new(cloud))
    } else {
        None
    };
    let arity = schema.arity();
    cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let lab = srgb_to_lab(p.r, p.g, p.b);
            let eigen = match &index {
                Some(idx) => Some(idx.eigen(i, schema.k_neighbors)?),
                None => None,
            };
            let mut v = Vec::with_capacity(arity);
            schema.push_features(&mut v, lab.a_star, lab.b_star, p.rgb(), eigen.as_ref());
            Ok(FeatureVector(v))
        })
        .collect()
}

/// Full label-dataset record for one point of a cloud.
pub fn record_for_point(
    cloud: &ColoredPointCloud,
    index: &NeighborIndex,
    point_index: usize,
    label: Label,
    k: usize,
) -> Result<LabeledPointRecord> {
    let p = cloud
        .points
        .get(point_index)
        .ok_or_else(|| Error::Validation(format!("point index {point_index} out of range")))?;
    let lab = srgb_to_lab(p.r, p.g, p.b);
    let eigen = index.eigen(point_index, k)?;
    Ok(LabeledPointRecord {
        label,
        a_star: lab.a_star,
        b_star: lab.b_star,
        r: p.r,
        g: p.g,
        b: p.b,
        eigenvalues: eigen.values,
        eigenvectors: eigen.vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcio::ColoredPoint;
    use proptest::prelude::*;

    fn cloud_from(pts: &[[f64; 3]]) -> ColoredPointCloud {
        ColoredPointCloud::new(
            "c",
            1,
            pts.iter()
                .map(|p| ColoredPoint::new(p[0] as f32, p[1] as f32, p[2] as f32, 110, 150, 115))
                .collect(),
        )
    }

    fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    #[test]
    fn plane_and_line_degeneracy() {
        let plane: Vec<[f64; 3]> = (0..7)
            .flat_map(|i| (0..7).map(move |j| [i as f64 * 0.1, j as f64 * 0.13, 1.0]))
            .collect();
        let e = neighborhood_eigen(&cloud_from(&plane), 24, 12).unwrap();
        assert!(e.values[2].abs() < 1e-9);
        assert!(e.values[1] > 1e-4);
        assert!((dot(&e.vectors[2], &[0.0, 0.0, 1.0]).abs() - 1.0).abs() < 1e-9);

        let line: Vec<[f64; 3]> = (0..40).map(|i| [i as f64 * 0.05, 2.0 * i as f64 * 0.05, 0.5]).collect();
        let e = neighborhood_eigen(&cloud_from(&line), 20, 10).unwrap();
        assert!(e.values[0] > 1e-3);
        assert!(e.values[1] < 1e-9 && e.values[2] < 1e-9);
    }

    #[test]
    fn insufficient_points() {
        let c = cloud_from(&[[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert!(matches!(
            neighborhood_eigen(&c, 0, 3),
            Err(Error::InsufficientPoints { needed: 4, got: 3 })
        ));
        assert!(matches!(
            featurize(&c, &FeatureSchema::with_eigen()),
            Err(Error::InsufficientPoints { .. })
        ));
    }

    #[test]
    fn color_schema_on_toy_cloud() {
        let c = ColoredPointCloud::new(
            "toy",
            1,
            vec![
                ColoredPoint::new(0.0, 0.0, 1.0, 0, 255, 0),
                ColoredPoint::new(0.0, 0.0, 1.0, 200, 170, 40),
                ColoredPoint::new(0.0, 0.0, 1.0, 110, 80, 60),
            ],
        );
        let schema = FeatureSchema::default();
        let f = featurize(&c, &schema).unwrap();
        assert_eq!(f.len(), 3);
        for (v, p) in f.iter().zip(&c.points) {
            let lab = srgb_to_lab(p.r, p.g, p.b);
            assert_eq!(v.0, vec![lab.a_star, lab.b_star, p.r as f64, p.g as f64, p.b as f64]);
        }
    }

    #[test]
    fn ab_only_on_pure_green() {
        let c = ColoredPointCloud::new("g", 1, vec![ColoredPoint::new(0.0, 0.0, 1.0, 0, 200, 0); 10]);
        let schema = FeatureSchema {
            channels: vec![FeatureChannel::AStar, FeatureChannel::BStar],
            k_neighbors: 30,
        };
        let f = featurize(&c, &schema).unwrap();
        assert!(f.iter().all(|v| v == &f[0] && v.0[0] < 0.0));
    }

    #[test]
    fn eigen_schema_arity() {
        assert_eq!(FeatureSchema::with_eigen().arity(), 17);
        let pts: Vec<[f64; 3]> = (0..64).map(|i| [(i % 4) as f64, ((i / 4) % 4) as f64, (i / 16) as f64 * 1.3]).collect();
        let c = cloud_from(&pts);
        let f = featurize(&c, &FeatureSchema::with_eigen()).unwrap();
        assert!(f.iter().all(|v| v.len() == 17));
        assert_eq!(FeatureSchema::with_eigen().column_names().len(), 17);
    }

    #[test]
    fn record_matches_featurize() {
        let pts: Vec<[f64; 3]> = (0..50).map(|i| [(i as f64).sin(), (i as f64 * 0.7).cos(), i as f64 * 0.01]).collect();
        let c = cloud_from(&pts);
        let schema = FeatureSchema::with_eigen();
        let idx = NeighborIndex::new(&c);
        let f = featurize(&c, &schema).unwrap();
        for i in [0, 17, 49] {
            let rec = record_for_point(&c, &idx, i, Label::Green, schema.k_neighbors.min(30)).unwrap();
            rec.validate().unwrap();
            assert_eq!(rec.features(&schema), f[i]);
        }
    }

    #[test]
    fn label_parse() {
        assert_eq!("Yellow".parse::<Label>().unwrap(), Label::Yellow);
        assert!("yellow".parse::<Label>().is_err());
    }

    fn rotation(ax: f64, ay: f64, az: f64) -> [[f64; 3]; 3] {
        let (sx, cx) = ax.sin_cos();
        let (sy, cy) = ay.sin_cos();
        let (sz, cz) = az.sin_cos();
        let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
        let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
        let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
        let mul = |a: [[f64; 3]; 3], b: [[f64; 3]; 3]| {
            let mut m = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
                }
            }
            m
        };
        mul(rz, mul(ry, rx))
    }

    proptest! {
        #[test]
        fn eigenvalues_invariant_under_rotation(
            pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -0.3f64..0.3), 5..40),
            ax in 0.0f64..6.3, ay in 0.0f64..6.3, az in 0.0f64..6.3,
        ) {
            let pts: Vec<[f64; 3]> = pts.into_iter().map(|(a, b, c)| [a, b, c]).collect();
            let r = rotation(ax, ay, az);
            let rotated: Vec<[f64; 3]> = pts.iter().map(|p| [dot(&r[0], p), dot(&r[1], p), dot(&r[2], p)]).collect();
            let e0 = covariance_eigen(&pts);
            let e1 = covariance_eigen(&rotated);
            for k in 0..3 {
                prop_assert!((e0.values[k] - e1.values[k]).abs() < 1e-6);
            }
        }

        #[test]
        fn eigen_invariants(pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 4..40)) {
            let pts: Vec<[f64; 3]> = pts.into_iter().map(|(a, b, c)| [a, b, c]).collect();
            let e = covariance_eigen(&pts);
            prop_assert!(e.values[0] >= e.values[1] && e.values[1] >= e.values[2] && e.values[2] >= 0.0);
            for v in &e.vectors {
                prop_assert!((dot(v, v).sqrt() - 1.0).abs() < 1e-6);
            }
            // Normalization (1/n vs 1/(n-1)) scales values but leaves vectors alone.
            let n = pts.len() as f64;
            let cov = covariance(&pts);
            let scaled: Vec<f64> = cov.iter().flatten().map(|c| c * n / (n - 1.0)).collect();
            let m = Matrix3::from_fn(|i, j| scaled[i * 3 + j]);
            let alt = SymmetricEigen::new(m);
            let mut alt_vals: Vec<f64> = alt.eigenvalues.iter().copied().collect();
            alt_vals.sort_by(|a, b| b.total_cmp(a));
            for (alt_v, v) in alt_vals.iter().zip(&e.values) {
                prop_assert!((alt_v.max(0.0) * (n - 1.0) / n - v).abs() < 1e-9);
            }
        }
    }
}
