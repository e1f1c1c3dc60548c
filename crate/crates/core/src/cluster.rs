//! K-means over (a\*, b\*) followed by merging cluster centers into
//! Green/Yellow/Trunk through rectangular a\*/b\* windows.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::colorspace::srgb_to_lab;
use crate::error::{Error, Result};
use crate::features::Label;
use crate::pcio::ColoredPointCloud;

pub const DEFAULT_CLUSTERS: usize = 20;
pub const MAX_ITERATIONS: usize = 300;
pub const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PointLabel {
    Green,
    Yellow,
    Trunk,
    Unassigned,
}

impl From<Label> for PointLabel {
    fn from(l: Label) -> Self {
        match l {
            Label::Green => PointLabel::Green,
            Label::Yellow => PointLabel::Yellow,
            Label::Trunk => PointLabel::Trunk,
        }
    }
}

impl fmt::Display for PointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointLabel::Green => "Green",
            PointLabel::Yellow => "Yellow",
            PointLabel::Trunk => "Trunk",
            PointLabel::Unassigned => "Unassigned",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedCloud {
    pub cloud: ColoredPointCloud,
    pub labels: Vec<PointLabel>,
}

impl ClassifiedCloud {
    pub fn new(cloud: ColoredPointCloud, labels: Vec<PointLabel>) -> Result<Self> {
        if labels.len() != cloud.len() {
            return Err(Error::Validation(format!(
                "{} labels for {} points",
                labels.len(),
                cloud.len()
            )));
        }
        Ok(ClassifiedCloud { cloud, labels })
    }

    pub fn count(&self, label: PointLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn fraction(&self, label: PointLabel) -> f64 {
        if self.labels.is_empty() {
            0.0
        } else {
            self.count(label) as f64 / self.labels.len() as f64
        }
    }
}

/// Closed rectangle in (a\*, b\*); infinite bounds leave a side open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub a_min: f64,
    pub a_max: f64,
    pub b_min: f64,
    pub b_max: f64,
}

impl Window {
    pub const UNBOUNDED: Window = Window {
        a_min: f64::NEG_INFINITY,
        a_max: f64::INFINITY,
        b_min: f64::NEG_INFINITY,
        b_max: f64::INFINITY,
    };

    pub fn contains(&self, a: f64, b: f64) -> bool {
        a >= self.a_min && a <= self.a_max && b >= self.b_min && b <= self.b_max
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |lo: f64, hi: f64| !lo.is_nan() && !hi.is_nan() && lo <= hi;
        if ok(self.a_min, self.a_max) && ok(self.b_min, self.b_max) {
            Ok(())
        } else {
            Err(Error::Validation(format!("malformed window {self:?}")))
        }
    }
}

// Config shorthand: `a = [lo, hi]` or any of `a_min`/`a_max`/`b_min`/`b_max`.
#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b_max: Option<f64>,
}

impl<'de> Deserialize<'de> for Window {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = WindowRepr::deserialize(d)?;
        if (r.a.is_some() && (r.a_min.is_some() || r.a_max.is_some()))
            || (r.b.is_some() && (r.b_min.is_some() || r.b_max.is_some()))
        {
            return Err(D::Error::custom("give either a range or min/max bounds, not both"));
        }
        let [a_min, a_max] = r.a.unwrap_or([
            r.a_min.unwrap_or(f64::NEG_INFINITY),
            r.a_max.unwrap_or(f64::INFINITY),
        ]);
        let [b_min, b_max] = r.b.unwrap_or([
            r.b_min.unwrap_or(f64::NEG_INFINITY),
            r.b_max.unwrap_or(f64::INFINITY),
        ]);
        Ok(Window {
            a_min,
            a_max,
            b_min,
            b_max,
        })
    }
}

impl Serialize for Window {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let finite = |v: f64| v.is_finite().then_some(v);
        WindowRepr {
            a_min: finite(self.a_min),
            a_max: finite(self.a_max),
            b_min: finite(self.b_min),
            b_max: finite(self.b_max),
            ..Default::default()
        }
        .serialize(s)
    }
}

/// Windows checked in priority order Green, Yellow, Trunk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeWindows {
    pub green: Window,
    pub yellow: Window,
    pub trunk: Window,
}

impl Default for MergeWindows {
    /// The 2023 season thresholds.
    fn default() -> Self {
        MergeWindows {
            green: Window {
                a_max: -10.0,
                b_min: 0.0,
                b_max: 25.0,
                ..Window::UNBOUNDED
            },
            yellow: Window {
                b_min: 45.0,
                ..Window::UNBOUNDED
            },
            trunk: Window {
                a_min: 0.0,
                b_min: 0.0,
                b_max: 50.0,
                ..Window::UNBOUNDED
            },
        }
    }
}

impl MergeWindows {
    pub fn validate(&self) -> Result<()> {
        self.green.validate()?;
        self.yellow.validate()?;
        self.trunk.validate()
    }

    pub fn label(&self, a: f64, b: f64) -> PointLabel {
        if self.green.contains(a, b) {
            PointLabel::Green
        } else if self.yellow.contains(a, b) {
            PointLabel::Yellow
        } else if self.trunk.contains(a, b) {
            PointLabel::Trunk
        } else {
            PointLabel::Unassigned
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centers: Vec<[f64; 2]>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    /// Sum of squared distances after each assignment step.
    pub objective_trace: Vec<f64>,
}

fn d2(p: &[f64; 2], c: &[f64; 2]) -> f64 {
    let da = p[0] - c[0];
    let db = p[1] - c[1];
    da * da + db * db
}

fn nearest(p: &[f64; 2], centers: &[[f64; 2]]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = d2(p, &centers[0]);
    for (j, c) in centers.iter().enumerate().skip(1) {
        let d = d2(p, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    (best, best_d)
}

fn seed_plus_plus(points: &[[f64; 2]], n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut centers = Vec::with_capacity(n);
    centers.push(points[rng.random_range(0..points.len())]);
    let mut dist: Vec<f64> = points.iter().map(|p| d2(p, &centers[0])).collect();
    while centers.len() < n {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in dist.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave target past the final sum.
            chosen.unwrap_or_else(|| dist.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick];
        centers.push(c);
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(d2(p, &c));
        }
    }
    centers
}

/// Lloyd's algorithm from deterministic k-means++ seeding.
pub fn kmeans_ab(points: &[[f64; 2]], n: usize, seed: u64) -> Result<KMeansFit> {
    if n == 0 {
        return Err(Error::Validation("number of clusters must be >= 1".into()));
    }
    if points.len() < n {
        return Err(Error::Degenerate(format!(
            "{} points cannot form {n} clusters",
            points.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_plus_plus(points, n, &mut rng);
    let mut assignments = vec![0usize; points.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut objective = 0.0;
        for (a, p) in assignments.iter_mut().zip(points) {
            let (j, d) = nearest(p, &centers);
            *a = j;
            objective += d;
        }
        trace.push(objective);
        let mut sums = vec![[0.0f64; 2]; n];
        let mut counts = vec![0usize; n];
        for (&a, p) in assignments.iter().zip(points) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            counts[a] += 1;
        }
        let mut shift = 0.0f64;
        for j in 0..n {
            if counts[j] == 0 {
                continue;
            }
            let c = [sums[j][0] / counts[j] as f64, sums[j][1] / counts[j] as f64];
            shift = shift.max(d2(&c, &centers[j]).sqrt());
            centers[j] = c;
        }
        if shift < TOLERANCE {
            break;
        }
    }
    let mut objective = 0.0;
    for (a, p) in assignments.iter_mut().zip(points) {
        let (j, d) = nearest(p, &centers);
        *a = j;
        objective += d;
    }
    trace.push(objective);
    Ok(KMeansFit {
        centers,
        assignments,
        iterations,
        objective_trace: trace,
    })
}

/// Label of each cluster center.
pub fn center_labels(centers: &[[f64; 2]], windows: &MergeWindows) -> Vec<PointLabel> {
    centers.iter().map(|c| windows.label(c[0], c[1])).collect()
}

/// Per-point labels inherited from the window containing each point's center.
pub fn merge_clusters(centers: &[[f64; 2]], assignments: &[usize], windows: &MergeWindows) -> Vec<PointLabel> {
    let by_center = center_labels(centers, windows);
    assignments.iter().map(|&a| by_center[a]).collect()
}

pub fn ab_points(cloud: &ColoredPointCloud) -> Vec<[f64; 2]> {
    cloud
        .points
        .iter()
        .map(|p| {
            let lab = srgb_to_lab(p.r, p.g, p.b);
            [lab.a_star, lab.b_star]
        })
        .collect()
}

pub fn classify_kmeans(cloud: &ColoredPointCloud, n: usize, windows: &MergeWindows, seed: u64) -> Result<ClassifiedCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput("cannot classify an empty cloud".into()));
    }
    let points = ab_points(cloud);
    let fit = kmeans_ab(&points, n, seed)?;
    let labels = merge_clusters(&fit.centers, &fit.assignments, windows);
    Ok(ClassifiedCloud {
        cloud: cloud.clone(),
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcio::ColoredPoint;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64) -> (Vec<[f64; 2]>, [[f64; 2]; 2]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut pts = Vec::new();
        for &(ca, cb) in &[(-30.0, 10.0), (20.0, 60.0)] {
            for _ in 0..200 {
                pts.push([ca + noise.sample(&mut rng), cb + noise.sample(&mut rng)]);
            }
        }
        let mean = |s: &[[f64; 2]]| {
            let n = s.len() as f64;
            [s.iter().map(|p| p[0]).sum::<f64>() / n, s.iter().map(|p| p[1]).sum::<f64>() / n]
        };
        let means = [mean(&pts[..200]), mean(&pts[200..])];
        (pts, means)
    }

    #[test]
    fn two_blobs_recover_means() {
        let (pts, means) = blobs(3);
        let fit = kmeans_ab(&pts, 2, 7).unwrap();
        for m in &means {
            let best = fit.centers.iter().map(|c| d2(c, m).sqrt()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-3, "center missing for blob mean {m:?}");
        }
        assert!(fit.assignments[..200].iter().all(|&a| a == fit.assignments[0]));
        assert!(fit.assignments[200..].iter().all(|&a| a != fit.assignments[0]));
    }

    #[test]
    fn identical_points_single_cluster() {
        let pts = vec![[3.5, -2.0]; 17];
        let fit = kmeans_ab(&pts, 1, 0).unwrap();
        assert_eq!(fit.centers, vec![[3.5, -2.0]]);
        // More clusters than distinct points still terminates.
        let fit = kmeans_ab(&pts, 4, 0).unwrap();
        assert!(fit.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(kmeans_ab(&[[0.0, 0.0]], 2, 0), Err(Error::Degenerate(_))));
        assert!(matches!(kmeans_ab(&[[0.0, 0.0]], 0, 0), Err(Error::Validation(_))));
    }

    #[test]
    fn window_examples() {
        let w = MergeWindows::default();
        assert_eq!(w.label(-20.0, 10.0), PointLabel::Green);
        assert_eq!(w.label(5.0, 30.0), PointLabel::Trunk);
        assert_eq!(w.label(-5.0, 30.0), PointLabel::Unassigned);
        assert_eq!(w.label(-15.0, 50.0), PointLabel::Yellow);
        assert_eq!(w.label(-1.8, 65.3), PointLabel::Yellow);
        // Overlap of Yellow and Trunk resolves by priority.
        assert_eq!(w.label(5.0, 47.0), PointLabel::Yellow);
    }

    #[test]
    fn window_shorthand_parses() {
        #[derive(Deserialize)]
        struct Doc {
            windows: MergeWindows,
        }
        let text = r#"
            [windows]
            green.a_max = -10
            green.b = [0, 25]
            yellow.b_min = 45
            trunk.a_min = 0
            trunk.b = [0, 50]
        "#;
        let doc: Doc = toml::from_str(text).unwrap();
        assert_eq!(doc.windows, MergeWindows::default());
        let back = toml::to_string(&MergeWindows::default()).unwrap();
        let again: MergeWindows = toml::from_str(&back).unwrap();
        assert_eq!(again, MergeWindows::default());
        assert!(toml::from_str::<Doc>("[windows]\ngreen.b = [0, 1]\ngreen.b_min = 3\nyellow = {}\ntrunk = {}").is_err());
        let bad = MergeWindows {
            green: Window {
                a_min: 5.0,
                a_max: -5.0,
                ..Window::UNBOUNDED
            },
            ..MergeWindows::default()
        };
        assert!(bad.validate().is_err());
    }

    fn cloud_of(colors: &[(u8, u8, u8)]) -> ColoredPointCloud {
        ColoredPointCloud::new(
            "c",
            1,
            colors
                .iter()
                .enumerate()
                .map(|(i, &(r, g, b))| ColoredPoint::new(i as f32 * 0.01, 0.0, 1.0, r, g, b))
                .collect(),
        )
    }

    #[test]
    fn pure_green_cloud() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 3.0).unwrap();
        let jitter = |v: u8, rng: &mut ChaCha8Rng| (v as f64 + noise.sample(rng)).round().clamp(0.0, 255.0) as u8;
        let colors: Vec<_> = (0..2000)
            .map(|_| (jitter(110, &mut rng), jitter(150, &mut rng), jitter(115, &mut rng)))
            .collect();
        let c = classify_kmeans(&cloud_of(&colors), DEFAULT_CLUSTERS, &MergeWindows::default(), 1).unwrap();
        assert!(c.fraction(PointLabel::Green) >= 0.99);
    }

    #[test]
    fn classify_deterministic_and_errors() {
        let colors: Vec<_> = (0..300u32).map(|i| ((i % 200) as u8, 150, (i % 97) as u8)).collect();
        let c = cloud_of(&colors);
        let a = classify_kmeans(&c, 5, &MergeWindows::default(), 9).unwrap();
        let b = classify_kmeans(&c, 5, &MergeWindows::default(), 9).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            classify_kmeans(&cloud_of(&[]), 5, &MergeWindows::default(), 0),
            Err(Error::EmptyInput(_))
        ));
    }

    proptest! {
        #[test]
        fn objective_non_increasing(
            pts in proptest::collection::vec((-60.0f64..60.0, -60.0f64..60.0), 5..200),
            n in 1usize..6,
            seed in any::<u64>(),
        ) {
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(a, b)| [a, b]).collect();
            prop_assume!(pts.len() >= n);
            let fit = kmeans_ab(&pts, n, seed).unwrap();
            for w in fit.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-9);
            }
            // Every point sits at a nearest center, lowest index on ties.
            for (p, &a) in pts.iter().zip(&fit.assignments) {
                prop_assert_eq!(nearest(p, &fit.centers).0, a);
            }
        }

        #[test]
        fn merge_invariant_under_relabeling(
            centers in proptest::collection::vec((-80.0f64..80.0, -20.0f64..90.0), 1..12),
            raw in proptest::collection::vec(any::<usize>(), 1..100),
            rot in any::<usize>(),
        ) {
            let centers: Vec<[f64; 2]> = centers.into_iter().map(|(a, b)| [a, b]).collect();
            let k = centers.len();
            let assignments: Vec<usize> = raw.iter().map(|r| r % k).collect();
            let perm: Vec<usize> = (0..k).map(|j| (j + rot) % k).collect();
            let mut permuted = vec![[0.0; 2]; k];
            for j in 0..k {
                permuted[perm[j]] = centers[j];
            }
            let relabeled: Vec<usize> = assignments.iter().map(|&a| perm[a]).collect();
            let w = MergeWindows::default();
            prop_assert_eq!(merge_clusters(&centers, &assignments, &w), merge_clusters(&permuted, &relabeled, &w));
        }
    }
}
