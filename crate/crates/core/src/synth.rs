//! Synthetic orchard generator with known per-point provenance: single trees,
//! full camera scenes (tree, sky, far row, ground strip) and whole seasons
//! with nitrogen-dependent senescence.
//!
//! All randomness is drawn from seeded ChaCha streams. Geometry, color noise
//! and the yellow ranking of foliage points use separate streams, so changing
//! only the yellow fraction recolors a fixed set of points and the yellow set
//! grows monotonically with the fraction.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::colorspace::srgb_to_lab;
use crate::error::{Error, Result};
use crate::features::{record_for_point, Label, NeighborIndex};
use crate::pcio::{ColoredPoint, ColoredPointCloud, LabelDataset, TreeEntry, TreeManifest};
use crate::treeseg::{SegmentationParams, UpAxis, UpSign, Vertical};
use crate::yindex::{TreeObservation, YellownessIndex};

pub const GREEN_RGB: [u8; 3] = [110, 150, 115];
pub const YELLOW_RGB: [u8; 3] = [200, 170, 40];
pub const TRUNK_RGB: [u8; 3] = [110, 80, 60];
const SKY_RGB: [u8; 3] = [135, 190, 235];
const GROUND_RGB: [u8; 3] = [95, 85, 70];

const STREAM_GEOMETRY: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_RANK: u64 = 3;
const STREAM_ORDER: u64 = 4;
const STREAM_SCENE: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn base_color(label: Label) -> [u8; 3] {
    match label {
        Label::Green => GREEN_RGB,
        Label::Yellow => YELLOW_RGB,
        Label::Trunk => TRUNK_RGB,
    }
}

fn jitter(base: [u8; 3], noise: [f64; 3]) -> [u8; 3] {
    std::array::from_fn(|c| (base[c] as f64 + noise[c]).round().clamp(0.0, 255.0) as u8)
}

fn place(vertical: Vertical, height: f64, lateral: f64, depth: f64) -> (f32, f32, f32) {
    let h = match vertical.sign {
        UpSign::Positive => height,
        UpSign::Negative => -height,
    };
    match vertical.axis {
        UpAxis::X => (h as f32, lateral as f32, depth as f32),
        UpAxis::Y => (lateral as f32, h as f32, depth as f32),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthTreeSpec {
    /// Height of the trunk base above the scene's ground level.
    pub base_height_m: f64,
    /// Tree height above its base.
    pub height_m: f64,
    pub crown_width_m: f64,
    pub crown_depth_m: f64,
    /// Camera distance to the tree center.
    pub distance_m: f64,
    pub point_count: usize,
    pub yellow_fraction: f64,
    pub trunk_fraction: f64,
    /// Per-channel sRGB noise standard deviation.
    pub color_sigma: f64,
    /// Absolute heights of the trellis wires, ascending.
    pub wire_heights_m: Vec<f64>,
    pub vertical: Vertical,
    pub seed: u64,
}

impl Default for SynthTreeSpec {
    fn default() -> Self {
        SynthTreeSpec {
            base_height_m: 0.75,
            height_m: 2.5,
            crown_width_m: 1.2,
            crown_depth_m: 0.8,
            distance_m: 1.8,
            point_count: 20_000,
            yellow_fraction: 0.0,
            trunk_fraction: 0.1,
            color_sigma: 3.0,
            wire_heights_m: vec![1.15, 1.65, 2.15, 2.65],
            vertical: Vertical::default(),
            seed: 0,
        }
    }
}

impl SynthTreeSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("tree spec: {m}")));
        if !(0.0..=1.0).contains(&self.yellow_fraction) {
            return bad("yellow_fraction must be in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.trunk_fraction) {
            return bad("trunk_fraction must be in [0, 1)");
        }
        if !(self.height_m > 0.0 && self.crown_width_m > 0.0 && self.crown_depth_m > 0.0) {
            return bad("dimensions must be positive");
        }
        if !(self.distance_m - self.crown_depth_m / 2.0 > 0.0) {
            return bad("tree must sit in front of the camera");
        }
        if !(self.color_sigma >= 0.0) {
            return bad("color_sigma must be nonnegative");
        }
        if self.point_count == 0 {
            return bad("point_count must be positive");
        }
        if self.wire_heights_m.windows(2).any(|w| w[0] >= w[1]) {
            return bad("wire heights must be ascending");
        }
        Ok(())
    }

    /// Exact (trunk, yellow, green) counts.
    pub fn counts(&self) -> (usize, usize, usize) {
        let trunk = (self.trunk_fraction * self.point_count as f64).round() as usize;
        let foliage = self.point_count - trunk;
        let yellow = (self.yellow_fraction * foliage as f64).round() as usize;
        (trunk, yellow, foliage - yellow)
    }

    pub fn top_height(&self) -> f64 {
        self.base_height_m + self.height_m
    }

    /// Trellis band between the second and fourth wires, if defined.
    pub fn wire_band(&self) -> Option<(f64, f64)> {
        (self.wire_heights_m.len() >= 4).then(|| (self.wire_heights_m[1], self.wire_heights_m[3]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeSample {
    pub cloud: ColoredPointCloud,
    pub labels: Vec<Label>,
    /// Height of each point above the scene ground, before axis mapping.
    pub heights: Vec<f64>,
}

impl TreeSample {
    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn true_index(&self) -> Result<YellownessIndex> {
        YellownessIndex::from_counts(self.count(Label::Yellow) as u64, self.count(Label::Green) as u64)
    }

    /// Index restricted to points with height in `[low, high)`.
    pub fn band_index(&self, low: f64, high: f64) -> Result<YellownessIndex> {
        let mut y = 0;
        let mut g = 0;
        for (l, h) in self.labels.iter().zip(&self.heights) {
            if *h >= low && *h < high {
                match l {
                    Label::Yellow => y += 1,
                    Label::Green => g += 1,
                    Label::Trunk => {}
                }
            }
        }
        YellownessIndex::from_counts(y, g)
    }
}

struct RawPoint {
    height: f64,
    lateral: f64,
    depth: f64,
    label: Label,
}

fn tree_points(spec: &SynthTreeSpec) -> Vec<RawPoint> {
    let (n_trunk, n_yellow, _) = spec.counts();
    let n = spec.point_count;
    let mut geo = stream(spec.seed, STREAM_GEOMETRY);
    let mut pts = Vec::with_capacity(n);
    let trunk_top = spec.base_height_m + 0.35 * spec.height_m;
    for _ in 0..n_trunk {
        let theta: f64 = geo.random_range(0.0..std::f64::consts::TAU);
        let r = 0.06;
        pts.push(RawPoint {
            height: geo.random_range(spec.base_height_m..trunk_top),
            lateral: r * theta.cos(),
            depth: spec.distance_m + r * theta.sin(),
            label: Label::Trunk,
        });
    }
    let crown_center = spec.base_height_m + 0.625 * spec.height_m;
    let crown_half = 0.375 * spec.height_m;
    while pts.len() < n {
        let u: [f64; 3] = std::array::from_fn(|_| geo.random_range(-1.0..1.0));
        if u.iter().map(|v| v * v).sum::<f64>() > 1.0 {
            continue;
        }
        pts.push(RawPoint {
            height: crown_center + crown_half * u[0],
            lateral: 0.5 * spec.crown_width_m * u[1],
            depth: spec.distance_m + 0.5 * spec.crown_depth_m * u[2],
            label: Label::Green,
        });
    }
    // Nested yellow set: foliage points ranked once, the first n_yellow turn yellow.
    let mut rank: Vec<usize> = (n_trunk..n).collect();
    rank.shuffle(&mut stream(spec.seed, STREAM_RANK));
    for &i in &rank[..n_yellow] {
        pts[i].label = Label::Yellow;
    }
    pts
}

fn noise_vectors(seed: u64, n: usize, sigma: f64) -> Vec<[f64; 3]> {
    let mut rng = stream(seed, STREAM_NOISE);
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|_| std::array::from_fn(|_| sigma * normal.sample(&mut rng)))
        .collect()
}

pub fn gen_tree(spec: &SynthTreeSpec) -> Result<TreeSample> {
    spec.validate()?;
    let raw = tree_points(spec);
    let noise = noise_vectors(spec.seed, raw.len(), spec.color_sigma);
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.shuffle(&mut stream(spec.seed, STREAM_ORDER));
    let mut points = Vec::with_capacity(raw.len());
    let mut labels = Vec::with_capacity(raw.len());
    let mut heights = Vec::with_capacity(raw.len());
    for &i in &order {
        let p = &raw[i];
        let [r, g, b] = jitter(base_color(p.label), noise[i]);
        let (x, y, z) = place(spec.vertical, p.height, p.lateral, p.depth);
        points.push(ColoredPoint::new(x, y, z, r, g, b));
        labels.push(p.label);
        heights.push(p.height);
    }
    Ok(TreeSample {
        cloud: ColoredPointCloud::new(format!("synth-{}", spec.seed), 1, points),
        labels,
        heights,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Tree,
    Sky,
    Background,
    Ground,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSceneSpec {
    pub tree: SynthTreeSpec,
    pub segmentation: SegmentationParams,
    pub sky_points: usize,
    /// Depth of the sky patch; inside the depth range so only color removes it.
    pub sky_depth_m: f64,
    /// Sky blue channel stays at least this far above the sky threshold.
    pub sky_margin: u8,
    pub background_points: usize,
    /// Far row sits at least this far beyond the depth threshold.
    pub background_margin_m: f64,
    pub background_yellow_fraction: f64,
    pub ground_points: usize,
    pub ground_thickness_m: f64,
    /// Clearance between the ground band cut and the nearest tree or ground point.
    pub ground_margin_m: f64,
}

impl Default for SynthSceneSpec {
    fn default() -> Self {
        SynthSceneSpec {
            tree: SynthTreeSpec::default(),
            segmentation: SegmentationParams::default(),
            sky_points: 3000,
            sky_depth_m: 2.5,
            sky_margin: 30,
            background_points: 3000,
            background_margin_m: 0.5,
            background_yellow_fraction: 0.3,
            ground_points: 2000,
            ground_thickness_m: 0.1,
            ground_margin_m: 0.1,
        }
    }
}

impl SynthSceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.tree.validate()?;
        self.segmentation.validate()?;
        let bad = |m: String| Err(Error::Validation(format!("scene spec: {m}")));
        let seg = &self.segmentation;
        if self.sky_margin == 0 || seg.sky_blue_threshold as u16 + self.sky_margin as u16 > 255 {
            return bad("sky margin must be positive and leave room below 255".into());
        }
        if !(self.background_margin_m > 0.0) {
            return bad("background margin must be positive".into());
        }
        if !(self.ground_margin_m > 0.0) {
            return bad("ground margin must be positive".into());
        }
        if !(self.sky_depth_m > 0.0 && self.sky_depth_m <= seg.max_depth_m) {
            return bad("sky patch must lie inside the depth range".into());
        }
        if self.tree.distance_m + self.tree.crown_depth_m / 2.0 > seg.max_depth_m {
            return bad("tree extends past the depth threshold".into());
        }
        if !(self.ground_thickness_m >= 0.0 && self.ground_thickness_m + self.ground_margin_m <= seg.ground_band_m) {
            return bad(format!(
                "ground strip {} m plus margin exceeds the ground band",
                self.ground_thickness_m
            ));
        }
        if self.tree.base_height_m < self.ground_thickness_m + seg.ground_band_m + self.ground_margin_m {
            return bad("tree base is inside the ground band".into());
        }
        if !(0.0..=1.0).contains(&self.background_yellow_fraction) {
            return bad("background_yellow_fraction must be in [0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSample {
    pub cloud: ColoredPointCloud,
    pub provenance: Vec<Provenance>,
    /// Tree label for tree points.
    pub labels: Vec<Option<Label>>,
    pub heights: Vec<f64>,
}

impl SceneSample {
    pub fn tree_indices(&self) -> Vec<usize> {
        (0..self.provenance.len())
            .filter(|&i| self.provenance[i] == Provenance::Tree)
            .collect()
    }
}

pub fn gen_scene(spec: &SynthSceneSpec) -> Result<SceneSample> {
    spec.validate()?;
    let tree = gen_tree(&spec.tree)?;
    let seg = &spec.segmentation;
    let vertical = spec.tree.vertical;
    let mut rng = stream(spec.tree.seed, STREAM_SCENE);
    let normal = Normal::new(0.0, spec.tree.color_sigma.max(1e-12)).unwrap();
    let noisy = |base: [u8; 3], rng: &mut ChaCha8Rng| {
        let n: [f64; 3] = std::array::from_fn(|_| normal.sample(rng));
        jitter(base, n)
    };
    let top = spec.tree.top_height();
    let half_w = spec.tree.crown_width_m;

    let mut entries: Vec<(ColoredPoint, Provenance, Option<Label>, f64)> = tree
        .cloud
        .points
        .iter()
        .zip(&tree.labels)
        .zip(&tree.heights)
        .map(|((p, l), h)| (*p, Provenance::Tree, Some(*l), *h))
        .collect();

    let sky_floor = seg.sky_blue_threshold + spec.sky_margin;
    for _ in 0..spec.sky_points {
        let h = rng.random_range(top + 0.2..top + 1.5);
        let lat = rng.random_range(-2.0 * half_w..2.0 * half_w);
        let mut c = noisy(SKY_RGB, &mut rng);
        c[2] = c[2].max(sky_floor);
        let (x, y, z) = place(vertical, h, lat, spec.sky_depth_m);
        entries.push((ColoredPoint::new(x, y, z, c[0], c[1], c[2]), Provenance::Sky, None, h));
    }
    let far = seg.max_depth_m + spec.background_margin_m;
    for _ in 0..spec.background_points {
        let h = rng.random_range(0.0..top);
        let lat = rng.random_range(-3.0 * half_w..3.0 * half_w);
        let depth = rng.random_range(far..far + 2.0);
        let base = if rng.random::<f64>() < spec.background_yellow_fraction {
            YELLOW_RGB
        } else {
            GREEN_RGB
        };
        let c = noisy(base, &mut rng);
        let (x, y, z) = place(vertical, h, lat, depth);
        entries.push((ColoredPoint::new(x, y, z, c[0], c[1], c[2]), Provenance::Background, None, h));
    }
    let near = spec.tree.distance_m - spec.tree.crown_depth_m;
    for i in 0..spec.ground_points {
        // The first ground point pins the strip's lowest height at 0.
        let h = if i == 0 {
            0.0
        } else {
            rng.random_range(0.0..=spec.ground_thickness_m)
        };
        let lat = rng.random_range(-2.0 * half_w..2.0 * half_w);
        let depth = rng.random_range(near.max(0.3)..seg.max_depth_m);
        let c = noisy(GROUND_RGB, &mut rng);
        let (x, y, z) = place(vertical, h, lat, depth);
        entries.push((ColoredPoint::new(x, y, z, c[0], c[1], c[2]), Provenance::Ground, None, h));
    }
    entries.shuffle(&mut rng);
    let mut cloud = ColoredPointCloud::new(tree.cloud.source_id.clone(), 1, Vec::with_capacity(entries.len()));
    let mut provenance = Vec::with_capacity(entries.len());
    let mut labels = Vec::with_capacity(entries.len());
    let mut heights = Vec::with_capacity(entries.len());
    for (p, prov, l, h) in entries {
        cloud.points.push(p);
        provenance.push(prov);
        labels.push(l);
        heights.push(h);
    }
    Ok(SceneSample {
        cloud,
        provenance,
        labels,
        heights,
    })
}

/// Tree-point recall and non-tree contamination of a kept index set.
pub fn segmentation_scores(provenance: &[Provenance], kept: &[usize]) -> (f64, f64) {
    let total_tree = provenance.iter().filter(|&&p| p == Provenance::Tree).count();
    let kept_tree = kept.iter().filter(|&&i| provenance[i] == Provenance::Tree).count();
    let recall = if total_tree == 0 { 1.0 } else { kept_tree as f64 / total_tree as f64 };
    let contamination = if kept.is_empty() {
        0.0
    } else {
        (kept.len() - kept_tree) as f64 / kept.len() as f64
    };
    (recall, contamination)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SenescenceModel {
    /// Week at which a tree with 2.0 % leaf N is half yellow.
    pub onset_week: f64,
    /// Onset delay per percentage point of leaf N above 2.0.
    pub onset_per_n: f64,
    /// Logistic width in weeks.
    pub width_weeks: f64,
}

impl Default for SenescenceModel {
    fn default() -> Self {
        SenescenceModel {
            onset_week: 3.5,
            onset_per_n: 2.0,
            width_weeks: 0.6,
        }
    }
}

impl SenescenceModel {
    pub fn onset(&self, leaf_n_percent: f64) -> f64 {
        self.onset_week + self.onset_per_n * (leaf_n_percent - 2.0)
    }

    pub fn yellow_fraction(&self, week: u32, leaf_n_percent: f64) -> f64 {
        let t = (week as f64 - self.onset(leaf_n_percent)) / self.width_weeks;
        1.0 / (1.0 + (-t).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSeasonSpec {
    pub n_trees: usize,
    pub trees_per_row: usize,
    pub weeks: u32,
    pub leaf_n_min: f64,
    pub leaf_n_max: f64,
    pub senescence: SenescenceModel,
    pub scene: SynthSceneSpec,
    /// Leaf mass represented by one synthetic point, for ground-truth masses.
    pub grams_per_point: f64,
    pub seed: u64,
}

impl Default for SynthSeasonSpec {
    fn default() -> Self {
        SynthSeasonSpec {
            n_trees: 10,
            trees_per_row: 5,
            weeks: 6,
            leaf_n_min: 1.5,
            leaf_n_max: 2.9,
            senescence: SenescenceModel::default(),
            scene: SynthSceneSpec::default(),
            grams_per_point: 0.25,
            seed: 0,
        }
    }
}

impl SynthSeasonSpec {
    pub fn validate(&self) -> Result<()> {
        if self.weeks < 2 {
            return Err(Error::Validation("season needs at least 2 weeks".into()));
        }
        if self.n_trees == 0 || self.trees_per_row == 0 {
            return Err(Error::Validation("season needs trees".into()));
        }
        if !(self.leaf_n_min > 0.0 && self.leaf_n_min <= self.leaf_n_max && self.leaf_n_max < 10.0) {
            return Err(Error::Validation("leaf N range must lie in (0, 10)".into()));
        }
        if !(self.senescence.width_weeks > 0.0 && self.senescence.onset_per_n >= 0.0) {
            return Err(Error::Validation("senescence width must be positive".into()));
        }
        if !(self.grams_per_point > 0.0) {
            return Err(Error::Validation("grams_per_point must be positive".into()));
        }
        self.scene.validate()
    }

    pub fn leaf_n(&self, tree: usize) -> f64 {
        if self.n_trees == 1 {
            return self.leaf_n_min;
        }
        let t = tree as f64 / (self.n_trees - 1) as f64;
        let n = self.leaf_n_min + t * (self.leaf_n_max - self.leaf_n_min);
        (n * 1000.0).round() / 1000.0
    }

    pub fn tree_id(&self, tree: usize) -> String {
        format!("T{:03}", tree + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeasonCloud {
    pub tree_id: String,
    pub week: u32,
    pub scene: SceneSample,
    pub truth: YellownessIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeasonSample {
    /// Entries carry no cloud paths; writers fill them in.
    pub manifest: TreeManifest,
    pub clouds: Vec<SeasonCloud>,
    /// Generator truth per tree-week (index and ground_truth both set to it).
    pub truth: Vec<TreeObservation>,
}

pub fn gen_season(spec: &SynthSeasonSpec) -> Result<SeasonSample> {
    spec.validate()?;
    let mut manifest = TreeManifest::default();
    let mut clouds = Vec::new();
    let mut truth = Vec::new();
    let last_week = spec.weeks;
    for t in 0..spec.n_trees {
        let tree_id = spec.tree_id(t);
        let n = spec.leaf_n(t);
        let tree_seed = spec.seed.wrapping_mul(1_000_003).wrapping_add(t as u64 + 1);
        let mut entry = TreeEntry {
            tree_id: tree_id.clone(),
            row: (t / spec.trees_per_row) as u32 + 1,
            position_in_row: (t % spec.trees_per_row) as u32 + 1,
            clouds: Vec::new(),
            leaf_n_percent: Some(n),
            ground_truth_yellow_mass_g: None,
            ground_truth_green_mass_g: None,
            ground_truth_week: Some(last_week),
        };
        for week in 1..=spec.weeks {
            let mut scene = spec.scene.clone();
            scene.tree.seed = tree_seed;
            scene.tree.yellow_fraction = spec.senescence.yellow_fraction(week, n);
            let mut sample = gen_scene(&scene)?;
            sample.cloud.source_id = tree_id.clone();
            sample.cloud.capture_week = week;
            let (_, y, g) = scene.tree.counts();
            let index = YellownessIndex::from_counts(y as u64, g as u64)?;
            if week == last_week {
                let (yb, gb) = band_counts(&sample, scene.tree.wire_band());
                entry.ground_truth_yellow_mass_g = Some(yb as f64 * spec.grams_per_point);
                entry.ground_truth_green_mass_g = Some(gb as f64 * spec.grams_per_point);
            }
            truth.push(TreeObservation {
                tree_id: tree_id.clone(),
                week,
                index,
                ground_truth: Some(index.value),
                leaf_n_percent: Some(n),
            });
            clouds.push(SeasonCloud {
                tree_id: tree_id.clone(),
                week,
                scene: sample,
                truth: index,
            });
        }
        manifest.entries.push(entry);
    }
    Ok(SeasonSample {
        manifest,
        clouds,
        truth,
    })
}

fn band_counts(scene: &SceneSample, band: Option<(f64, f64)>) -> (usize, usize) {
    let (lo, hi) = band.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let mut y = 0;
    let mut g = 0;
    for (l, h) in scene.labels.iter().zip(&scene.heights) {
        if *h >= lo && *h < hi {
            match l {
                Some(Label::Yellow) => y += 1,
                Some(Label::Green) => g += 1,
                _ => {}
            }
        }
    }
    (y, g)
}

/// Labeled training rows drawn from a synthetic tree: `per_class` points of
/// each class, features computed on the full tree cloud.
pub fn gen_label_dataset(spec: &SynthTreeSpec, per_class: usize, k_neighbors: usize) -> Result<LabelDataset> {
    let sample = gen_tree(spec)?;
    let index = NeighborIndex::new(&sample.cloud);
    let mut rng = stream(spec.seed, STREAM_ORDER + 100);
    let mut rows = Vec::with_capacity(3 * per_class);
    for label in Label::ALL {
        let mut members: Vec<usize> = (0..sample.labels.len()).filter(|&i| sample.labels[i] == label).collect();
        if members.len() < per_class {
            return Err(Error::InsufficientPoints {
                needed: per_class,
                got: members.len(),
            });
        }
        members.shuffle(&mut rng);
        members.truncate(per_class);
        members.sort_unstable();
        for i in members {
            rows.push(record_for_point(&sample.cloud, &index, i, label, k_neighbors)?);
        }
    }
    Ok(LabelDataset { rows })
}

/// Whether a color falls in the (a\*, b\*) window intended for `label`.
pub fn in_intended_window(rgb: [u8; 3], label: Label, windows: &crate::cluster::MergeWindows) -> bool {
    let lab = srgb_to_lab(rgb[0], rgb[1], rgb[2]);
    let w = match label {
        Label::Green => &windows.green,
        Label::Yellow => &windows.yellow,
        Label::Trunk => &windows.trunk,
    };
    w.contains(lab.a_star, lab.b_star)
}
