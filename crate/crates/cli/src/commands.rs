use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use canopy::cluster::classify_kmeans;
use canopy::fieldstats::{weekly_report, write_map_to};
use canopy::gboost::{classify_gbm, default_grid, sweep, train, GbmModel};
use canopy::pcio::{
    read_cloud, read_label_dataset, read_manifest, read_observations, write_cloud, write_label_dataset,
    write_manifest, write_observations, WeekCloud,
};
use canopy::synth::{gen_label_dataset, gen_season};
use canopy::treeseg::segment_tree;
use canopy::yindex::{crop_band, ground_truth_index, validate, yellowness, ValidationReport};
use canopy::{ClassifiedCloud, ColoredPointCloud, Error, Result, TreeManifest, TreeObservation};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Method, RunConfig};
use crate::tables::{failures_table, opt, stats_tables, sweep_table, write_json, Failure, Table};

/// Result of a command: files written and per-tree failures.
#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub failures: Vec<Failure>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            3
        }
    }

    fn write_table(&mut self, table: &Table, path: PathBuf) -> Result<()> {
        table.write(&path)?;
        self.outputs.push(path);
        Ok(())
    }

    fn write_failures(&mut self, out: &Path) -> Result<()> {
        let table = failures_table(&self.failures);
        self.write_table(&table, out.join("failures.csv"))
    }
}

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) => o.exit_code(),
        Err(e) if e.is_validation() => 2,
        Err(_) => 1,
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// One cloud of the manifest.
#[derive(Debug, Clone)]
pub struct Job {
    pub tree_id: String,
    pub week: u32,
    pub path: PathBuf,
    pub leaf_n_percent: Option<f64>,
    pub ground_truth: Option<(f64, f64)>,
    pub ground_truth_week: Option<u32>,
}

pub fn jobs(manifest: &TreeManifest) -> Vec<Job> {
    let mut out = Vec::new();
    for e in &manifest.entries {
        for wc in &e.clouds {
            out.push(Job {
                tree_id: e.tree_id.clone(),
                week: wc.week,
                path: manifest.resolve(wc),
                leaf_n_percent: e.leaf_n_percent,
                ground_truth: e.ground_truth_masses(),
                ground_truth_week: e.ground_truth_week(),
            });
        }
    }
    out
}

/// Maps `f` over `items` on a pool of `workers` threads, keeping input order.
pub fn par_map<T: Sync, R: Send>(workers: usize, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Result<Vec<R>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

fn failure(job: &Job, stage: &str, e: &Error) -> Failure {
    Failure {
        tree_id: job.tree_id.clone(),
        week: Some(job.week),
        stage: stage.to_string(),
        error: e.to_string(),
    }
}

fn load_tree(cfg: &RunConfig, job: &Job) -> std::result::Result<ColoredPointCloud, Failure> {
    let cloud = read_cloud(&job.path).map_err(|e| failure(job, "read", &e))?;
    if cfg.segment_input {
        segment_tree(&cloud, &cfg.segmentation).map_err(|e| failure(job, "segment", &e))
    } else {
        Ok(cloud)
    }
}

/// A ready-to-use classifier for the configured method.
pub enum Classifier {
    Kmeans {
        n_clusters: usize,
        windows: canopy::MergeWindows,
        seed: u64,
    },
    Gbm(Box<GbmModel>),
}

impl Classifier {
    pub fn kmeans(cfg: &RunConfig) -> Self {
        Classifier::Kmeans {
            n_clusters: cfg.kmeans.n_clusters,
            windows: cfg.windows,
            seed: cfg.seed,
        }
    }

    pub fn gbm(cfg: &RunConfig) -> Result<Self> {
        let path = cfg
            .gbm
            .model_path
            .as_ref()
            .ok_or_else(|| Error::Validation("method gbm needs gbm.model_path".into()))?;
        Ok(Classifier::Gbm(Box::new(GbmModel::load(path)?)))
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        match cfg.method {
            Method::Kmeans => Ok(Self::kmeans(cfg)),
            Method::Gbm => Self::gbm(cfg),
        }
    }

    pub fn classify(&self, cloud: &ColoredPointCloud) -> Result<ClassifiedCloud> {
        match self {
            Classifier::Kmeans {
                n_clusters,
                windows,
                seed,
            } => classify_kmeans(cloud, *n_clusters, windows, *seed),
            Classifier::Gbm(model) => classify_gbm(cloud, model),
        }
    }
}

fn cloud_name(tree_id: &str, week: u32) -> String {
    format!("{tree_id}_w{week}.ply")
}

pub fn cmd_segment(cfg: &RunConfig, manifest: &TreeManifest) -> Result<Outcome> {
    let out = &cfg.out_dir;
    let seg_dir = out.join("segmented");
    ensure_dir(&seg_dir)?;
    let jobs = jobs(manifest);
    let results = par_map(cfg.workers, &jobs, |job| -> std::result::Result<(usize, usize, PathBuf), Failure> {
        let cloud = read_cloud(&job.path).map_err(|e| failure(job, "read", &e))?;
        let seg = segment_tree(&cloud, &cfg.segmentation).map_err(|e| failure(job, "segment", &e))?;
        let path = seg_dir.join(cloud_name(&job.tree_id, job.week));
        write_cloud(&seg, &path).map_err(|e| failure(job, "write", &e))?;
        Ok((cloud.len(), seg.len(), path))
    })?;
    let mut outcome = Outcome::default();
    let mut summary = Table::new(&["tree_id", "week", "input_points", "output_points", "path"]);
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok((n_in, n_out, path)) => {
                let rel = path.strip_prefix(out).unwrap_or(&path).display().to_string();
                summary.push(vec![
                    job.tree_id.clone(),
                    job.week.to_string(),
                    n_in.to_string(),
                    n_out.to_string(),
                    rel,
                ]);
                outcome.outputs.push(path);
            }
            Err(f) => {
                log::warn!("{} week {}: {}", f.tree_id, job.week, f.error);
                outcome.failures.push(f);
            }
        }
    }
    outcome.write_table(&summary, out.join("segment_summary.csv"))?;
    outcome.write_failures(out)?;
    Ok(outcome)
}

pub fn cmd_train(cfg: &RunConfig, labels: &Path) -> Result<Outcome> {
    let out = &cfg.out_dir;
    ensure_dir(out)?;
    let ds = read_label_dataset(labels)?;
    let grid = if !cfg.gbm.grid.is_empty() {
        cfg.gbm.grid.clone()
    } else if cfg.gbm.sweep {
        default_grid(cfg.gbm.hyperparams)
    } else {
        vec![cfg.gbm.hyperparams]
    };
    let mut outcome = Outcome::default();
    let (report, model) = if grid.len() == 1 {
        let trained = train(&ds, &cfg.schema, &grid[0], cfg.gbm.train_fraction)?;
        let report = canopy::gboost::SweepReport {
            rows: vec![canopy::gboost::SweepRow {
                hyperparams: grid[0],
                train_accuracy: Some(trained.train_accuracy),
                test_accuracy: trained.test_accuracy,
                error: None,
            }],
            best: Some(0),
        };
        (report, trained.model)
    } else {
        let (report, model) = sweep(&ds, &cfg.schema, &grid, cfg.gbm.train_fraction)?;
        let model = model.ok_or_else(|| {
            let first = report.rows.iter().find_map(|r| r.error.clone()).unwrap_or_default();
            Error::InsufficientData(format!("no grid point trained successfully: {first}"))
        })?;
        (report, model)
    };
    outcome.write_table(&sweep_table(&report), out.join("train_report.csv"))?;
    let model_path = out.join("model.json");
    model.save(&model_path)?;
    outcome.outputs.push(model_path);
    Ok(outcome)
}

fn observation(job: &Job, classified: &ClassifiedCloud) -> std::result::Result<TreeObservation, Failure> {
    let index = yellowness(classified).map_err(|e| failure(job, "index", &e))?;
    let ground_truth = match (job.ground_truth, job.ground_truth_week) {
        (Some((y, g)), Some(w)) if w == job.week => {
            Some(ground_truth_index(y, g).map_err(|e| failure(job, "ground_truth", &e))?)
        }
        _ => None,
    };
    Ok(TreeObservation {
        tree_id: job.tree_id.clone(),
        week: job.week,
        index,
        ground_truth,
        leaf_n_percent: job.leaf_n_percent,
    })
}

/// Classified yellowness index for every manifest cloud.
pub fn compute_observations(cfg: &RunConfig, manifest: &TreeManifest) -> Result<(Vec<TreeObservation>, Vec<Failure>)> {
    let classifier = Classifier::from_config(cfg)?;
    let jobs = jobs(manifest);
    let results = par_map(cfg.workers, &jobs, |job| {
        let cloud = load_tree(cfg, job)?;
        let classified = classifier.classify(&cloud).map_err(|e| failure(job, "classify", &e))?;
        observation(job, &classified)
    })?;
    let mut obs = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(o) => obs.push(o),
            Err(f) => {
                log::warn!("{} week {:?}: {}", f.tree_id, f.week, f.error);
                failures.push(f);
            }
        }
    }
    Ok((obs, failures))
}

pub fn cmd_index(cfg: &RunConfig, manifest: &TreeManifest) -> Result<Outcome> {
    let out = &cfg.out_dir;
    ensure_dir(out)?;
    let (obs, failures) = compute_observations(cfg, manifest)?;
    let mut outcome = Outcome {
        failures,
        ..Default::default()
    };
    let path = out.join("observations.csv");
    write_observations(&obs, &path)?;
    outcome.outputs.push(path);
    outcome.write_failures(out)?;
    Ok(outcome)
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodValidation {
    pub method: Method,
    pub report: Option<ValidationReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedTree {
    pub tree_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationSummary {
    pub band_low_m: f64,
    pub band_high_m: f64,
    pub methods: Vec<MethodValidation>,
    pub skipped: Vec<SkippedTree>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodTiming {
    pub method: Method,
    pub runs: usize,
    pub median_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Wall-clock seconds of `f` over all clouds: `warmup` untimed passes, then
/// the median of `runs` timed passes.
pub fn time_method(
    classifier: &Classifier,
    method: Method,
    clouds: &[ColoredPointCloud],
    warmup: usize,
    runs: usize,
) -> Result<MethodTiming> {
    for _ in 0..warmup {
        for c in clouds {
            classifier.classify(c)?;
        }
    }
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        for c in clouds {
            std::hint::black_box(classifier.classify(c)?);
        }
        times.push(start.elapsed().as_secs_f64());
    }
    let min_s = times.iter().copied().fold(f64::INFINITY, f64::min);
    let max_s = times.iter().copied().fold(0.0, f64::max);
    Ok(MethodTiming {
        method,
        runs,
        median_s: median(&mut times),
        min_s,
        max_s,
    })
}

pub fn cmd_validate(cfg: &RunConfig, manifest: &TreeManifest) -> Result<Outcome> {
    let out = &cfg.out_dir;
    ensure_dir(out)?;
    let methods = [
        (Method::Kmeans, Classifier::kmeans(cfg)),
        (Method::Gbm, Classifier::gbm(cfg)?),
    ];
    let mut skipped = Vec::new();
    let mut targets = Vec::new();
    for e in &manifest.entries {
        let Some((y, g)) = e.ground_truth_masses() else {
            skipped.push(SkippedTree {
                tree_id: e.tree_id.clone(),
                reason: "no ground-truth masses".into(),
            });
            continue;
        };
        let week = e.ground_truth_week();
        let Some(wc) = week.and_then(|w| e.cloud_for_week(w)) else {
            skipped.push(SkippedTree {
                tree_id: e.tree_id.clone(),
                reason: format!("no cloud for ground-truth week {}", opt(week)),
            });
            continue;
        };
        targets.push(Job {
            tree_id: e.tree_id.clone(),
            week: wc.week,
            path: manifest.resolve(wc),
            leaf_n_percent: e.leaf_n_percent,
            ground_truth: Some((y, g)),
            ground_truth_week: Some(wc.week),
        });
    }

    let band = cfg.band;
    let prepared = par_map(cfg.workers, &targets, |job| {
        let cloud = load_tree(cfg, job)?;
        crop_band(&cloud, band.low_m, band.high_m, cfg.segmentation.vertical())
            .map_err(|e| failure(job, "band", &e))
    })?;
    let mut outcome = Outcome::default();
    let mut clouds = Vec::new();
    let mut kept = Vec::new();
    for (job, r) in targets.iter().zip(prepared) {
        match r {
            Ok(c) => {
                clouds.push(c);
                kept.push(job.clone());
            }
            Err(f) => outcome.failures.push(f),
        }
    }

    let mut per_method: Vec<Vec<Option<TreeObservation>>> = Vec::new();
    for (_, classifier) in &methods {
        let order: Vec<usize> = (0..kept.len()).collect();
        let results = par_map(cfg.workers, &order, |&i| {
            let job = &kept[i];
            let classified = classifier.classify(&clouds[i]).map_err(|e| failure(job, "classify", &e))?;
            observation(job, &classified)
        })?;
        let mut col = Vec::new();
        for r in results {
            match r {
                Ok(o) => col.push(Some(o)),
                Err(f) => {
                    outcome.failures.push(f);
                    col.push(None);
                }
            }
        }
        per_method.push(col);
    }

    let mut table = Table::new(&["tree_id", "week", "ground_truth", "index_kmeans", "index_gbm"]);
    for (i, job) in kept.iter().enumerate() {
        let gt = per_method.iter().find_map(|c| c[i].as_ref().and_then(|o| o.ground_truth));
        table.push(vec![
            job.tree_id.clone(),
            job.week.to_string(),
            opt(gt),
            opt(per_method[0][i].as_ref().map(|o| o.index.value)),
            opt(per_method[1][i].as_ref().map(|o| o.index.value)),
        ]);
    }
    outcome.write_table(&table, out.join("validation.csv"))?;

    let mut summaries = Vec::new();
    for ((method, _), col) in methods.iter().zip(&per_method) {
        let obs: Vec<TreeObservation> = col.iter().flatten().cloned().collect();
        let (report, error) = match validate(&obs) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        summaries.push(MethodValidation {
            method: *method,
            report,
            error,
        });
    }
    let summary = ValidationSummary {
        band_low_m: band.low_m,
        band_high_m: band.high_m,
        methods: summaries,
        skipped,
    };
    let path = out.join("validation_report.json");
    write_json(&summary, &path)?;
    outcome.outputs.push(path);

    let mut timing = Table::new(&[
        "method",
        "runs",
        "n_trees",
        "n_points",
        "median_s",
        "min_s",
        "max_s",
        "speedup_vs_kmeans",
    ]);
    if !clouds.is_empty() {
        let n_points: usize = clouds.iter().map(|c| c.len()).sum();
        let mut timings = Vec::new();
        for (method, classifier) in &methods {
            timings.push(time_method(classifier, *method, &clouds, cfg.timing.warmup_runs, cfg.timing.runs)?);
        }
        let base = timings[0].median_s;
        for t in &timings {
            timing.push(vec![
                t.method.as_str().to_string(),
                t.runs.to_string(),
                clouds.len().to_string(),
                n_points.to_string(),
                t.median_s.to_string(),
                t.min_s.to_string(),
                t.max_s.to_string(),
                (base / t.median_s).to_string(),
            ]);
        }
    }
    outcome.write_table(&timing, out.join("timing.csv"))?;
    outcome.write_failures(out)?;
    Ok(outcome)
}

pub fn cmd_stats(cfg: &RunConfig, observations: &Path, manifest: Option<&TreeManifest>) -> Result<Outcome> {
    let out = &cfg.out_dir;
    ensure_dir(out)?;
    let obs = read_observations(observations)?;
    let report = weekly_report(&obs, manifest)?;
    let mut outcome = Outcome::default();
    for (name, table) in stats_tables(&report) {
        outcome.write_table(&table, out.join(name))?;
    }
    let map_path = out.join("map.csv");
    let mut buf = Vec::new();
    write_map_to(&report.map, &mut buf)?;
    fs::write(&map_path, buf).map_err(|e| Error::io(&map_path, e))?;
    outcome.outputs.push(map_path);
    let json = out.join("stats.json");
    write_json(&report, &json)?;
    outcome.outputs.push(json);
    Ok(outcome)
}

/// Writes a synthetic season: clouds, manifest, truth table, labeled
/// training points and the config that reproduces it.
pub fn cmd_synth(cfg: &RunConfig) -> Result<Outcome> {
    let out = &cfg.out_dir;
    let cloud_dir = out.join("clouds");
    ensure_dir(&cloud_dir)?;
    let season = gen_season(&cfg.synth)?;
    let mut outcome = Outcome::default();
    let mut manifest = season.manifest.clone();
    let written = par_map(cfg.workers, &season.clouds, |sc| -> Result<PathBuf> {
        let rel = PathBuf::from("clouds").join(cloud_name(&sc.tree_id, sc.week));
        write_cloud(&sc.scene.cloud, out.join(&rel))?;
        Ok(rel)
    })?;
    for (sc, rel) in season.clouds.iter().zip(written) {
        let rel = rel?;
        let entry = manifest
            .entries
            .iter_mut()
            .find(|e| e.tree_id == sc.tree_id)
            .expect("season cloud without manifest entry");
        entry.clouds.push(WeekCloud { week: sc.week, path: rel });
        outcome.outputs.push(out.join(cloud_dir.join(cloud_name(&sc.tree_id, sc.week))));
    }
    let manifest_path = out.join("manifest.toml");
    write_manifest(&manifest, &manifest_path)?;
    outcome.outputs.push(manifest_path);

    let truth_path = out.join("truth.csv");
    write_observations(&season.truth, &truth_path)?;
    outcome.outputs.push(truth_path);

    let mut tree = cfg.synth.scene.tree.clone();
    tree.yellow_fraction = 0.5;
    tree.seed = cfg.synth.seed.wrapping_add(0x5eed);
    let labels = gen_label_dataset(&tree, cfg.synth_labels_per_class, cfg.schema.k_neighbors)?;
    let labels_path = out.join("labels.csv");
    write_label_dataset(&labels, &labels_path)?;
    outcome.outputs.push(labels_path);

    let mut run = cfg.clone();
    run.out_dir = PathBuf::from(".");
    let cfg_path = out.join("config.toml");
    fs::write(&cfg_path, run.to_toml()?).map_err(|e| Error::io(&cfg_path, e))?;
    outcome.outputs.push(cfg_path);
    Ok(outcome)
}

pub fn load_manifest(path: &Path) -> Result<TreeManifest> {
    read_manifest(path)
}
