//! Canopy color analysis for orchard point clouds.
//!
//! The crate takes per-tree colored point clouds through the full analysis
//! chain:
//!
//! - [`treeseg`]: isolate the foreground tree (sky color, depth, ground band, stride)
//! - [`colorspace`]: sRGB to CIE-L\*a\*b\* (D65) and HSV, channel histograms
//! - [`cluster`]: K-means over (a\*, b\*) with window merging into Green/Yellow/Trunk
//! - [`gboost`]: multiclass gradient-boosted trees over point features
//! - [`yindex`]: the yellowness index `(y - g) / (y + g)` and its validation
//! - [`fieldstats`]: nitrogen grouping, Pearson r, one-way ANOVA, Tukey-Kramer
//! - [`synth`]: synthetic orchards with known provenance, used as a test oracle
//!
//! Persistence (PLY clouds, manifests, label datasets, observation tables)
//! lives in [`pcio`].

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod colorspace;
mod error;
pub mod features;
pub mod fieldstats;
pub mod gboost;
mod kdtree;
pub mod pcio;
pub mod special;
pub mod synth;
pub mod treeseg;
pub mod yindex;

pub use cluster::{ClassifiedCloud, MergeWindows, PointLabel};
pub use error::{Error, Result};
pub use features::{FeatureSchema, Label, LabeledPointRecord};
pub use pcio::{ColoredPoint, ColoredPointCloud, LabelDataset, TreeManifest};
pub use treeseg::{SegmentationParams, Vertical};
pub use yindex::{TreeObservation, YellownessIndex};
