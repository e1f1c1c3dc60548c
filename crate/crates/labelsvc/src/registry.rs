use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use canopy::features::NeighborIndex;
use canopy::pcio::read_cloud;
use canopy::{ColoredPointCloud, Result, TreeManifest};

/// Where a registered cloud comes from.
#[derive(Debug, Clone)]
pub enum CloudSource {
    File(PathBuf),
    Memory(Arc<ColoredPointCloud>),
}

#[derive(Debug, Clone)]
pub struct CloudInfo {
    pub id: String,
    pub tree_id: Option<String>,
    pub week: Option<u32>,
    pub source: CloudSource,
}

/// A loaded cloud together with its neighbor index.
pub struct LoadedCloud {
    pub cloud: ColoredPointCloud,
    pub index: NeighborIndex,
}

/// Registered clouds by id. Clouds are read and indexed on first use.
#[derive(Default)]
pub struct CloudRegistry {
    entries: BTreeMap<String, CloudInfo>,
    cache: Mutex<HashMap<String, Arc<LoadedCloud>>>,
}

pub fn cloud_id(tree_id: &str, week: u32) -> String {
    format!("{tree_id}_w{week}")
}

impl CloudRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// One entry per tree and week, with id `<tree_id>_w<week>`.
    pub fn from_manifest(manifest: &TreeManifest) -> Self {
        let mut reg = Self::new();
        for tree in &manifest.entries {
            for wc in &tree.clouds {
                reg.register(CloudInfo {
                    id: cloud_id(&tree.tree_id, wc.week),
                    tree_id: Some(tree.tree_id.clone()),
                    week: Some(wc.week),
                    source: CloudSource::File(manifest.resolve(wc)),
                });
            }
        }
        reg
    }

    /// Every `*.ply` file directly inside `dir`, keyed by file stem.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut reg = Self::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply")) {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    reg.register(CloudInfo {
                        id: stem.to_string(),
                        tree_id: None,
                        week: None,
                        source: CloudSource::File(path.clone()),
                    });
                }
            }
        }
        Ok(reg)
    }

    pub fn register(&mut self, info: CloudInfo) {
        self.cache.get_mut().unwrap().remove(&info.id);
        self.entries.insert(info.id.clone(), info);
    }

    pub fn register_cloud(&mut self, id: impl Into<String>, cloud: ColoredPointCloud) {
        let id = id.into();
        self.register(CloudInfo {
            id,
            tree_id: None,
            week: None,
            source: CloudSource::Memory(Arc::new(cloud)),
        });
    }

    pub fn ids(&self) -> impl Iterator<Item = &CloudInfo> {
        self.entries.values()
    }

    pub fn info(&self, id: &str) -> Option<&CloudInfo> {
        self.entries.get(id)
    }

    /// `Ok(None)` for an unknown id.
    pub fn load(&self, id: &str) -> Result<Option<Arc<LoadedCloud>>> {
        let Some(info) = self.entries.get(id) else {
            return Ok(None);
        };
        if let Some(hit) = self.cache.lock().unwrap().get(id) {
            return Ok(Some(hit.clone()));
        }
        let cloud = match &info.source {
            CloudSource::File(p) => read_cloud(p)?,
            CloudSource::Memory(c) => (**c).clone(),
        };
        let index = NeighborIndex::new(&cloud);
        let loaded = Arc::new(LoadedCloud { cloud, index });
        self.cache
            .lock()
            .unwrap()
            .entry(id.to_string())
            .or_insert_with(|| loaded.clone());
        Ok(Some(loaded))
    }
}
