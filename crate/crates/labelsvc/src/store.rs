use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use canopy::pcio::{read_label_dataset, write_label_dataset_to};
use canopy::{Error, LabelDataset, LabeledPointRecord, Result};

/// Append-only label dataset on disk. Every append rewrites the file to a
/// temporary sibling and renames it into place, so readers and crashes only
/// ever see a complete dataset.
pub struct DatasetStore {
    path: PathBuf,
    dataset: LabelDataset,
    submissions: HashMap<String, usize>,
}

fn submissions_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".submissions.json");
    path.with_file_name(name)
}

fn atomic_write(path: &Path, write: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    write(tmp.as_file_mut())?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

impl DatasetStore {
    /// Opens `path`, creating an empty dataset if the file does not exist.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let dataset = if path.exists() {
            read_label_dataset(&path)?
        } else {
            LabelDataset::default()
        };
        let side = submissions_path(&path);
        let submissions = if side.exists() {
            let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", side.display())))?
        } else {
            HashMap::new()
        };
        let store = DatasetStore {
            path,
            dataset,
            submissions,
        };
        if !store.path.exists() {
            store.flush_dataset()?;
        }
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn dataset(&self) -> &LabelDataset {
        &self.dataset
    }

    /// Rows appended by an earlier submission with this id.
    pub fn previous(&self, submission_id: &str) -> Option<usize> {
        self.submissions.get(submission_id).copied()
    }

    fn flush_dataset(&self) -> Result<()> {
        atomic_write(&self.path, |f| write_label_dataset_to(&self.dataset, std::io::BufWriter::new(f)))
    }

    fn flush_submissions(&self) -> Result<()> {
        let side = submissions_path(&self.path);
        let sorted: BTreeMap<_, _> = self.submissions.iter().collect();
        atomic_write(&side, |f| {
            let text = serde_json::to_string_pretty(&sorted).map_err(|e| Error::Format(e.to_string()))?;
            f.write_all(text.as_bytes()).map_err(|e| Error::io(&side, e))
        })
    }

    /// Appends `rows` and records `submission_id`. On failure the in-memory
    /// state is rolled back and the file on disk is unchanged.
    pub fn append(&mut self, rows: Vec<LabeledPointRecord>, submission_id: Option<&str>) -> Result<usize> {
        let n = rows.len();
        let before = self.dataset.rows.len();
        self.dataset.rows.extend(rows);
        if let Err(e) = self.flush_dataset() {
            self.dataset.rows.truncate(before);
            return Err(e);
        }
        if let Some(id) = submission_id {
            self.submissions.insert(id.to_string(), n);
            if let Err(e) = self.flush_submissions() {
                log::warn!("could not record submission id {id}: {e}");
            }
        }
        Ok(n)
    }
}
