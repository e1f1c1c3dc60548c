//! CSV report tables. Floats use the shortest round-trip representation so
//! repeated runs produce identical bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use canopy::fieldstats::FieldStatsReport;
use canopy::gboost::SweepReport;
use canopy::{Error, Result};

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

pub fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_to(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One row per failed or flagged tree-week.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub tree_id: String,
    pub week: Option<u32>,
    pub stage: String,
    pub error: String,
}

pub fn failures_table(failures: &[Failure]) -> Table {
    let mut t = Table::new(&["tree_id", "week", "stage", "error"]);
    for f in failures {
        t.push(vec![f.tree_id.clone(), opt(f.week), f.stage.clone(), f.error.clone()]);
    }
    t
}

pub fn sweep_table(report: &SweepReport) -> Table {
    let mut t = Table::new(&[
        "learning_rate",
        "max_depth",
        "n_estimators",
        "train_accuracy",
        "test_accuracy",
        "best",
        "error",
    ]);
    for (i, r) in report.rows.iter().enumerate() {
        t.push(vec![
            r.hyperparams.learning_rate.to_string(),
            r.hyperparams.max_depth.to_string(),
            r.hyperparams.n_estimators.to_string(),
            opt(r.train_accuracy),
            opt(r.test_accuracy),
            (report.best == Some(i)).to_string(),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    t
}

pub fn stats_tables(report: &FieldStatsReport) -> [(&'static str, Table); 4] {
    let mut weeks = Table::new(&[
        "week",
        "n_trees",
        "pearson_r",
        "anova_f",
        "anova_p",
        "df_between",
        "df_within",
        "significant",
    ]);
    let mut groups = Table::new(&["week", "group", "n", "mean_index"]);
    let mut tukey = Table::new(&["week", "group_1", "group_2", "mean_diff", "q", "p_adj", "significant"]);
    let mut warnings = Table::new(&["week", "message"]);
    for w in &report.weeks {
        let a = w.anova.as_ref();
        weeks.push(vec![
            w.week.to_string(),
            w.n_trees.to_string(),
            opt(w.pearson_r),
            opt(a.map(|a| a.f)),
            opt(a.map(|a| a.p)),
            opt(a.map(|a| a.df_between)),
            opt(a.map(|a| a.df_within)),
            opt(a.map(|a| a.significant())),
        ]);
        for g in &w.groups {
            groups.push(vec![w.week.to_string(), g.group.to_string(), g.n.to_string(), g.mean_index.to_string()]);
        }
        for c in &w.tukey {
            tukey.push(vec![
                w.week.to_string(),
                c.group_1.to_string(),
                c.group_2.to_string(),
                c.mean_diff.to_string(),
                c.q.to_string(),
                c.p_adj.to_string(),
                c.significant.to_string(),
            ]);
        }
    }
    for m in &report.warnings {
        warnings.push(vec![opt(m.week), m.message.clone()]);
    }
    [
        ("stats_weeks.csv", weeks),
        ("stats_groups.csv", groups),
        ("stats_tukey.csv", tukey),
        ("stats_warnings.csv", warnings),
    ]
}
