//! Field-trial statistics over tree observations: leaf-nitrogen grouping,
//! Pearson correlation, one-way ANOVA and Tukey-Kramer pairwise comparisons,
//! plus the flat table behind spatial index maps.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pcio::TreeManifest;
use crate::special::{f_sf, studentized_range_sf};
use crate::yindex::TreeObservation;

pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NitrogenGroup {
    VeryLow,
    Low,
    Good,
    High,
    VeryHigh,
}

impl NitrogenGroup {
    pub const ALL: [NitrogenGroup; 5] = [
        NitrogenGroup::VeryLow,
        NitrogenGroup::Low,
        NitrogenGroup::Good,
        NitrogenGroup::High,
        NitrogenGroup::VeryHigh,
    ];
}

impl fmt::Display for NitrogenGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Lower bound inclusive, upper exclusive.
pub fn assign_group(leaf_n_percent: f64) -> Result<NitrogenGroup> {
    let n = leaf_n_percent;
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Validation(format!("leaf N must be positive, got {n}")));
    }
    Ok(if n < 1.7 {
        NitrogenGroup::VeryLow
    } else if n < 2.0 {
        NitrogenGroup::Low
    } else if n < 2.4 {
        NitrogenGroup::Good
    } else if n < 2.6 {
        NitrogenGroup::High
    } else {
        NitrogenGroup::VeryHigh
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Validation(format!("length mismatch: {} vs {}", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!("need >= 3 pairs, got {}", xs.len())));
    }
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub p: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
    pub group_means: Vec<f64>,
    pub group_sizes: Vec<usize>,
}

impl AnovaResult {
    pub fn ms_within(&self) -> f64 {
        self.ss_within / self.df_within as f64
    }

    pub fn significant(&self) -> bool {
        self.p < SIGNIFICANCE
    }
}

fn check_groups(groups: &[Vec<f64>]) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData(format!("need >= 2 groups, got {}", groups.len())));
    }
    if let Some((i, g)) = groups.iter().enumerate().find(|(_, g)| g.len() < 2) {
        return Err(Error::InsufficientData(format!("group {i} has {} samples, need >= 2", g.len())));
    }
    Ok(())
}

pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaResult> {
    check_groups(groups)?;
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let ss_between: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand).powi(2))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|x| (x - m).powi(2)).sum::<f64>())
        .sum();
    if ss_within <= 0.0 {
        return Err(Error::Degenerate("no within-group variance".into()));
    }
    let df_between = groups.len() - 1;
    let df_within = n - groups.len();
    let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
    Ok(AnovaResult {
        f,
        p: f_sf(f, df_between as f64, df_within as f64),
        df_between,
        df_within,
        ss_between,
        ss_within,
        group_means: means,
        group_sizes: groups.iter().map(|g| g.len()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyPair {
    pub group_1: usize,
    pub group_2: usize,
    /// Mean of `group_2` minus mean of `group_1`.
    pub mean_diff: f64,
    pub q: f64,
    pub p_adj: f64,
    pub significant: bool,
}

/// Tukey-Kramer comparisons for every unordered pair `i < j`.
pub fn tukey_hsd(groups: &[Vec<f64>]) -> Result<Vec<TukeyPair>> {
    let anova = anova_oneway(groups)?;
    let msw = anova.ms_within();
    let k = groups.len();
    let df = anova.df_within as f64;
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            let diff = anova.group_means[j] - anova.group_means[i];
            let se = (msw / 2.0 * (1.0 / groups[i].len() as f64 + 1.0 / groups[j].len() as f64)).sqrt();
            let q = diff.abs() / se;
            let p_adj = studentized_range_sf(q, k, df);
            out.push(TukeyPair {
                group_1: i,
                group_2: j,
                mean_diff: diff,
                q,
                p_adj,
                significant: p_adj < SIGNIFICANCE,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: NitrogenGroup,
    pub n: usize,
    pub mean_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub group_1: NitrogenGroup,
    pub group_2: NitrogenGroup,
    pub mean_diff: f64,
    pub q: f64,
    pub p_adj: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekStats {
    pub week: u32,
    pub n_trees: usize,
    pub groups: Vec<GroupSummary>,
    pub pearson_r: Option<f64>,
    pub anova: Option<AnovaResult>,
    pub tukey: Vec<GroupComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRow {
    pub tree_id: String,
    pub week: u32,
    pub row: Option<u32>,
    pub position_in_row: Option<u32>,
    pub index: f64,
    pub leaf_n_percent: Option<f64>,
    pub group: Option<NitrogenGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsWarning {
    pub week: Option<u32>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldStatsReport {
    pub weeks: Vec<WeekStats>,
    pub map: Vec<MapRow>,
    pub warnings: Vec<StatsWarning>,
}

fn week_stats(
    week: u32,
    obs: &[(&TreeObservation, Option<f64>)],
    warnings: &mut Vec<StatsWarning>,
) -> Option<WeekStats> {
    let warn = |warnings: &mut Vec<StatsWarning>, message: String| {
        warnings.push(StatsWarning {
            week: Some(week),
            message,
        })
    };
    let with_n: Vec<(f64, f64)> = obs
        .iter()
        .filter_map(|(o, n)| n.map(|n| (n, o.index.value)))
        .collect();
    if with_n.is_empty() {
        warn(warnings, "no trees with leaf N; statistics skipped".into());
        return None;
    }
    let mut by_group: BTreeMap<NitrogenGroup, Vec<f64>> = BTreeMap::new();
    for &(n, idx) in &with_n {
        match assign_group(n) {
            Ok(g) => by_group.entry(g).or_default().push(idx),
            Err(e) => warn(warnings, e.to_string()),
        }
    }
    let groups: Vec<GroupSummary> = by_group
        .iter()
        .map(|(&group, v)| GroupSummary {
            group,
            n: v.len(),
            mean_index: mean(v),
        })
        .collect();
    let (ns, ys): (Vec<f64>, Vec<f64>) = with_n.iter().copied().unzip();
    let pearson_r = match pearson(&ns, &ys) {
        Ok(r) => Some(r),
        Err(e) => {
            warn(warnings, format!("pearson skipped: {e}"));
            None
        }
    };
    let mut names = Vec::new();
    let mut samples = Vec::new();
    for (g, v) in &by_group {
        if v.len() < 2 {
            warn(warnings, format!("group {g} has a single tree; left out of ANOVA"));
        } else {
            names.push(*g);
            samples.push(v.clone());
        }
    }
    let mut anova = None;
    let mut tukey = Vec::new();
    if samples.len() < 2 {
        warn(warnings, format!("{} populated group(s); ANOVA skipped", samples.len()));
    } else {
        match (anova_oneway(&samples), tukey_hsd(&samples)) {
            (Ok(a), Ok(pairs)) => {
                anova = Some(a);
                tukey = pairs
                    .into_iter()
                    .map(|p| GroupComparison {
                        group_1: names[p.group_1],
                        group_2: names[p.group_2],
                        mean_diff: p.mean_diff,
                        q: p.q,
                        p_adj: p.p_adj,
                        significant: p.significant,
                    })
                    .collect();
            }
            (Err(e), _) | (_, Err(e)) => warn(warnings, format!("ANOVA skipped: {e}")),
        }
    }
    Some(WeekStats {
        week,
        n_trees: obs.len(),
        groups,
        pearson_r,
        anova,
        tukey,
    })
}

/// Per-week group statistics plus map rows. Leaf N comes from the observation
/// when present, else from the manifest entry.
pub fn weekly_report(observations: &[TreeObservation], manifest: Option<&TreeManifest>) -> Result<FieldStatsReport> {
    if observations.is_empty() {
        return Err(Error::EmptyInput("no observations".into()));
    }
    let mut warnings = Vec::new();
    let mut map = Vec::with_capacity(observations.len());
    let mut by_week: BTreeMap<u32, Vec<(&TreeObservation, Option<f64>)>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for o in observations {
        if !seen.insert((o.tree_id.as_str(), o.week)) {
            return Err(Error::Validation(format!(
                "duplicate observation for tree {} week {}",
                o.tree_id, o.week
            )));
        }
        let entry = manifest.and_then(|m| m.entry(&o.tree_id));
        let leaf_n = o.leaf_n_percent.or(entry.and_then(|e| e.leaf_n_percent));
        map.push(MapRow {
            tree_id: o.tree_id.clone(),
            week: o.week,
            row: entry.map(|e| e.row),
            position_in_row: entry.map(|e| e.position_in_row),
            index: o.index.value,
            leaf_n_percent: leaf_n,
            group: leaf_n.and_then(|n| assign_group(n).ok()),
        });
        by_week.entry(o.week).or_default().push((o, leaf_n));
    }
    let weeks = by_week
        .iter()
        .filter_map(|(&w, obs)| week_stats(w, obs, &mut warnings))
        .collect();
    Ok(FieldStatsReport { weeks, map, warnings })
}

pub const MAP_HEADER: [&str; 7] = ["tree_id", "week", "row", "position_in_row", "index", "leaf_N", "group"];

pub fn write_map_to(rows: &[MapRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Format(format!("writing map table: {e}"));
    w.write_record(MAP_HEADER).map_err(io)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        w.write_record([
            r.tree_id.clone(),
            r.week.to_string(),
            opt(r.row.map(|v| v.to_string())),
            opt(r.position_in_row.map(|v| v.to_string())),
            r.index.to_string(),
            opt(r.leaf_n_percent.map(|v| v.to_string())),
            opt(r.group.map(|g| g.to_string())),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Format(format!("writing map table: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::yindex::YellownessIndex;
    use proptest::prelude::*;

    #[test]
    fn group_boundaries() {
        assert_eq!(assign_group(2.2).unwrap(), NitrogenGroup::Good);
        assert_eq!(assign_group(1.7).unwrap(), NitrogenGroup::Low);
        assert_eq!(assign_group(1.6999).unwrap(), NitrogenGroup::VeryLow);
        assert_eq!(assign_group(2.0).unwrap(), NitrogenGroup::Good);
        assert_eq!(assign_group(2.4).unwrap(), NitrogenGroup::High);
        assert_eq!(assign_group(2.6).unwrap(), NitrogenGroup::VeryHigh);
        assert_eq!(assign_group(3.0).unwrap(), NitrogenGroup::VeryHigh);
        assert!(assign_group(0.0).is_err());
        assert!(assign_group(-1.0).is_err());
        assert!(assign_group(f64::NAN).is_err());
    }

    #[test]
    fn pearson_examples() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let up: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let down: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &up).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&xs, &down).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&xs, &[1.0; 10]), Err(Error::Degenerate(_))));
        assert!(pearson(&xs[..2], &up[..2]).is_err());
    }

    #[test]
    fn anova_limits() {
        let same = vec![vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0], vec![2.0, 1.0, 3.0]];
        let a = anova_oneway(&same).unwrap();
        assert!(a.f.abs() < 1e-12 && (a.p - 1.0).abs() < 1e-12);
        let far = vec![vec![0.0, 0.01, -0.01, 0.005], vec![10.0, 10.01, 9.99, 10.005]];
        assert!(anova_oneway(&far).unwrap().p < 1e-6);
        assert!(matches!(anova_oneway(&[vec![1.0, 2.0]]), Err(Error::InsufficientData(_))));
        assert!(matches!(anova_oneway(&[vec![1.0, 2.0], vec![3.0]]), Err(Error::InsufficientData(_))));
        assert!(matches!(anova_oneway(&[vec![1.0, 1.0], vec![3.0, 3.0]]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn tukey_identical_and_outlier() {
        let g = vec![0.1, 0.3, 0.2, 0.25, 0.15];
        let pairs = tukey_hsd(&[g.clone(), g.clone(), g.clone()]).unwrap();
        assert_eq!(pairs.len(), 3);
        assert!(pairs.iter().all(|p| !p.significant));

        let outlier: Vec<f64> = g.iter().map(|x| x + 2.0).collect();
        let pairs = tukey_hsd(&[g.clone(), g.clone(), outlier]).unwrap();
        for p in &pairs {
            assert_eq!(p.significant, p.group_2 == 2, "{p:?}");
        }
    }

    fn ob(id: &str, week: u32, y: u64, g: u64, n: Option<f64>) -> TreeObservation {
        TreeObservation {
            tree_id: id.into(),
            week,
            index: YellownessIndex::from_counts(y, g).unwrap(),
            ground_truth: None,
            leaf_n_percent: n,
        }
    }

    #[test]
    fn report_sections_and_skips() {
        let mut obs = Vec::new();
        for (i, n) in [1.5, 1.6, 2.2, 2.3, 2.8, 2.9].iter().enumerate() {
            let y = 100 - (i as u64) * 10;
            obs.push(ob(&format!("t{i}"), 1, y, 50 + i as u64, Some(*n)));
            obs.push(ob(&format!("t{i}"), 2, y + 20, 40 + i as u64, Some(*n)));
        }
        let rep = weekly_report(&obs, None).unwrap();
        assert_eq!(rep.weeks.len(), 2);
        assert_eq!(rep.map.len(), 12);
        assert!(rep.weeks.iter().all(|w| w.anova.is_some() && w.tukey.len() == 3));

        let no_n: Vec<_> = obs.iter().cloned().map(|mut o| {
            o.leaf_n_percent = None;
            o
        }).collect();
        let rep = weekly_report(&no_n, None).unwrap();
        assert!(rep.weeks.is_empty());
        assert_eq!(rep.map.len(), 12);
        assert_eq!(rep.warnings.len(), 2);

        let dup = vec![ob("a", 1, 1, 1, None), ob("a", 1, 2, 1, None)];
        assert!(weekly_report(&dup, None).is_err());
    }

    proptest! {
        #[test]
        fn pearson_affine_invariant(
            pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40),
            a in 0.1f64..10.0, b in -5.0f64..5.0, c in 0.1f64..10.0, d in -5.0f64..5.0,
        ) {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Ok(r) = pearson(&xs, &ys) {
                let xs2: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
                let ys2: Vec<f64> = ys.iter().map(|y| c * y + d).collect();
                prop_assert!((pearson(&xs2, &ys2).unwrap() - r).abs() < 1e-9);
            }
        }

        #[test]
        fn anova_shift_invariant(
            groups in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 2..10), 2..5),
            shift in -100.0f64..100.0,
        ) {
            if let Ok(a) = anova_oneway(&groups) {
                prop_assume!(a.ss_within > 1e-6);
                let shifted: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|x| x + shift).collect()).collect();
                let b = anova_oneway(&shifted).unwrap();
                prop_assert!((a.f - b.f).abs() <= 1e-6 * a.f.max(1.0));
            }
        }

        #[test]
        fn group_partition(n in 1e-6f64..9.99) {
            let g = assign_group(n).unwrap();
            let bounds = [0.0, 1.7, 2.0, 2.4, 2.6, f64::INFINITY];
            let i = NitrogenGroup::ALL.iter().position(|&x| x == g).unwrap();
            prop_assert!(n >= bounds[i] && n < bounds[i + 1]);
        }
    }
}
