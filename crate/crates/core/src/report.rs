//! Tables, summaries, and the analysis report.
//!
//! Cluster labels are a reporting convention: the reference group's adjusted
//! centers are lettered A, B, C, ... in a deterministic order and the other
//! group's centers inherit letters by greedy nearest-center matching, with
//! weak matches flagged for human review.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::ResponseMatrix;
use crate::diagnostics::PpcReport;
use crate::error::{Error, Result};
use crate::latent::{dist, LatentConfig, Point};
use crate::lsirm::AcceptanceRates;
use crate::ns::{assign_items, assign_students, DroppedCenter, StudentCluster};

/// Version of the report JSON schema.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Per-item mean of the non-missing binary values; `None` for items with no
/// observed response.
pub fn positive_proportions(x: &ResponseMatrix) -> Result<Vec<Option<f64>>> {
    if x.n_respondents() == 0 || x.n_items() == 0 {
        return Err(Error::Contract("matrix is empty".into()));
    }
    Ok((0..x.n_items())
        .map(|i| {
            let mut pos = 0u32;
            let mut cnt = 0u32;
            for k in 0..x.n_respondents() {
                if let Some(v) = x.get(k, i) {
                    cnt += 1;
                    pos += u32::from(v);
                }
            }
            (cnt > 0).then(|| f64::from(pos) / f64::from(cnt))
        })
        .collect())
}

/// Mean over items of the per-item proportion difference (a minus b),
/// skipping items missing on either side. `None` when no item is shared.
pub fn grand_mean_difference(a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .filter_map(|(pa, pb)| Some(pa.as_ref()? - pb.as_ref()?))
        .collect();
    if diffs.is_empty() {
        return None;
    }
    Some(diffs.iter().sum::<f64>() / diffs.len() as f64)
}

/// Within-group pairwise distance matrix.
pub fn distance_matrix(points: &[Point]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|a| points.iter().map(|b| dist(*a, *b)).collect())
        .collect()
}

/// Paired within-group center distances with a cross-group highlight mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceTable {
    /// Shared labels, in table order.
    pub labels: Vec<String>,
    pub group_a: Vec<Vec<f64>>,
    pub group_b: Vec<Vec<f64>>,
    /// True where |d_a - d_b| exceeds the threshold.
    pub highlight: Vec<Vec<bool>>,
    pub threshold: f64,
}

/// Within-group pairwise center distances for both groups over their shared
/// labels, highlighting pairs whose distances differ by more than
/// `threshold`.
pub fn center_distance_table(
    centers_a: &LatentConfig,
    centers_b: &LatentConfig,
    threshold: f64,
) -> Result<DistanceTable> {
    let shared: Vec<String> = centers_a
        .labels()
        .iter()
        .filter(|l| centers_b.labels().contains(l))
        .cloned()
        .collect();
    if shared.is_empty() {
        return Err(Error::Labeling(
            "center label sets are disjoint; match labels before tabulating".into(),
        ));
    }
    let select = |cfg: &LatentConfig| -> Vec<Point> {
        shared
            .iter()
            .map(|l| {
                let idx = cfg.labels().iter().position(|x| x == l).unwrap();
                cfg.points()[idx]
            })
            .collect()
    };
    let group_a = distance_matrix(&select(centers_a));
    let group_b = distance_matrix(&select(centers_b));
    let highlight = group_a
        .iter()
        .zip(&group_b)
        .map(|(ra, rb)| {
            ra.iter()
                .zip(rb)
                .map(|(da, db)| (da - db).abs() > threshold)
                .collect()
        })
        .collect();
    Ok(DistanceTable {
        labels: shared,
        group_a,
        group_b,
        highlight,
        threshold,
    })
}

fn raw_letter_label(idx: usize) -> String {
    let mut n = idx + 1;
    let mut out = Vec::new();
    while n > 0 {
        n -= 1;
        out.push(b'A' + (n % 26) as u8);
        n /= 26;
    }
    out.reverse();
    String::from_utf8(out).unwrap()
}

/// Letter label for a center index: A..L, N..Z, AA, AB, ... The bare letter
/// M is reserved for the student midpoint.
pub fn letter_label(idx: usize) -> String {
    let mut produced = 0;
    let mut k = 0;
    loop {
        let candidate = raw_letter_label(k);
        if candidate != "M" {
            if produced == idx {
                return candidate;
            }
            produced += 1;
        }
        k += 1;
    }
}

/// Outcome of matching a moving group's centers to reference labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMatch {
    /// One label per moving center, inheriting the matched reference letter;
    /// unmatched centers get fresh letters.
    pub labels: Vec<String>,
    /// Distance to the matched reference center (`None` for fresh labels).
    pub match_distance: Vec<Option<f64>>,
    /// Matches farther than the review threshold (0.5) are flagged.
    pub flagged: Vec<bool>,
}

/// Greedy nearest-center correspondence: repeatedly pair the globally
/// closest (reference, moving) centers. Geometric matching approximates the
/// paper-style naming by item content, so distant matches are flagged.
pub fn match_center_labels(reference: &[Point], moving: &[Point]) -> LabelMatch {
    const REVIEW_DISTANCE: f64 = 0.5;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, r) in reference.iter().enumerate() {
        for (j, m) in moving.iter().enumerate() {
            pairs.push((dist(*r, *m), i, j));
        }
    }
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut ref_used = vec![false; reference.len()];
    let mut assigned: Vec<Option<(usize, f64)>> = vec![None; moving.len()];
    let mut matched = 0usize;
    for (d, i, j) in pairs {
        if matched == reference.len().min(moving.len()) {
            break;
        }
        if ref_used[i] || assigned[j].is_some() {
            continue;
        }
        ref_used[i] = true;
        assigned[j] = Some((i, d));
        matched += 1;
    }
    let mut next_fresh = reference.len();
    let mut labels = Vec::with_capacity(moving.len());
    let mut match_distance = Vec::with_capacity(moving.len());
    let mut flagged = Vec::with_capacity(moving.len());
    for entry in assigned {
        match entry {
            Some((i, d)) => {
                labels.push(letter_label(i));
                match_distance.push(Some(d));
                flagged.push(d > REVIEW_DISTANCE);
            }
            None => {
                labels.push(letter_label(next_fresh));
                next_fresh += 1;
                match_distance.push(None);
                flagged.push(true);
            }
        }
    }
    LabelMatch {
        labels,
        match_distance,
        flagged,
    }
}

/// Final clustering of one group: adjusted centers with letter labels, item
/// and student memberships, the midpoint, and the within-group distance
/// table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSolution {
    pub center_labels: Vec<String>,
    pub centers: Vec<Point>,
    pub midpoint: Point,
    pub item_ids: Vec<String>,
    /// Index into `centers` per item.
    pub item_memberships: Vec<usize>,
    pub respondent_ids: Vec<String>,
    pub student_memberships: Vec<StudentCluster>,
    pub center_distances: Vec<Vec<f64>>,
    pub dropped_centers: Vec<DroppedCenter>,
}

impl ClusterSolution {
    /// Assign items and students to the labeled centers.
    pub fn build(
        center_labels: Vec<String>,
        centers: Vec<Point>,
        dropped_centers: Vec<DroppedCenter>,
        items: &LatentConfig,
        students: &LatentConfig,
    ) -> Result<Self> {
        if center_labels.len() != centers.len() {
            return Err(Error::Contract("label and center counts disagree".into()));
        }
        let item_memberships = assign_items(items.points(), &centers)?;
        let students_assigned = assign_students(students.points(), &centers)?;
        let center_distances = distance_matrix(&centers);
        Ok(Self {
            center_labels,
            centers,
            midpoint: students_assigned.midpoint,
            item_ids: items.labels().to_vec(),
            item_memberships,
            respondent_ids: students.labels().to_vec(),
            student_memberships: students_assigned.memberships,
            center_distances,
            dropped_centers,
        })
    }

    pub fn labeled_centers(&self) -> Result<LatentConfig> {
        LatentConfig::new(self.center_labels.clone(), self.centers.clone())
    }
}

/// Student counts per center label plus the midpoint label "M"; the counts
/// partition the students.
pub fn membership_counts(solution: &ClusterSolution) -> Vec<(String, usize)> {
    let mut counts = vec![0usize; solution.centers.len() + 1];
    for m in &solution.student_memberships {
        match m {
            StudentCluster::Center(j) => counts[*j] += 1,
            StudentCluster::Midpoint => counts[solution.centers.len()] += 1,
        }
    }
    solution
        .center_labels
        .iter()
        .cloned()
        .chain(std::iter::once("M".to_string()))
        .zip(counts)
        .collect()
}

/// Convergence summary of one group's chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub n_parameters: usize,
    pub rhat_min: f64,
    pub rhat_max: f64,
    pub rhat_fraction_below_1_05: f64,
    pub split_single_chain: bool,
    pub n_chains: usize,
    pub acceptance: AcceptanceRates,
}

/// Clustering summary of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    /// Distribution of the center count over the ensemble.
    pub histogram: BTreeMap<usize, usize>,
    pub mode: usize,
    pub selected_run: usize,
    pub bic: f64,
    pub alpha: f64,
    pub omega: f64,
    pub alpha_bounds: (f64, f64),
    pub omega_bounds: (f64, f64),
    pub kde_bandwidth: (f64, f64),
    pub solution: ClusterSolution,
    pub membership_counts: Vec<(String, usize)>,
}

/// Everything reported for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub label: String,
    pub n_respondents: usize,
    pub n_items: usize,
    pub item_ids: Vec<String>,
    pub positive_proportions: Vec<Option<f64>>,
    pub convergence: ConvergenceSummary,
    pub ppc: PpcReport,
    pub cluster: ClusterReport,
    /// Aligned posterior-mean item positions.
    pub item_positions: LatentConfig,
    /// Aligned posterior-mean respondent positions.
    pub student_positions: LatentConfig,
}

/// Cross-group comparison tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossGroupReport {
    pub distance_table: DistanceTable,
    /// Labels (centers then "M") and per-group student counts.
    pub membership_labels: Vec<String>,
    pub membership_counts: Vec<Vec<usize>>,
    pub grand_mean_difference: Option<f64>,
    /// How the second group's centers inherited the reference labels.
    pub label_match: LabelMatch,
}

/// The full analysis report; serialized as one versioned JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub seed: u64,
    pub config: RunConfig,
    pub groups: Vec<GroupReport>,
    pub cross_group: Option<CrossGroupReport>,
}

impl AnalysisReport {
    /// Structural validity: every table cell finite, masks shaped like their
    /// tables, memberships partition their point sets.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Contract(format!(
                "unsupported schema version {}",
                self.schema_version
            )));
        }
        for g in &self.groups {
            let sol = &g.cluster.solution;
            if sol.item_memberships.len() != g.n_items
                || sol.student_memberships.len() != g.n_respondents
            {
                return Err(Error::Contract(format!(
                    "group {}: memberships do not partition the point sets",
                    g.label
                )));
            }
            let total: usize = g.cluster.membership_counts.iter().map(|(_, c)| c).sum();
            if total != g.n_respondents {
                return Err(Error::Contract(format!(
                    "group {}: membership counts sum to {total}, expected {}",
                    g.label, g.n_respondents
                )));
            }
            for row in &sol.center_distances {
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Contract("non-finite distance cell".into()));
                }
            }
            if !g.cluster.bic.is_finite() {
                return Err(Error::Contract("non-finite BIC".into()));
            }
        }
        if let Some(cross) = &self.cross_group {
            let t = &cross.distance_table;
            let n = t.labels.len();
            for rows in [&t.group_a, &t.group_b] {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Contract("distance table is not square".into()));
                }
                for row in rows {
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Contract("non-finite distance cell".into()));
                    }
                }
            }
            if t.highlight.len() != n || t.highlight.iter().any(|r| r.len() != n) {
                return Err(Error::Contract(
                    "highlight mask does not match the table shape".into(),
                ));
            }
        }
        Ok(())
    }
}
