//! Deterministic k-means over the complete group.
//!
//! There is no randomness anywhere: the init strategy, ascending-id summation,
//! and lowest-index/lowest-id tie breaks fully determine a run, so identical
//! inputs give bit-identical models.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::data_model::{EncodedRecord, RecordId};
use crate::error::{Error, Result};
use crate::mapping::{distance_full, distance_full_to_mean};
use crate::scalar::{count, Scalar};

/// How the initial means are chosen. Every strategy is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub enum InitStrategy<S> {
    /// Explicit mean vectors, one per cluster.
    Fixed(Vec<Vec<S>>),
    /// Per-class centroids of the labeled complete records, classes taken in
    /// lexicographic label order. Requires exactly k distinct labels.
    ClassSeeded,
    /// Greedy farthest-point seeding from `start` (default: the lowest record
    /// id). Ties fall to the lower id.
    FarthestFirst { start: Option<RecordId> },
}

impl<S> Default for InitStrategy<S> {
    fn default() -> Self {
        InitStrategy::FarthestFirst { start: None }
    }
}

impl<S> fmt::Display for InitStrategy<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitStrategy::Fixed(means) => write!(f, "fixed({} means)", means.len()),
            InitStrategy::ClassSeeded => write!(f, "class_seeded"),
            InitStrategy::FarthestFirst { start: None } => write!(f, "farthest_first(start=auto)"),
            InitStrategy::FarthestFirst { start: Some(id) } => {
                write!(f, "farthest_first(start={id})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel<S> {
    pub k: usize,
    /// Final means, one per cluster; always the exact centroids of `members`.
    pub means: Vec<Vec<S>>,
    /// Record id -> 0-based cluster index.
    pub assignment: BTreeMap<RecordId, usize>,
    /// Member ids per cluster, ascending.
    pub members: Vec<Vec<RecordId>>,
    /// Assign/update rounds executed.
    pub iterations: usize,
    /// False when the iteration cap cut the run short.
    pub converged: bool,
    /// Within-cluster sum of squares after each mean update; non-increasing.
    pub wcss_history: Vec<S>,
}

/// Number of decision classes among the labeled complete records.
pub fn infer_k<S: Scalar>(group: &[EncodedRecord<S>]) -> Result<usize> {
    let labels: BTreeSet<&str> = group.iter().filter_map(|r| r.label.as_deref()).collect();
    if labels.is_empty() {
        return Err(Error::NoLabeledRecords);
    }
    Ok(labels.len())
}

/// Recomputes the mean of each member list, summing in ascending-id order.
pub fn cluster_means<S: Scalar>(
    model: &ClusterModel<S>,
    group: &[EncodedRecord<S>],
) -> Result<Vec<Vec<S>>> {
    let by_id = index_group(group)?;
    let n = dimension(group);
    means_of(&model.members, &by_id, n)
}

/// Lloyd's algorithm. Records must be complete; assignments go to the nearest
/// mean (ties to the lowest cluster index) and stop when they no longer move
/// or `max_iter` is hit. An emptied cluster is repaired by reassigning the
/// record farthest from its own mean.
pub fn kmeans<S: Scalar>(
    group: &[EncodedRecord<S>],
    k: usize,
    init: &InitStrategy<S>,
    max_iter: usize,
) -> Result<ClusterModel<S>> {
    if k == 0 {
        return Err(Error::InvalidConfig("cluster count must be at least 1".into()));
    }
    if max_iter == 0 {
        return Err(Error::InvalidConfig("iteration cap must be at least 1".into()));
    }
    if group.len() < k {
        return Err(Error::NotEnoughRecords {
            k,
            available: group.len(),
        });
    }
    for rec in group {
        if !rec.is_complete() {
            return Err(Error::MissingCell);
        }
    }
    let by_id = index_group(group)?;
    let n = dimension(group);

    let mut means = initial_means(group, &by_id, k, init, n)?;
    let mut assignment: BTreeMap<RecordId, usize> = BTreeMap::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut wcss_history = Vec::new();

    while iterations < max_iter {
        iterations += 1;
        let mut next: BTreeMap<RecordId, usize> = BTreeMap::new();
        let mut dist_to_own: BTreeMap<RecordId, S> = BTreeMap::new();
        for (&id, rec) in &by_id {
            let mut best = 0usize;
            let mut best_d = distance_full_to_mean(&rec.values, &means[0])?;
            for (c, mean) in means.iter().enumerate().skip(1) {
                let d = distance_full_to_mean(&rec.values, mean)?;
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            next.insert(id, best);
            dist_to_own.insert(id, best_d);
        }

        repair_empty_clusters(&mut next, &dist_to_own, k);

        if next == assignment {
            converged = true;
            break;
        }
        assignment = next;
        let members = members_of(&assignment, k);
        means = means_of(&members, &by_id, n)?;
        wcss_history.push(wcss_of(&assignment, &by_id, &means));
    }

    let members = members_of(&assignment, k);
    Ok(ClusterModel {
        k,
        means,
        assignment,
        members,
        iterations,
        converged,
        wcss_history,
    })
}

/// Moves one record into each empty cluster: the record (from a cluster that
/// can spare one) farthest from the mean it was just assigned to, lower id on
/// ties. Ascending cluster index when several clusters are empty.
fn repair_empty_clusters<S: Scalar>(
    assignment: &mut BTreeMap<RecordId, usize>,
    dist_to_own: &BTreeMap<RecordId, S>,
    k: usize,
) {
    for c in 0..k {
        let mut counts = vec![0usize; k];
        for &cl in assignment.values() {
            counts[cl] += 1;
        }
        if counts[c] > 0 {
            continue;
        }
        let mut pick: Option<(S, RecordId)> = None;
        for (&id, &cl) in assignment.iter() {
            if counts[cl] < 2 {
                continue;
            }
            let d = dist_to_own[&id];
            let better = match pick {
                None => true,
                Some((best_d, _)) => d > best_d,
            };
            if better {
                pick = Some((d, id));
            }
        }
        if let Some((_, id)) = pick {
            assignment.insert(id, c);
        }
    }
}

fn members_of(assignment: &BTreeMap<RecordId, usize>, k: usize) -> Vec<Vec<RecordId>> {
    let mut members = vec![Vec::new(); k];
    for (&id, &c) in assignment {
        members[c].push(id);
    }
    members
}

fn means_of<S: Scalar>(
    members: &[Vec<RecordId>],
    by_id: &BTreeMap<RecordId, &EncodedRecord<S>>,
    n: usize,
) -> Result<Vec<Vec<S>>> {
    let mut means = Vec::with_capacity(members.len());
    for (c, ids) in members.iter().enumerate() {
        if ids.is_empty() {
            return Err(Error::EmptyCluster { index: c });
        }
        let mut sum = vec![S::zero(); n];
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        for id in sorted {
            let rec = by_id.get(&id).ok_or(Error::NotAssigned { id })?;
            for (j, v) in rec.values.iter().enumerate() {
                sum[j] = sum[j] + v.ok_or(Error::MissingCell)?;
            }
        }
        let denom = count::<S>(ids.len());
        means.push(sum.into_iter().map(|s| s / denom).collect());
    }
    Ok(means)
}

fn wcss_of<S: Scalar>(
    assignment: &BTreeMap<RecordId, usize>,
    by_id: &BTreeMap<RecordId, &EncodedRecord<S>>,
    means: &[Vec<S>],
) -> S {
    let mut total = S::zero();
    for (id, &c) in assignment {
        let rec = by_id[id];
        let d = distance_full_to_mean(&rec.values, &means[c]).expect("complete record");
        total = total + d * d;
    }
    total
}

fn initial_means<S: Scalar>(
    group: &[EncodedRecord<S>],
    by_id: &BTreeMap<RecordId, &EncodedRecord<S>>,
    k: usize,
    init: &InitStrategy<S>,
    n: usize,
) -> Result<Vec<Vec<S>>> {
    match init {
        InitStrategy::Fixed(means) => {
            if means.len() != k {
                return Err(Error::InvalidInit(format!(
                    "expected {k} initial means, got {}",
                    means.len()
                )));
            }
            for (i, m) in means.iter().enumerate() {
                if m.len() != n {
                    return Err(Error::InvalidInit(format!(
                        "initial mean {} has {} components, expected {n}",
                        i + 1,
                        m.len()
                    )));
                }
            }
            Ok(means.clone())
        }
        InitStrategy::ClassSeeded => {
            let mut classes: BTreeMap<&str, Vec<RecordId>> = BTreeMap::new();
            for rec in group {
                if let Some(label) = rec.label.as_deref() {
                    classes.entry(label).or_default().push(rec.id);
                }
            }
            if classes.is_empty() {
                return Err(Error::NoLabeledRecords);
            }
            if classes.len() != k {
                return Err(Error::InvalidInit(format!(
                    "class seeding needs exactly {k} classes, found {}",
                    classes.len()
                )));
            }
            let members: Vec<Vec<RecordId>> = classes.into_values().collect();
            means_of(&members, by_id, n)
        }
        InitStrategy::FarthestFirst { start } => {
            let first = match start {
                Some(id) => {
                    if !by_id.contains_key(id) {
                        return Err(Error::InvalidInit(format!(
                            "start record {id} is not in the complete group"
                        )));
                    }
                    *id
                }
                // BTreeMap keys ascend, so the first key is the lowest id.
                None => *by_id.keys().next().expect("non-empty group"),
            };
            let mut seeds = vec![first];
            while seeds.len() < k {
                let mut pick: Option<(S, RecordId)> = None;
                for (&id, rec) in by_id {
                    if seeds.contains(&id) {
                        continue;
                    }
                    let mut nearest: Option<S> = None;
                    for seed in &seeds {
                        let d = distance_full(&rec.values, &by_id[seed].values)?;
                        nearest = Some(match nearest {
                            None => d,
                            Some(b) => b.min(d),
                        });
                    }
                    let d = nearest.expect("at least one seed");
                    let better = match pick {
                        None => true,
                        Some((best, _)) => d > best,
                    };
                    if better {
                        pick = Some((d, id));
                    }
                }
                seeds.push(pick.expect("group larger than seed count").1);
            }
            Ok(seeds
                .into_iter()
                .map(|id| by_id[&id].values.iter().map(|v| v.unwrap()).collect())
                .collect())
        }
    }
}

/// Parses a plain-text means file: one comma-separated vector per line, blank
/// lines and `#` comments ignored.
pub fn parse_means_file<S: Scalar>(text: &str) -> Result<Vec<Vec<S>>> {
    let mut means: Vec<Vec<S>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for item in line.split(',') {
            let item = item.trim();
            let v: f64 = item.parse().map_err(|_| {
                Error::InvalidInit(format!("line {}: cannot parse {item:?}", idx + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidInit(format!(
                    "line {}: {item:?} is not finite",
                    idx + 1
                )));
            }
            row.push(S::from_f64(v).expect("finite f64 converts"));
        }
        if let Some(first) = means.first() {
            if row.len() != first.len() {
                return Err(Error::InvalidInit(format!(
                    "line {}: expected {} components, got {}",
                    idx + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        means.push(row);
    }
    if means.is_empty() {
        return Err(Error::InvalidInit("means file declares no vectors".into()));
    }
    Ok(means)
}

fn index_group<S: Scalar>(
    group: &[EncodedRecord<S>],
) -> Result<BTreeMap<RecordId, &EncodedRecord<S>>> {
    let mut by_id = BTreeMap::new();
    for rec in group {
        if by_id.insert(rec.id, rec).is_some() {
            return Err(Error::InvalidConfig(format!(
                "duplicate record id {}",
                rec.id
            )));
        }
    }
    Ok(by_id)
}

fn dimension<S>(group: &[EncodedRecord<S>]) -> usize {
    group.first().map(|r| r.values.len()).unwrap_or(0)
}
