//! Distance kernels and the record -> scalar mapping.
//!
//! Every record is reduced to one number: the sum of its distances to all
//! cluster means plus the distances to its nearest neighbors. Complete
//! records use full-dimension distances; incomplete records simply skip their
//! missing positions (no rescaling of the partial sums). Summation orders are
//! pinned (ascending cluster index, then neighbors nearest first) so reruns
//! are bit-identical.

use std::cmp::Ordering;

use crate::clustering::ClusterModel;
use crate::data_model::{EncodedRecord, RecordId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<S> {
    pub id: RecordId,
    pub distance: S,
}

/// One record's mapping: `total = cluster_sum + sum of neighbor distances`.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingEntry<S> {
    pub record_id: RecordId,
    pub cluster_sum: S,
    /// Nearest first; ties fall to the lower id.
    pub neighbors: Vec<Neighbor<S>>,
    pub total: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MappingConfig {
    /// Nearest neighbors added into the mapping; at least 1.
    pub neighbor_count: usize,
}

impl MappingConfig {
    pub fn new(neighbor_count: usize) -> Result<Self> {
        if neighbor_count == 0 {
            return Err(Error::InvalidConfig(
                "neighbor count must be at least 1".into(),
            ));
        }
        Ok(MappingConfig { neighbor_count })
    }
}

/// Euclidean distance over two complete cell sequences.
pub fn distance_full<S: Scalar>(a: &[Option<S>], b: &[Option<S>]) -> Result<S> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut sum = S::zero();
    for (x, y) in a.iter().zip(b) {
        match (x, y) {
            (Some(x), Some(y)) => {
                let d = *x - *y;
                sum = sum + d * d;
            }
            _ => return Err(Error::MissingCell),
        }
    }
    Ok(sum.sqrt())
}

/// Full-dimension distance from a complete record to a mean vector.
pub fn distance_full_to_mean<S: Scalar>(a: &[Option<S>], mean: &[S]) -> Result<S> {
    if a.len() != mean.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: mean.len(),
        });
    }
    let mut sum = S::zero();
    for (x, y) in a.iter().zip(mean) {
        let x = x.ok_or(Error::MissingCell)?;
        let d = x - *y;
        sum = sum + d * d;
    }
    Ok(sum.sqrt())
}

/// Distance that skips `a`'s missing positions. `b` must be present wherever
/// `a` is; on a record with nothing missing this is exactly [`distance_full`].
pub fn distance_masked<S: Scalar>(a: &[Option<S>], b: &[Option<S>]) -> Result<S> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut sum = S::zero();
    let mut kept = 0usize;
    for (x, y) in a.iter().zip(b) {
        if let Some(x) = x {
            let y = y.ok_or(Error::MissingCell)?;
            let d = *x - y;
            sum = sum + d * d;
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::NoPresentCells);
    }
    Ok(sum.sqrt())
}

/// Masked distance from a (possibly incomplete) record to a mean vector.
pub fn distance_masked_to_mean<S: Scalar>(a: &[Option<S>], mean: &[S]) -> Result<S> {
    if a.len() != mean.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: mean.len(),
        });
    }
    let mut sum = S::zero();
    let mut kept = 0usize;
    for (x, y) in a.iter().zip(mean) {
        if let Some(x) = x {
            let d = *x - *y;
            sum = sum + d * d;
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::NoPresentCells);
    }
    Ok(sum.sqrt())
}

/// Sum of full-dimension distances from a complete record to every cluster
/// mean, ascending cluster index.
pub fn type1_sum<S: Scalar>(record: &EncodedRecord<S>, means: &[Vec<S>]) -> Result<S> {
    let mut total = S::zero();
    for mean in means {
        total = total + distance_full_to_mean(&record.values, mean)?;
    }
    Ok(total)
}

/// Sum of masked distances to every cluster mean; equals [`type1_sum`] bit for
/// bit when the record has nothing missing.
pub fn type2_sum<S: Scalar>(record: &EncodedRecord<S>, means: &[Vec<S>]) -> Result<S> {
    let mut total = S::zero();
    for mean in means {
        total = total + distance_masked_to_mean(&record.values, mean)?;
    }
    Ok(total)
}

/// The record's `count` nearest neighbors within its own cluster, nearest
/// first, ties to the lower id. Returns fewer when the cluster is small.
pub fn intra_cluster_neighbors<S: Scalar>(
    record: &EncodedRecord<S>,
    model: &ClusterModel<S>,
    group: &[EncodedRecord<S>],
    count: usize,
) -> Result<Vec<Neighbor<S>>> {
    let cluster = *model
        .assignment
        .get(&record.id)
        .ok_or(Error::NotAssigned { id: record.id })?;
    let mut neighbors = Vec::new();
    for other_id in &model.members[cluster] {
        if *other_id == record.id {
            continue;
        }
        let other = group
            .iter()
            .find(|r| r.id == *other_id)
            .ok_or(Error::NotAssigned { id: *other_id })?;
        neighbors.push(Neighbor {
            id: *other_id,
            distance: distance_full(&record.values, &other.values)?,
        });
    }
    sort_and_truncate(&mut neighbors, count);
    Ok(neighbors)
}

/// The incomplete record's `count` nearest complete records under the masked
/// distance, across all clusters.
pub fn cross_group_neighbors<S: Scalar>(
    record: &EncodedRecord<S>,
    group: &[EncodedRecord<S>],
    count: usize,
) -> Result<Vec<Neighbor<S>>> {
    if group.is_empty() {
        return Err(Error::EmptyDonorPool);
    }
    let mut neighbors = Vec::with_capacity(group.len());
    for other in group {
        neighbors.push(Neighbor {
            id: other.id,
            distance: distance_masked(&record.values, &other.values)?,
        });
    }
    sort_and_truncate(&mut neighbors, count);
    Ok(neighbors)
}

/// Mapping for a complete record: type-1 cluster sum plus its nearest
/// intra-cluster neighbors.
pub fn map_complete<S: Scalar>(
    record: &EncodedRecord<S>,
    model: &ClusterModel<S>,
    group: &[EncodedRecord<S>],
    config: &MappingConfig,
) -> Result<MappingEntry<S>> {
    let cluster_sum = type1_sum(record, &model.means)?;
    let neighbors = intra_cluster_neighbors(record, model, group, config.neighbor_count)?;
    Ok(assemble(record.id, cluster_sum, neighbors))
}

/// Mapping for an incomplete record: type-2 cluster sum plus its nearest
/// complete records under the masked distance.
pub fn map_missing<S: Scalar>(
    record: &EncodedRecord<S>,
    model: &ClusterModel<S>,
    group: &[EncodedRecord<S>],
    config: &MappingConfig,
) -> Result<MappingEntry<S>> {
    let cluster_sum = type2_sum(record, &model.means)?;
    let neighbors = cross_group_neighbors(record, group, config.neighbor_count)?;
    Ok(assemble(record.id, cluster_sum, neighbors))
}

fn assemble<S: Scalar>(
    record_id: RecordId,
    cluster_sum: S,
    neighbors: Vec<Neighbor<S>>,
) -> MappingEntry<S> {
    let mut total = cluster_sum;
    for nb in &neighbors {
        total = total + nb.distance;
    }
    MappingEntry {
        record_id,
        cluster_sum,
        neighbors,
        total,
    }
}

fn sort_and_truncate<S: Scalar>(neighbors: &mut Vec<Neighbor<S>>, count: usize) {
    neighbors.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .unwrap_or(Ordering::Equal)
            .then(a.id.cmp(&b.id))
    });
    neighbors.truncate(count);
}
