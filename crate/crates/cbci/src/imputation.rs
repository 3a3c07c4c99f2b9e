//! Donor matching, cell filling, class prediction, and the pipeline that
//! ties them together.
//!
//! Complete records act as donors. Each incomplete record is matched to the
//! donor whose mapping total is closest to its own (absolute difference,
//! ties to the lower id); the chosen donors supply the missing cells and,
//! optionally, a class label. Failures on one record never abort the rest:
//! they are reported per target.

use std::cmp::Ordering;
use std::fmt;

use crate::clustering::{infer_k, kmeans, ClusterModel, InitStrategy};
use crate::data_model::{split_groups, Dataset, EncodedRecord, GroupSplit, RecordId, Schema};
use crate::error::{Error, Result};
use crate::mapping::{map_complete, map_missing, MappingConfig, MappingEntry};
use crate::scalar::{count, Scalar};

/// How the missing cells of a matched record are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillStrategy {
    /// Copy each missing cell from the single best donor.
    #[default]
    CopyDonor,
    /// Blend the best `n` donors: numeric cells take their mean, categorical
    /// cells their most frequent value (ties to the lowest level index).
    TopK(usize),
    /// Mean (numeric) or most frequent value (categorical) over all complete
    /// records sharing the best donor's class.
    ClassMean,
}

impl fmt::Display for FillStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FillStrategy::CopyDonor => write!(f, "copy_donor"),
            FillStrategy::TopK(n) => write!(f, "top_k({n})"),
            FillStrategy::ClassMean => write!(f, "class_mean"),
        }
    }
}

/// One donor in a ranking: its mapping total and the absolute gap to the
/// target's total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DonorCandidate<S> {
    pub id: RecordId,
    pub total: S,
    pub difference: S,
}

/// Ranks every donor by `|target_total - donor_total|`, ties to the lower id.
pub fn match_nearest<S: Scalar>(
    target_total: S,
    donors: &[MappingEntry<S>],
) -> Result<Vec<DonorCandidate<S>>> {
    if donors.is_empty() {
        return Err(Error::EmptyDonorPool);
    }
    let mut ranking: Vec<DonorCandidate<S>> = donors
        .iter()
        .map(|d| DonorCandidate {
            id: d.record_id,
            total: d.total,
            difference: (target_total - d.total).abs(),
        })
        .collect();
    ranking.sort_by(|a, b| {
        a.difference
            .partial_cmp(&b.difference)
            .unwrap_or(Ordering::Equal)
            .then(a.id.cmp(&b.id))
    });
    Ok(ranking)
}

/// Values for the target's missing columns, as `(column index, encoded value)`
/// in ascending column order. The dataset itself is not touched.
pub fn fill_record<S: Scalar>(
    target: &EncodedRecord<S>,
    ranking: &[DonorCandidate<S>],
    group: &[EncodedRecord<S>],
    schema: &Schema,
    strategy: &FillStrategy,
) -> Result<Vec<(usize, S)>> {
    if ranking.is_empty() {
        return Err(Error::EmptyDonorPool);
    }
    let missing: Vec<usize> = (0..target.values.len())
        .filter(|&j| target.values[j].is_none())
        .collect();
    let mut filled = Vec::with_capacity(missing.len());
    match strategy {
        FillStrategy::CopyDonor => {
            let donor = find_record(group, ranking[0].id)?;
            for j in missing {
                filled.push((j, donor.values[j].ok_or(Error::MissingCell)?));
            }
        }
        FillStrategy::TopK(n) => {
            if *n == 0 {
                return Err(Error::InvalidConfig(
                    "donor blend size must be at least 1".into(),
                ));
            }
            let n = (*n).min(ranking.len());
            let donors: Vec<&EncodedRecord<S>> = ranking[..n]
                .iter()
                .map(|c| find_record(group, c.id))
                .collect::<Result<_>>()?;
            for j in missing {
                let values: Vec<S> = donors
                    .iter()
                    .map(|d| d.values[j].ok_or(Error::MissingCell))
                    .collect::<Result<_>>()?;
                filled.push((j, blend(&values, schema.attributes[j].is_categorical())?));
            }
        }
        FillStrategy::ClassMean => {
            let donor = find_record(group, ranking[0].id)?;
            let class = donor.label.clone().ok_or(Error::UnlabeledDonors {
                id: target.id,
                k: 1,
            })?;
            let members: Vec<&EncodedRecord<S>> = group
                .iter()
                .filter(|r| r.label.as_deref() == Some(class.as_str()))
                .collect();
            for j in missing {
                let values: Vec<S> = members
                    .iter()
                    .map(|d| d.values[j].ok_or(Error::MissingCell))
                    .collect::<Result<_>>()?;
                filled.push((j, blend(&values, schema.attributes[j].is_categorical())?));
            }
        }
    }
    Ok(filled)
}

/// Label for a target from its donor ranking: the best donor's label when
/// `top_k` is 1, otherwise the most frequent label among the best `top_k`
/// donors (unlabeled donors skipped; count ties go to the class seen
/// earliest in the ranking). `top_k` is clamped to the ranking length.
pub fn predict_class<S: Scalar>(
    target_id: RecordId,
    ranking: &[DonorCandidate<S>],
    group: &[EncodedRecord<S>],
    top_k: usize,
) -> Result<String> {
    if ranking.is_empty() {
        return Err(Error::EmptyDonorPool);
    }
    if top_k == 0 {
        return Err(Error::InvalidConfig(
            "label vote size must be at least 1".into(),
        ));
    }
    let top_k = top_k.min(ranking.len());
    if top_k == 1 {
        let donor = find_record(group, ranking[0].id)?;
        return donor.label.clone().ok_or(Error::UnlabeledDonors {
            id: target_id,
            k: 1,
        });
    }
    // label -> (votes, rank of its best donor)
    let mut votes: Vec<(String, usize, usize)> = Vec::new();
    for (rank, candidate) in ranking[..top_k].iter().enumerate() {
        let donor = find_record(group, candidate.id)?;
        let Some(label) = &donor.label else { continue };
        match votes.iter_mut().find(|(l, _, _)| l == label) {
            Some((_, n, _)) => *n += 1,
            None => votes.push((label.clone(), 1, rank)),
        }
    }
    votes
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
        .map(|(label, _, _)| label)
        .ok_or(Error::UnlabeledDonors {
            id: target_id,
            k: top_k,
        })
}

/// Most frequent value; ties fall to the smallest value.
pub(crate) fn modal_value<S: Scalar>(values: &[S]) -> Option<S> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mut best = sorted[0];
    let mut best_len = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > best_len {
            best_len = j - i;
            best = sorted[i];
        }
        i = j;
    }
    Some(best)
}

pub(crate) fn mean_value<S: Scalar>(values: &[S]) -> Option<S> {
    if values.is_empty() {
        return None;
    }
    let mut sum = S::zero();
    for v in values {
        sum = sum + *v;
    }
    Some(sum / count::<S>(values.len()))
}

fn blend<S: Scalar>(values: &[S], categorical: bool) -> Result<S> {
    let blended = if categorical {
        modal_value(values)
    } else {
        mean_value(values)
    };
    blended.ok_or(Error::EmptyDonorPool)
}

fn find_record<S: Scalar>(group: &[EncodedRecord<S>], id: RecordId) -> Result<&EncodedRecord<S>> {
    group
        .iter()
        .find(|r| r.id == id)
        .ok_or(Error::NotAssigned { id })
}

/// Everything the pipeline needs to run; `None` fields resolve from the data.
#[derive(Debug, Clone)]
pub struct PipelineConfig<S> {
    /// Cluster count; defaults to the number of distinct labels among
    /// complete records.
    pub k: Option<usize>,
    pub init: InitStrategy<S>,
    pub max_iter: usize,
    /// Nearest neighbors added into each mapping; defaults to the resolved
    /// cluster count.
    pub neighbor_count: Option<usize>,
    pub fill: FillStrategy,
    /// Donors that vote on a predicted label.
    pub top_k: usize,
    /// Predict a class for every imputed record, not just unlabeled ones.
    pub predict: bool,
}

impl<S> Default for PipelineConfig<S> {
    fn default() -> Self {
        PipelineConfig {
            k: None,
            init: InitStrategy::default(),
            max_iter: 100,
            neighbor_count: None,
            fill: FillStrategy::default(),
            top_k: 1,
            predict: false,
        }
    }
}

impl<S: Scalar> PipelineConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if self.k == Some(0) {
            return Err(Error::InvalidConfig("cluster count must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("iteration cap must be at least 1".into()));
        }
        if self.neighbor_count == Some(0) {
            return Err(Error::InvalidConfig("neighbor count must be at least 1".into()));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("label vote size must be at least 1".into()));
        }
        if let FillStrategy::TopK(0) = self.fill {
            return Err(Error::InvalidConfig("donor blend size must be at least 1".into()));
        }
        Ok(())
    }
}

/// The mapped state of a dataset: groups, clusters, and one mapping entry per
/// record. Incomplete records that could not be mapped carry their reason.
#[derive(Debug, Clone)]
pub struct PipelineRun<S> {
    pub split: GroupSplit<S>,
    pub k: usize,
    pub k_auto: bool,
    pub neighbor_count: usize,
    pub neighbor_auto: bool,
    pub model: ClusterModel<S>,
    /// One entry per complete record, group order.
    pub g1_entries: Vec<MappingEntry<S>>,
    /// One entry per incomplete record, group order.
    pub g2_entries: Vec<(RecordId, std::result::Result<MappingEntry<S>, String>)>,
    pub warnings: Vec<String>,
}

/// Splits, clusters, and maps every record. Fatal only when the donor side
/// cannot be built at all; per-record mapping failures are captured.
pub fn run_pipeline<S: Scalar>(
    ds: &Dataset<S>,
    config: &PipelineConfig<S>,
) -> Result<PipelineRun<S>> {
    config.validate()?;
    let split = split_groups(ds);
    let (k, k_auto) = match config.k {
        Some(k) => (k, false),
        None => (infer_k(&split.complete)?, true),
    };
    let model = kmeans(&split.complete, k, &config.init, config.max_iter)?;
    let (neighbor_count, neighbor_auto) = match config.neighbor_count {
        Some(d) => (d, false),
        None => (k, true),
    };
    let mapping_config = MappingConfig::new(neighbor_count)?;

    let mut warnings = Vec::new();
    if !model.converged {
        warnings.push(format!(
            "clustering stopped at the iteration cap ({}) before assignments stabilized",
            config.max_iter
        ));
    }

    let mut g1_entries = Vec::with_capacity(split.complete.len());
    for rec in &split.complete {
        g1_entries.push(map_complete(rec, &model, &split.complete, &mapping_config)?);
    }
    let mut g2_entries = Vec::with_capacity(split.incomplete.len());
    for rec in &split.incomplete {
        let entry = map_missing(rec, &model, &split.complete, &mapping_config)
            .map_err(|e| e.to_string());
        g2_entries.push((rec.id, entry));
    }

    Ok(PipelineRun {
        split,
        k,
        k_auto,
        neighbor_count,
        neighbor_auto,
        model,
        g1_entries,
        g2_entries,
        warnings,
    })
}

/// One filled cell, in both encoded and output-text form.
#[derive(Debug, Clone, PartialEq)]
pub struct FilledCell<S> {
    pub column: String,
    pub encoded: S,
    pub decoded: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetOutcome<S> {
    Imputed {
        /// Full donor ranking, best first.
        ranking: Vec<DonorCandidate<S>>,
        filled: Vec<FilledCell<S>>,
        predicted_class: Option<String>,
    },
    Failed {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetReport<S> {
    pub record_id: RecordId,
    /// Absent when the record could not be mapped at all.
    pub mapping: Option<MappingEntry<S>>,
    pub outcome: TargetOutcome<S>,
}

/// The fully-resolved settings a run actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub k: usize,
    pub k_auto: bool,
    pub neighbor_count: usize,
    pub neighbor_auto: bool,
    pub init: String,
    pub max_iter: usize,
    pub iterations: usize,
    pub converged: bool,
    pub fill: String,
    pub top_k: usize,
    pub predict: bool,
}

#[derive(Debug, Clone)]
pub struct ImputationReport<S> {
    /// One report per incomplete record, input order.
    pub targets: Vec<TargetReport<S>>,
    pub warnings: Vec<String>,
    /// Absent when the pipeline never ran (nothing was missing).
    pub resolved: Option<ResolvedConfig>,
    pub note: Option<String>,
}

impl<S> ImputationReport<S> {
    /// True when at least one target failed.
    pub fn has_failures(&self) -> bool {
        self.targets
            .iter()
            .any(|t| matches!(t.outcome, TargetOutcome::Failed { .. }))
    }
}

fn resolved_config<S: Scalar>(
    run: &PipelineRun<S>,
    config: &PipelineConfig<S>,
) -> ResolvedConfig {
    ResolvedConfig {
        k: run.k,
        k_auto: run.k_auto,
        neighbor_count: run.neighbor_count,
        neighbor_auto: run.neighbor_auto,
        init: config.init.to_string(),
        max_iter: config.max_iter,
        iterations: run.model.iterations,
        converged: run.model.converged,
        fill: config.fill.to_string(),
        top_k: config.top_k,
        predict: config.predict,
    }
}

/// Matches, fills, and (optionally) labels every mapped incomplete record.
/// Returns the imputed dataset and a per-target report. A failure on one
/// target leaves that record untouched and is recorded, not raised.
pub fn finish_imputation<S: Scalar>(
    run: &PipelineRun<S>,
    ds: &Dataset<S>,
    config: &PipelineConfig<S>,
) -> Result<(Dataset<S>, ImputationReport<S>)> {
    let mut out = ds.clone();
    let mut targets = Vec::with_capacity(run.g2_entries.len());
    for (record_id, entry) in &run.g2_entries {
        let entry = match entry {
            Ok(entry) => entry,
            Err(reason) => {
                targets.push(TargetReport {
                    record_id: *record_id,
                    mapping: None,
                    outcome: TargetOutcome::Failed {
                        reason: reason.clone(),
                    },
                });
                continue;
            }
        };
        let outcome = impute_one(run, &mut out, *record_id, entry, config);
        targets.push(TargetReport {
            record_id: *record_id,
            mapping: Some(entry.clone()),
            outcome: match outcome {
                Ok(o) => o,
                Err(e) => TargetOutcome::Failed {
                    reason: e.to_string(),
                },
            },
        });
    }
    let report = ImputationReport {
        targets,
        warnings: run.warnings.clone(),
        resolved: Some(resolved_config(run, config)),
        note: None,
    };
    Ok((out, report))
}

fn impute_one<S: Scalar>(
    run: &PipelineRun<S>,
    out: &mut Dataset<S>,
    record_id: RecordId,
    entry: &MappingEntry<S>,
    config: &PipelineConfig<S>,
) -> Result<TargetOutcome<S>> {
    let target = run
        .split
        .incomplete
        .iter()
        .find(|r| r.id == record_id)
        .ok_or(Error::NotAssigned { id: record_id })?;
    let ranking = match_nearest(entry.total, &run.g1_entries)?;
    let values = fill_record(target, &ranking, &run.split.complete, &out.schema, &config.fill)?;
    let predicted_class = if config.predict {
        Some(predict_class(
            record_id,
            &ranking,
            &run.split.complete,
            config.top_k,
        )?)
    } else {
        None
    };

    // All fallible steps are done; now apply.
    let mut filled = Vec::with_capacity(values.len());
    for (j, v) in &values {
        filled.push(FilledCell {
            column: out.schema.attributes[*j].name.clone(),
            encoded: *v,
            decoded: out.decode_cell(*j, *v)?,
        });
    }
    let position = out
        .records
        .iter()
        .position(|r| r.id == record_id)
        .ok_or(Error::NotAssigned { id: record_id })?;
    for (j, v) in values {
        out.records[position].values[j] = Some(v);
    }
    if let Some(class) = &predicted_class {
        if out.records[position].label.is_none() {
            out.records[position].label = Some(class.clone());
        }
    }
    Ok(TargetOutcome::Imputed {
        ranking,
        filled,
        predicted_class,
    })
}

/// The whole pipeline in one call. A dataset with nothing missing comes back
/// unchanged, with a note instead of an error.
pub fn impute_dataset<S: Scalar>(
    ds: &Dataset<S>,
    config: &PipelineConfig<S>,
) -> Result<(Dataset<S>, ImputationReport<S>)> {
    config.validate()?;
    if ds.records.iter().all(EncodedRecord::is_complete) {
        return Ok((
            ds.clone(),
            ImputationReport {
                targets: Vec::new(),
                warnings: Vec::new(),
                resolved: None,
                note: Some("no missing feature cells; dataset returned unchanged".into()),
            },
        ));
    }
    let run = run_pipeline(ds, config)?;
    finish_imputation(&run, ds, config)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifyOutcome<S> {
    Predicted {
        ranking: Vec<DonorCandidate<S>>,
        class: String,
    },
    Failed {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyTarget<S> {
    pub record_id: RecordId,
    pub mapping: Option<MappingEntry<S>>,
    /// Whether the record was mapped as a complete record (against its
    /// cluster peers) or as an incomplete one (across the donor pool).
    pub complete: bool,
    pub outcome: ClassifyOutcome<S>,
}

#[derive(Debug, Clone)]
pub struct ClassifyReport<S> {
    pub targets: Vec<ClassifyTarget<S>>,
    pub warnings: Vec<String>,
    pub resolved: Option<ResolvedConfig>,
    pub note: Option<String>,
}

impl<S> ClassifyReport<S> {
    pub fn has_failures(&self) -> bool {
        self.targets
            .iter()
            .any(|t| matches!(t.outcome, ClassifyOutcome::Failed { .. }))
    }
}

/// Predicts a label for every unlabeled record. Complete records rank against
/// the other complete records; incomplete ones against all of them. Feature
/// cells are never altered.
pub fn classify_dataset<S: Scalar>(
    ds: &Dataset<S>,
    config: &PipelineConfig<S>,
) -> Result<(Dataset<S>, ClassifyReport<S>)> {
    config.validate()?;
    let unlabeled: Vec<RecordId> = ds
        .records
        .iter()
        .filter(|r| r.label.is_none())
        .map(|r| r.id)
        .collect();
    if unlabeled.is_empty() {
        return Ok((
            ds.clone(),
            ClassifyReport {
                targets: Vec::new(),
                warnings: Vec::new(),
                resolved: None,
                note: Some("no unlabeled records; dataset returned unchanged".into()),
            },
        ));
    }
    let run = run_pipeline(ds, config)?;
    let mut out = ds.clone();
    let mut targets = Vec::with_capacity(unlabeled.len());
    for id in unlabeled {
        let target = classify_one(&run, &mut out, id, config);
        targets.push(target);
    }
    let report = ClassifyReport {
        targets,
        warnings: run.warnings.clone(),
        resolved: Some(resolved_config(&run, config)),
        note: None,
    };
    Ok((out, report))
}

fn classify_one<S: Scalar>(
    run: &PipelineRun<S>,
    out: &mut Dataset<S>,
    id: RecordId,
    config: &PipelineConfig<S>,
) -> ClassifyTarget<S> {
    let complete = run.split.complete.iter().any(|r| r.id == id);
    let (mapping, outcome) = match classify_ranking(run, id, complete) {
        Ok((entry, ranking)) => {
            let outcome = match predict_class(id, &ranking, &run.split.complete, config.top_k) {
                Ok(class) => {
                    let position = out.records.iter().position(|r| r.id == id);
                    if let Some(p) = position {
                        out.records[p].label = Some(class.clone());
                    }
                    ClassifyOutcome::Predicted { ranking, class }
                }
                Err(e) => ClassifyOutcome::Failed {
                    reason: e.to_string(),
                },
            };
            (Some(entry), outcome)
        }
        Err(reason) => (None, ClassifyOutcome::Failed { reason }),
    };
    ClassifyTarget {
        record_id: id,
        mapping,
        complete,
        outcome,
    }
}

fn classify_ranking<S: Scalar>(
    run: &PipelineRun<S>,
    id: RecordId,
    complete: bool,
) -> std::result::Result<(MappingEntry<S>, Vec<DonorCandidate<S>>), String> {
    if complete {
        let entry = run
            .g1_entries
            .iter()
            .find(|e| e.record_id == id)
            .ok_or_else(|| Error::NotAssigned { id }.to_string())?;
        let pool: Vec<MappingEntry<S>> = run
            .g1_entries
            .iter()
            .filter(|e| e.record_id != id)
            .cloned()
            .collect();
        let ranking = match_nearest(entry.total, &pool).map_err(|e| e.to_string())?;
        Ok((entry.clone(), ranking))
    } else {
        let entry = run
            .g2_entries
            .iter()
            .find(|(rid, _)| *rid == id)
            .map(|(_, e)| e.clone())
            .ok_or_else(|| Error::NotAssigned { id }.to_string())??;
        let ranking = match_nearest(entry.total, &run.g1_entries).map_err(|e| e.to_string())?;
        Ok((entry, ranking))
    }
}
