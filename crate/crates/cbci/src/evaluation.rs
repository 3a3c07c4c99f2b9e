//! Mask-and-score evaluation harness.
//!
//! Cells are hidden from a dataset at a seeded random, the imputers run on
//! the masked copy, and the filled values are scored against the originals.
//! Masking is reproducible: the same spec on the same dataset always hides
//! the same cells, and the RNG algorithm is named in the report so archived
//! results stay interpretable.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data_model::{split_groups, Dataset, RecordId};
use crate::error::{Error, Result};
use crate::imputation::{
    impute_dataset, mean_value, modal_value, PipelineConfig, TargetOutcome,
};
use crate::mapping::distance_masked;
use crate::scalar::{count, Scalar};

/// The stream behind every mask selection; recorded in reports.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Which cells to hide.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSpec {
    /// Fraction of the eligible present cells to hide, strictly between 0
    /// and 1.
    pub fraction: f64,
    pub seed: u64,
    /// Restrict masking to these feature columns; `None` means all of them.
    pub eligible_columns: Option<Vec<String>>,
    /// Most cells hidden in any one record; defaults to one less than the
    /// column count. Every record also keeps at least one present cell.
    pub max_per_record: Option<usize>,
}

/// The hidden cells' original values, keyed by `(record id, column index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<S> {
    pub cells: BTreeMap<(RecordId, usize), S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskResult<S> {
    pub dataset: Dataset<S>,
    pub truth: GroundTruth<S>,
    /// Cells the requested fraction called for but the per-record limits refused.
    pub shortfall: usize,
}

/// Hides a seeded selection of present cells. Already-missing cells are never
/// candidates, labels are never touched, and every record keeps at least one
/// present cell.
pub fn mask_dataset<S: Scalar>(ds: &Dataset<S>, spec: &MaskSpec) -> Result<MaskResult<S>> {
    if !(spec.fraction > 0.0 && spec.fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "mask fraction must be strictly between 0 and 1, got {}",
            spec.fraction
        )));
    }
    if spec.max_per_record == Some(0) {
        return Err(Error::InvalidConfig(
            "per-record mask limit must be at least 1".into(),
        ));
    }
    let eligible: Vec<usize> = match &spec.eligible_columns {
        None => (0..ds.n()).collect(),
        Some(names) => {
            if names.is_empty() {
                return Err(Error::InvalidConfig("eligible column list is empty".into()));
            }
            let mut indices = Vec::with_capacity(names.len());
            for name in names {
                let (j, _) = ds.schema.attribute(name).ok_or_else(|| {
                    Error::Schema(format!("column {name:?} is not a feature column"))
                })?;
                indices.push(j);
            }
            indices.sort_unstable();
            indices.dedup();
            indices
        }
    };

    // Candidates in a fixed order (record order, then column order), then a
    // seeded shuffle decides which ones go.
    let mut candidates: Vec<(RecordId, usize)> = Vec::new();
    for rec in &ds.records {
        for &j in &eligible {
            if rec.values[j].is_some() {
                candidates.push((rec.id, j));
            }
        }
    }
    let target = (spec.fraction * candidates.len() as f64).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for i in (1..candidates.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        candidates.swap(i, j);
    }

    let default_cap = ds.n().saturating_sub(1);
    let mut caps: BTreeMap<RecordId, usize> = BTreeMap::new();
    for rec in &ds.records {
        let cap = spec
            .max_per_record
            .unwrap_or(default_cap)
            .min(rec.present_count().saturating_sub(1));
        caps.insert(rec.id, cap);
    }

    let mut out = ds.clone();
    let mut truth = BTreeMap::new();
    let mut taken: BTreeMap<RecordId, usize> = BTreeMap::new();
    for (id, j) in candidates {
        if truth.len() == target {
            break;
        }
        let used = taken.entry(id).or_insert(0);
        if *used >= caps[&id] {
            continue;
        }
        let position = out.records.iter().position(|r| r.id == id).expect("candidate id");
        let value = out.records[position].values[j].take().expect("candidate present");
        truth.insert((id, j), value);
        *used += 1;
    }

    let shortfall = target - truth.len();
    Ok(MaskResult {
        dataset: out,
        truth: GroundTruth { cells: truth },
        shortfall,
    })
}

/// One recovered cell against its hidden original.
#[derive(Debug, Clone, PartialEq)]
pub struct CellScore<S> {
    pub record_id: RecordId,
    pub column: String,
    pub truth: S,
    pub imputed: S,
    /// Signed, `imputed - truth`.
    pub error: S,
    pub truth_text: String,
    pub imputed_text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScore<S> {
    pub count: usize,
    pub rmse: Option<S>,
    pub mae: Option<S>,
    pub accuracy: Option<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics<S> {
    pub numeric_count: usize,
    pub categorical_count: usize,
    pub numeric_rmse: Option<S>,
    pub numeric_mae: Option<S>,
    /// Fraction of categorical cells recovered exactly.
    pub categorical_accuracy: Option<S>,
    /// Fraction of masked, labeled records whose predicted class matched;
    /// only the class-predicting method fills this in.
    pub class_accuracy: Option<S>,
    pub per_column: BTreeMap<String, ColumnScore<S>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Score<S> {
    pub metrics: Metrics<S>,
    /// One row per hidden cell, ordered by record id then column index.
    pub cells: Vec<CellScore<S>>,
}

/// Scores an imputed dataset against the hidden originals. Numeric columns
/// get RMSE and MAE, categorical columns exact-match accuracy. A truth cell
/// still missing from `imputed` is an error.
pub fn score_imputation<S: Scalar>(
    imputed: &Dataset<S>,
    truth: &GroundTruth<S>,
) -> Result<Score<S>> {
    struct Acc<S> {
        count: usize,
        sq_sum: S,
        abs_sum: S,
        hits: usize,
        categorical: bool,
    }
    let mut cells = Vec::with_capacity(truth.cells.len());
    let mut by_column: BTreeMap<usize, Acc<S>> = BTreeMap::new();
    for ((id, j), t) in &truth.cells {
        let column = imputed.schema.attributes[*j].name.clone();
        let missing = || Error::TruthMismatch {
            id: *id,
            column: column.clone(),
        };
        let rec = imputed.record(*id).ok_or_else(missing)?;
        let v = rec.values[*j].ok_or_else(missing)?;
        let error = v - *t;
        cells.push(CellScore {
            record_id: *id,
            column: column.clone(),
            truth: *t,
            imputed: v,
            error,
            truth_text: imputed.decode_cell(*j, *t)?,
            imputed_text: imputed.decode_cell(*j, v)?,
        });
        let acc = by_column.entry(*j).or_insert_with(|| Acc {
            count: 0,
            sq_sum: S::zero(),
            abs_sum: S::zero(),
            hits: 0,
            categorical: imputed.schema.attributes[*j].is_categorical(),
        });
        acc.count += 1;
        if acc.categorical {
            if v == *t {
                acc.hits += 1;
            }
        } else {
            acc.sq_sum = acc.sq_sum + error * error;
            acc.abs_sum = acc.abs_sum + error.abs();
        }
    }

    let mut metrics = Metrics {
        numeric_count: 0,
        categorical_count: 0,
        numeric_rmse: None,
        numeric_mae: None,
        categorical_accuracy: None,
        class_accuracy: None,
        per_column: BTreeMap::new(),
    };
    let mut sq_sum = S::zero();
    let mut abs_sum = S::zero();
    let mut hits = 0usize;
    for (j, acc) in by_column {
        let name = imputed.schema.attributes[j].name.clone();
        let n = count::<S>(acc.count);
        let score = if acc.categorical {
            metrics.categorical_count += acc.count;
            hits += acc.hits;
            ColumnScore {
                count: acc.count,
                rmse: None,
                mae: None,
                accuracy: Some(count::<S>(acc.hits) / n),
            }
        } else {
            metrics.numeric_count += acc.count;
            sq_sum = sq_sum + acc.sq_sum;
            abs_sum = abs_sum + acc.abs_sum;
            ColumnScore {
                count: acc.count,
                rmse: Some((acc.sq_sum / n).sqrt()),
                mae: Some(acc.abs_sum / n),
                accuracy: None,
            }
        };
        metrics.per_column.insert(name, score);
    }
    if metrics.numeric_count > 0 {
        let n = count::<S>(metrics.numeric_count);
        metrics.numeric_rmse = Some((sq_sum / n).sqrt());
        metrics.numeric_mae = Some(abs_sum / n);
    }
    if metrics.categorical_count > 0 {
        metrics.categorical_accuracy =
            Some(count::<S>(hits) / count::<S>(metrics.categorical_count));
    }
    Ok(Score { metrics, cells })
}

/// Reference imputers the pipeline is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Fill numeric cells with the column mean and categorical cells with
    /// the column mode, both taken over the complete records.
    GlobalMeanMode,
    /// Fill from the record's nearest complete records under the masked
    /// distance, without any clustering or mapping.
    RawKnn(usize),
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineKind::GlobalMeanMode => write!(f, "global_mean_mode"),
            BaselineKind::RawKnn(k) => write!(f, "raw_knn({k})"),
        }
    }
}

/// Runs one baseline imputer over every missing cell.
pub fn run_baseline<S: Scalar>(ds: &Dataset<S>, kind: &BaselineKind) -> Result<Dataset<S>> {
    let split = split_groups(ds);
    if split.complete.is_empty() {
        return Err(Error::EmptyDonorPool);
    }
    let mut out = ds.clone();
    match kind {
        BaselineKind::GlobalMeanMode => {
            let mut fill = Vec::with_capacity(ds.n());
            for j in 0..ds.n() {
                let values: Vec<S> = split
                    .complete
                    .iter()
                    .map(|r| r.values[j].ok_or(Error::MissingCell))
                    .collect::<Result<_>>()?;
                let v = if ds.schema.attributes[j].is_categorical() {
                    modal_value(&values)
                } else {
                    mean_value(&values)
                };
                fill.push(v.ok_or(Error::EmptyDonorPool)?);
            }
            for rec in &mut out.records {
                for (j, cell) in rec.values.iter_mut().enumerate() {
                    if cell.is_none() {
                        *cell = Some(fill[j]);
                    }
                }
            }
        }
        BaselineKind::RawKnn(k) => {
            if *k == 0 {
                return Err(Error::InvalidConfig(
                    "neighbor count must be at least 1".into(),
                ));
            }
            for rec in &split.incomplete {
                let mut neighbors: Vec<(S, RecordId)> = Vec::with_capacity(split.complete.len());
                for donor in &split.complete {
                    neighbors.push((distance_masked(&rec.values, &donor.values)?, donor.id));
                }
                neighbors.sort_by(|a, b| {
                    a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
                });
                neighbors.truncate(*k);
                let donors: Vec<_> = neighbors
                    .iter()
                    .map(|(_, id)| split.complete.iter().find(|r| r.id == *id).expect("donor id"))
                    .collect();
                let position = out
                    .records
                    .iter()
                    .position(|r| r.id == rec.id)
                    .expect("record id");
                for j in 0..ds.n() {
                    if out.records[position].values[j].is_some() {
                        continue;
                    }
                    let values: Vec<S> = donors
                        .iter()
                        .map(|d| d.values[j].ok_or(Error::MissingCell))
                        .collect::<Result<_>>()?;
                    let v = if ds.schema.attributes[j].is_categorical() {
                        modal_value(&values)
                    } else {
                        mean_value(&values)
                    };
                    out.records[position].values[j] = Some(v.ok_or(Error::EmptyDonorPool)?);
                }
            }
        }
    }
    Ok(out)
}

/// An imputer under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// The cluster-mapping pipeline from this crate.
    Cbci,
    GlobalMeanMode,
    RawKnn(usize),
}

impl Method {
    fn baseline(&self) -> Option<BaselineKind> {
        match self {
            Method::Cbci => None,
            Method::GlobalMeanMode => Some(BaselineKind::GlobalMeanMode),
            Method::RawKnn(k) => Some(BaselineKind::RawKnn(*k)),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Cbci => write!(f, "cbci"),
            Method::GlobalMeanMode => write!(f, "global_mean_mode"),
            Method::RawKnn(k) => write!(f, "raw_knn({k})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome<S> {
    pub method: Method,
    /// The score, or why the method could not run on the masked data.
    pub outcome: std::result::Result<Score<S>, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<S> {
    pub fraction: f64,
    pub seed: u64,
    pub rng: String,
    pub eligible_columns: Option<Vec<String>>,
    pub max_per_record: Option<usize>,
    pub masked_cells: usize,
    pub shortfall: usize,
    pub methods: Vec<MethodOutcome<S>>,
}

/// Masks once, then runs and scores every requested method on the same
/// hidden cells. A method that cannot run is reported, not fatal.
pub fn evaluate_methods<S: Scalar>(
    ds: &Dataset<S>,
    spec: &MaskSpec,
    methods: &[Method],
    pipeline: &PipelineConfig<S>,
) -> Result<EvalReport<S>> {
    let masked = mask_dataset(ds, spec)?;
    let mut outcomes = Vec::with_capacity(methods.len());
    for method in methods {
        let outcome = match method.baseline() {
            Some(kind) => run_baseline(&masked.dataset, &kind)
                .and_then(|imputed| score_imputation(&imputed, &masked.truth))
                .map_err(|e| e.to_string()),
            None => {
                let config = PipelineConfig {
                    predict: true,
                    ..pipeline.clone()
                };
                impute_dataset(&masked.dataset, &config)
                    .and_then(|(imputed, report)| {
                        let mut score = score_imputation(&imputed, &masked.truth)?;
                        score.metrics.class_accuracy = class_accuracy(ds, &report.targets);
                        Ok(score)
                    })
                    .map_err(|e| e.to_string())
            }
        };
        outcomes.push(MethodOutcome {
            method: *method,
            outcome,
        });
    }
    Ok(EvalReport {
        fraction: spec.fraction,
        seed: spec.seed,
        rng: RNG_ALGORITHM.to_string(),
        eligible_columns: spec.eligible_columns.clone(),
        max_per_record: spec.max_per_record,
        masked_cells: masked.truth.cells.len(),
        shortfall: masked.shortfall,
        methods: outcomes,
    })
}

/// Predicted labels against the true ones, over the masked records whose
/// true label is known. A record that failed to impute counts as a miss.
fn class_accuracy<S: Scalar>(
    original: &Dataset<S>,
    targets: &[crate::imputation::TargetReport<S>],
) -> Option<S> {
    let mut total = 0usize;
    let mut correct = 0usize;
    for target in targets {
        let Some(rec) = original.record(target.record_id) else {
            continue;
        };
        let Some(truth) = &rec.label else { continue };
        total += 1;
        if let TargetOutcome::Imputed {
            predicted_class: Some(p),
            ..
        } = &target.outcome
        {
            if p == truth {
                correct += 1;
            }
        }
    }
    if total == 0 {
        None
    } else {
        Some(count::<S>(correct) / count::<S>(total))
    }
}
