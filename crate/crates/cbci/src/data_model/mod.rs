//! Records, schemas, ordinal encoding, and the complete/incomplete split.

mod io;
mod schema;

use std::collections::BTreeSet;

pub use io::{load_csv, read_header, write_csv, RawCell, RawDataset, RawRecord};
pub use schema::{
    AttributeDescriptor, AttributeKind, Schema, SchemaConfig, DEFAULT_MISSING_TOKENS,
};

use crate::error::{Error, Result};
use crate::scalar::{count, Scalar};

/// 1-based input ordinal; stable for the life of a run.
pub type RecordId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRecord<S> {
    pub id: RecordId,
    /// One entry per schema attribute; `None` is MISSING.
    pub values: Vec<Option<S>>,
    /// `None` when the class cell was a missing token.
    pub label: Option<String>,
}

impl<S: Scalar> EncodedRecord<S> {
    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn present_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

/// Per-column min/max captured by [`minmax_scale`] for the inverse transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParam<S> {
    pub min: S,
    pub max: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S> {
    pub schema: Schema,
    pub records: Vec<EncodedRecord<S>>,
    /// Present when the dataset is in scaled space.
    pub scaling: Option<Vec<ScaleParam<S>>>,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(schema: Schema, records: Vec<EncodedRecord<S>>) -> Result<Self> {
        let n = schema.n();
        for rec in &records {
            if rec.values.len() != n {
                return Err(Error::LengthMismatch {
                    left: rec.values.len(),
                    right: n,
                });
            }
        }
        Ok(Dataset {
            schema,
            records,
            scaling: None,
        })
    }

    pub fn m(&self) -> usize {
        self.records.len()
    }

    pub fn n(&self) -> usize {
        self.schema.n()
    }

    pub fn record(&self, id: RecordId) -> Option<&EncodedRecord<S>> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Undoes scaling (when present) and decodes one cell to output text.
    pub fn decode_cell(&self, column: usize, v: S) -> Result<String> {
        let v = match &self.scaling {
            Some(params) => {
                let p = params[column];
                if p.max > p.min {
                    v * (p.max - p.min) + p.min
                } else {
                    p.min
                }
            }
            None => v,
        };
        decode_value(&self.schema.attributes[column], v)
    }
}

/// Complete records (G1) and incomplete records (G2), input order preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSplit<S> {
    pub complete: Vec<EncodedRecord<S>>,
    pub incomplete: Vec<EncodedRecord<S>>,
}

/// Partitions records by completeness. Labels play no part: an unlabeled
/// record with every feature present is still complete.
pub fn split_groups<S: Scalar>(ds: &Dataset<S>) -> GroupSplit<S> {
    let mut complete = Vec::new();
    let mut incomplete = Vec::new();
    for rec in &ds.records {
        if rec.is_complete() {
            complete.push(rec.clone());
        } else {
            incomplete.push(rec.clone());
        }
    }
    GroupSplit {
        complete,
        incomplete,
    }
}

/// Ordinal-encodes raw cells: categorical level -> 1-based index within the
/// column's level order, numeric text -> parsed value. Level orders left
/// implicit by the schema are derived lexicographically from the data here.
pub fn encode<S: Scalar>(raw: &RawDataset) -> Result<Dataset<S>> {
    let mut schema = raw.schema.clone();
    for (j, attr) in schema.attributes.iter_mut().enumerate() {
        if let AttributeKind::Categorical { levels } = &mut attr.kind {
            if levels.is_empty() {
                let observed: BTreeSet<&str> = raw
                    .records
                    .iter()
                    .filter(|r| !r.cells[j].missing)
                    .map(|r| r.cells[j].text.as_str())
                    .collect();
                *levels = observed.into_iter().map(str::to_string).collect();
            }
        }
    }

    let mut records = Vec::with_capacity(raw.records.len());
    for rec in &raw.records {
        let mut values = Vec::with_capacity(schema.n());
        for (j, cell) in rec.cells.iter().enumerate() {
            if cell.missing {
                values.push(None);
                continue;
            }
            let attr = &schema.attributes[j];
            let v = match attr.levels() {
                Some(levels) => {
                    let idx = levels
                        .iter()
                        .position(|l| *l == cell.text)
                        .ok_or_else(|| Error::UnknownLevel {
                            column: attr.name.clone(),
                            value: cell.text.clone(),
                        })?;
                    count::<S>(idx + 1)
                }
                None => {
                    let parsed: f64 = cell.text.parse().map_err(|_| Error::InvalidNumeric {
                        row: rec.id,
                        column: attr.name.clone(),
                        text: cell.text.clone(),
                    })?;
                    if !parsed.is_finite() {
                        return Err(Error::InvalidNumeric {
                            row: rec.id,
                            column: attr.name.clone(),
                            text: cell.text.clone(),
                        });
                    }
                    S::from_f64(parsed).ok_or_else(|| Error::InvalidNumeric {
                        row: rec.id,
                        column: attr.name.clone(),
                        text: cell.text.clone(),
                    })?
                }
            };
            values.push(Some(v));
        }
        records.push(EncodedRecord {
            id: rec.id,
            values,
            label: rec.label.clone(),
        });
    }
    Dataset::new(schema, records)
}

/// Decodes one encoded value back to cell text: numeric values print plainly,
/// categorical values must round to a 1-based level index.
pub fn decode_value<S: Scalar>(column: &AttributeDescriptor, v: S) -> Result<String> {
    match column.levels() {
        None => Ok(format!("{v}")),
        Some(levels) => {
            let rounded = v.round();
            let idx = rounded.to_usize().unwrap_or(0);
            if idx < 1 || idx > levels.len() {
                return Err(Error::LevelOutOfRange {
                    column: column.name.clone(),
                    value: v.to_f64().unwrap_or(f64::NAN),
                    levels: levels.len(),
                });
            }
            Ok(levels[idx - 1].clone())
        }
    }
}

/// Maps every present value to [0, 1] per column: (v - min) / (max - min),
/// with constant columns collapsing to 0. The parameters ride along on the
/// returned dataset so output decoding can invert the transform.
pub fn minmax_scale<S: Scalar>(ds: &Dataset<S>) -> Result<Dataset<S>> {
    if ds.scaling.is_some() {
        return Err(Error::InvalidConfig("dataset is already scaled".into()));
    }
    let n = ds.n();
    let mut params = Vec::with_capacity(n);
    for j in 0..n {
        let mut bounds: Option<(S, S)> = None;
        for rec in &ds.records {
            if let Some(v) = rec.values[j] {
                bounds = Some(match bounds {
                    None => (v, v),
                    Some((lo, hi)) => (lo.min(v), hi.max(v)),
                });
            }
        }
        let (min, max) = bounds.ok_or_else(|| Error::EmptyColumn {
            column: ds.schema.attributes[j].name.clone(),
        })?;
        params.push(ScaleParam { min, max });
    }

    let records = ds
        .records
        .iter()
        .map(|rec| {
            let values = rec
                .values
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    v.map(|v| {
                        let p = params[j];
                        if p.max > p.min {
                            (v - p.min) / (p.max - p.min)
                        } else {
                            S::zero()
                        }
                    })
                })
                .collect();
            EncodedRecord {
                id: rec.id,
                values,
                label: rec.label.clone(),
            }
        })
        .collect();

    Ok(Dataset {
        schema: ds.schema.clone(),
        records,
        scaling: Some(params),
    })
}
