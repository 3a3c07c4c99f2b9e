//! CSV ingestion and output.
//!
//! Loading keeps the original cell text alongside the missing flags so output
//! can echo untouched cells byte for byte; only cells this pipeline filled are
//! rendered from their encoded values.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::data_model::{Dataset, RecordId, Schema};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCell {
    pub text: String,
    pub missing: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub id: RecordId,
    /// One cell per schema attribute, in schema order.
    pub cells: Vec<RawCell>,
    /// Class column text exactly as read.
    pub label_text: String,
    /// `None` when the class text is a missing token.
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub schema: Schema,
    /// Position of the class column in the original header.
    pub class_index: usize,
    pub records: Vec<RawRecord>,
}

/// Reads just the header row.
pub fn read_header(source: impl Read) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers()?;
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::HeaderMismatch("empty header row".into()));
    }
    Ok(headers.iter().map(str::to_string).collect())
}

/// Parses CSV rows against a schema. Record ids are 1-based row ordinals.
/// Numeric columns are validated here so bad text fails fast; categorical
/// text is kept verbatim for [`encode`](crate::data_model::encode).
pub fn load_csv(source: impl Read, schema: &Schema) -> Result<RawDataset> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let class_index = headers
        .iter()
        .position(|h| *h == schema.class_attribute)
        .ok_or_else(|| {
            Error::HeaderMismatch(format!(
                "class column {:?} not found",
                schema.class_attribute
            ))
        })?;
    let feature_positions: Vec<usize> =
        (0..headers.len()).filter(|&i| i != class_index).collect();
    let feature_names: Vec<&str> = feature_positions.iter().map(|&i| headers[i].as_str()).collect();
    let schema_names: Vec<&str> = schema.attributes.iter().map(|a| a.name.as_str()).collect();
    if feature_names != schema_names {
        return Err(Error::HeaderMismatch(format!(
            "expected feature columns {schema_names:?}, found {feature_names:?}"
        )));
    }

    let mut records = Vec::new();
    for (row_idx, row) in reader.records().enumerate() {
        let row = row?;
        let row_no = row_idx + 1;
        if row.len() != headers.len() {
            return Err(Error::RowArity {
                row: row_no,
                expected: headers.len(),
                found: row.len(),
            });
        }
        let mut cells = Vec::with_capacity(feature_positions.len());
        for (j, &pos) in feature_positions.iter().enumerate() {
            let text = row[pos].to_string();
            let missing = schema.is_missing_token(&text);
            if !missing && !schema.attributes[j].is_categorical() {
                let parsed: std::result::Result<f64, _> = text.parse();
                match parsed {
                    Ok(v) if v.is_finite() => {}
                    _ => {
                        return Err(Error::InvalidNumeric {
                            row: row_no,
                            column: schema.attributes[j].name.clone(),
                            text,
                        });
                    }
                }
            }
            cells.push(RawCell { text, missing });
        }
        let label_text = row[class_index].to_string();
        let label = if schema.is_missing_token(&label_text) {
            None
        } else {
            Some(label_text.clone())
        };
        records.push(RawRecord {
            id: row_no,
            cells,
            label_text,
            label,
        });
    }

    Ok(RawDataset {
        schema: schema.clone(),
        class_index,
        records,
    })
}

/// Writes the dataset back out in the original column order. Cells present in
/// the input are echoed verbatim; cells the pipeline filled are decoded from
/// `imputed`. Labels behave the same way: original text wins, predicted labels
/// appear only where the input had none.
pub fn write_csv<S: Scalar>(
    raw: &RawDataset,
    imputed: &Dataset<S>,
    out: impl Write,
) -> Result<()> {
    let n = raw.schema.n();
    let mut writer = csv::Writer::from_writer(out);

    let mut header: Vec<&str> = Vec::with_capacity(n + 1);
    for attr in &raw.schema.attributes {
        header.push(&attr.name);
    }
    header.insert(raw.class_index, &raw.schema.class_attribute);
    writer.write_record(&header)?;

    let by_id: BTreeMap<RecordId, usize> = imputed
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id, i))
        .collect();

    for rec in &raw.records {
        let imp = by_id
            .get(&rec.id)
            .map(|&i| &imputed.records[i])
            .ok_or_else(|| {
                Error::InvalidConfig(format!("record {} absent from the imputed dataset", rec.id))
            })?;
        let mut row: Vec<String> = Vec::with_capacity(n + 1);
        for (j, cell) in rec.cells.iter().enumerate() {
            if !cell.missing {
                row.push(cell.text.clone());
            } else if let Some(v) = imp.values[j] {
                row.push(imputed.decode_cell(j, v)?);
            } else {
                row.push(cell.text.clone());
            }
        }
        let label = if rec.label.is_some() {
            rec.label_text.clone()
        } else if let Some(pred) = &imp.label {
            pred.clone()
        } else {
            rec.label_text.clone()
        };
        row.insert(raw.class_index, label);
        writer.write_record(&row)?;
    }
    writer.flush().map_err(Error::Io)?;
    Ok(())
}
