//! Imputation of missing tabular values by cluster-guided donor matching.
//!
//! Records with no missing cells are clustered (k-means, with k defaulting
//! to the number of distinct class labels) and every record is reduced to a
//! single scalar: the sum of its distances to all cluster means plus the
//! distances to its nearest neighbors. An incomplete record — whose
//! distances simply skip the missing positions — is then matched to the
//! complete record with the closest scalar, and that donor (or a blend of
//! the top donors) supplies the missing cells and, when asked, a class
//! label. A seeded mask-and-score harness measures recovery quality against
//! reference baselines.
//!
//! The core is generic over the float width via [`Scalar`]; `*F64` / `*F32`
//! aliases pick a width at the crate root. All iteration orders, tie rules,
//! and summation orders are fixed, so every run over the same input is
//! bit-identical.
//!
//! ```
//! use cbci::data_model::{AttributeDescriptor, Dataset, EncodedRecord, Schema};
//! use cbci::{impute_dataset, PipelineConfig};
//!
//! let schema = Schema::new(
//!     vec![
//!         AttributeDescriptor::numeric("x"),
//!         AttributeDescriptor::numeric("y"),
//!     ],
//!     "class",
//!     vec!["?".into()],
//! )?;
//! let records = vec![
//!     EncodedRecord { id: 1, values: vec![Some(1.0), Some(2.0)], label: Some("a".into()) },
//!     EncodedRecord { id: 2, values: vec![Some(1.2), Some(2.2)], label: Some("a".into()) },
//!     EncodedRecord { id: 3, values: vec![Some(8.0), Some(9.0)], label: Some("b".into()) },
//!     EncodedRecord { id: 4, values: vec![Some(8.2), None], label: None },
//! ];
//! let ds: Dataset<f64> = Dataset::new(schema, records)?;
//! let (imputed, report) = impute_dataset(&ds, &PipelineConfig::default())?;
//! assert!(imputed.record(4).unwrap().is_complete());
//! assert_eq!(report.targets.len(), 1);
//! # Ok::<(), cbci::Error>(())
//! ```

pub mod clustering;
pub mod data_model;
mod error;
pub mod evaluation;
pub mod imputation;
pub mod mapping;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use clustering::InitStrategy;
pub use imputation::{
    classify_dataset, impute_dataset, FillStrategy, PipelineConfig,
};
pub use evaluation::{evaluate_methods, mask_dataset, MaskSpec, Method};

pub type DatasetF64 = data_model::Dataset<f64>;
pub type DatasetF32 = data_model::Dataset<f32>;
pub type PipelineConfigF64 = imputation::PipelineConfig<f64>;
pub type PipelineConfigF32 = imputation::PipelineConfig<f32>;
pub type ImputationReportF64 = imputation::ImputationReport<f64>;
pub type ImputationReportF32 = imputation::ImputationReport<f32>;
pub type ClusterModelF64 = clustering::ClusterModel<f64>;
pub type ClusterModelF32 = clustering::ClusterModel<f32>;
pub type MappingEntryF64 = mapping::MappingEntry<f64>;
pub type MappingEntryF32 = mapping::MappingEntry<f32>;
pub type EvalReportF64 = evaluation::EvalReport<f64>;
pub type EvalReportF32 = evaluation::EvalReport<f32>;
