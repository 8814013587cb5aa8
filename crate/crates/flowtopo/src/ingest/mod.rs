//! Flow dataset parsing: schema descriptors, CSV loading, imputation, splits.

mod load;
mod schema;

pub use load::{
    attack_categories, load_dataset, load_with_spec, prefix_split, write_dataset, FlowDataset,
    FlowRecord,
};
pub use schema::{CustomSchema, DatasetSchema, FeatureColumns, IngestError, PresetKind, SchemaSpec};
