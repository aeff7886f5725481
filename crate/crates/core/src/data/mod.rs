//! Dataset schema, CSV ingestion and preprocessing.
//!
//! Loading only parses decimal values. Binarization and annotator
//! disagreement are separate steps ([`DatasetTable::binarize`],
//! [`DatasetTable::compute_disagreement`]) so that every derived column is
//! traceable to one pipeline stage.

mod io;
mod sample;
mod schema;
mod table;

pub use io::{load_dataset, load_dataset_from_reader, write_canonical_csv, write_csv};
pub use sample::stratified_sample;
pub use schema::{
    validate_channels, AttributeChannel, ChannelKind, SchemaConfig, ScoreColumnConfig, DEFAULT_DEMOGRAPHICS,
    DEFAULT_TOXICITY_TYPES,
};
pub use table::{AnnotationColumn, CommentRecord, DatasetTable, ScoreColumn};

/// Decimal annotations at or above this value count as positive.
pub const BINARY_THRESHOLD: f64 = 0.5;

/// Binary label for an averaged annotation. The threshold is inclusive, so
/// an evenly split annotator pool counts as positive.
#[inline]
pub fn binarize(value: f64) -> bool {
    value >= BINARY_THRESHOLD
}

/// Annotator disagreement implied by an averaged binary annotation `p`.
///
/// Returns the Bernoulli variance `p(1-p)` and a flag that is `false` iff the
/// annotators were unanimous (`p` is exactly 0 or 1).
#[inline]
pub fn disagreement(value: f64) -> (f64, bool) {
    let var = value * (1.0 - value);
    (var, value != 0.0 && value != 1.0)
}
