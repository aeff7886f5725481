//! Outlier-based disparity auditing for toxicity classifiers.
//!
//! The crate finds the locally rare records of an annotated comment dataset
//! with Local Outlier Factor over three feature spaces (text embeddings,
//! annotator disagreement, demographic labels) and measures how much worse a
//! model performs on those outliers than on traditional demographic breakdowns.
//!
//! Pipeline, module by module:
//!
//! 1. [`data`]: load the CSV, binarize at 0.5, compute disagreement, sample.
//! 2. [`embed`]: text vectors (built-in TF-IDF projection or external file).
//! 3. [`scorer`]: attach model scores from an HTTP scorer or a CSV file.
//! 4. [`outlier`]: exact kNN, LOF, contamination thresholding.
//! 5. [`audit`]: MSE, WMSE, percentiles, toxicity gaps, χ² significance.
//! 6. [`composition`]: who the outliers are.
//! 7. [`sweep`]: WMSE of outlier groups across contamination levels.

pub mod audit;
pub mod composition;
pub mod data;
pub mod embed;
pub mod error;
pub mod outlier;
pub mod scorer;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};
