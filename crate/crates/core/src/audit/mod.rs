//! Group enumeration, error metrics, disparity scores and significance tests.

mod breakdown;
mod groups;
mod metrics;
mod stats;
mod tables;

pub use breakdown::{breakdown_wmse, BreakdownResult, DegenerateEntry, RankedGroup};
pub use groups::{
    default_marginalized_unions, enumerate_groups, BreakdownOptions, BreakdownSchema, GroupKind, GroupSpec,
    MarginalizedUnion, Membership, SchemaName, DEFAULT_MIN_SUPPORT,
};
pub use metrics::{
    freq, mse, percentile_rank, relative_mse_diff, wmse, MseSplit, SkippedTerm, WmseResult, WmseTerm, MSE_EPSILON,
};
pub use stats::{chi2_df1_p_value, chi_square_homogeneity, welch_normal_test, ChiSquare, MeanComparison};
pub use tables::{
    count_significant_groups, mse_table, outlier_mse_table, toxicity_gap, toxicity_gap_for, MseRow, SignificanceCount,
    SignificanceResult, SignificanceSummary, ToxicityGap, UndefinedTest,
};
