//! Evaluation analytics: overlap of recommendations with existing stores,
//! correlation of location attributes, population buckets, group profiles
//! and rank-sum tests.

mod groups;
mod overlap;
mod stats;

use thiserror::Error;

use crate::snapshot::SnapshotError;
use crate::urp::EngineError;

pub use groups::{
    bucket_stats, chain_profile, correlation_matrix, group_values, rank_sum_groups, select_sites, Attribute,
    Bucket, BucketStats, CorrelationMatrix, GroupProfile, GroupRankSum, GroupSelector, ProfileFactors,
    ValueContext, ValueSource, DEFAULT_BUCKETS, UNEMPLOYMENT_RATE,
};
pub use overlap::{
    contingency, display_percent, eliminated_sites, evaluate_chains, new_site_candidates, overall_overlap,
    overlap_percentage, ChainEvaluation, ContingencyTable, EliminatedSite, EvaluationReport, OverallOverlap,
    PresenceSet,
};
pub use stats::{
    midranks, pearson, wilcoxon_rank_sum, wilcoxon_rank_sum_with, RankSumMode, RankSumResult, StatsError,
    EXACT_LIMIT, EXACT_THRESHOLD,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("site `{site}` of set `{set}` is outside the universe")]
    SetNotInUniverse { set: String, site: String },
    #[error("`{0}` has no store sites")]
    EmptyStoreSet(String),
    #[error("no presence data for chain `{0}`")]
    UnknownChain(String),
    #[error("unknown factor `{0}`")]
    UnknownFactor(String),
    #[error("unknown site `{0}`")]
    UnknownSite(String),
    #[error("unknown level `{0}`")]
    UnknownLevel(String),
    #[error("need at least 2 attributes, got {0}")]
    TooFewAttributes(usize),
    #[error("need at least 2 sites, got {0}")]
    TooFewSites(usize),
    #[error("invalid bucket bounds: {0}")]
    InvalidBuckets(String),
    #[error("group `{0}` has no resolvable values")]
    EmptyGroup(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}
