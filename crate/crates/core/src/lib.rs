//! Data-driven site recommendation over hierarchical regional statistics.
//!
//! * [`hierarchy`] and [`snapshot`]: administrative regions and the factor
//!   store with upward (additive) and downward (intensive) inheritance.
//! * [`ingest`]: CSV/JSON dataset loading with a validation report.
//! * [`urp`]: requirement profiles, elimination, fuzzy rating and ranking.
//! * [`analysis`]: overlap tables, correlation, rank-sum tests and group
//!   profiles used to evaluate recommendations against existing stores.
//! * [`fixtures`]: seeded synthetic datasets.

pub mod analysis;
pub mod fixtures;
pub mod hierarchy;
pub mod ingest;
pub mod snapshot;
pub mod urp;

pub use hierarchy::{Hierarchy, HierarchyError, Level, Levels, Site, SiteId, SiteRecord};
pub use snapshot::{Aggregation, FactorValue, IndexFactors, LocationFactor, Snapshot, SnapshotBuilder, SnapshotError};
