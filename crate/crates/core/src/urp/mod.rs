//! User requirement profiles and the recommendation engine.
//!
//! A profile holds must-have criteria (elimination conditions on a single
//! factor) and weighted preferences (fuzzy ratings over one or more
//! factors), a regional focus and a target level. Recommendation keeps the
//! candidates that pass every must-have and ranks them by the normalized
//! weighted sum of their preference ratings.

mod consistency;
mod engine;
mod membership;
mod profile;

pub use consistency::{check_consistency, Conflict, Consistency};
pub use engine::{
    candidates, eliminate, evaluate_candidates, rate, ranking_order, recommend, score, CriterionScore, Elimination,
    EliminationReason, EngineError, Rating, ReasonKind, Recommendation,
};
pub use membership::{membership, MembershipError, MembershipFunction};
pub use profile::{
    parse_urp, Comparator, Criterion, CriterionKind, Predicate, QualitativeRating, RatingTerm, Urp, UrpDocument,
    UrpError,
};
