//! Elimination, rating, scoring and ranking of candidate sites.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::consistency::{check_consistency, Conflict, Consistency};
use super::profile::{Criterion, CriterionKind, QualitativeRating, Urp};
use crate::hierarchy::SiteId;
use crate::snapshot::{Snapshot, SnapshotError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("unknown site `{0}`")]
    UnknownSite(String),
    #[error("unknown factor `{0}`")]
    UnknownFactor(String),
    #[error("unknown target level `{0}`")]
    UnknownLevel(String),
    #[error("unknown focus region(s): {}", .0.join(", "))]
    UnknownFocus(Vec<String>),
    #[error("profile has an empty regional focus")]
    EmptyFocus,
    #[error("profile is inconsistent: {}", .0.iter().map(|c| c.explanation.as_str()).collect::<Vec<_>>().join("; "))]
    InconsistentProfile(Vec<Conflict>),
}

impl From<SnapshotError> for EngineError {
    fn from(e: SnapshotError) -> Self {
        match e {
            SnapshotError::UnknownSite(s) => EngineError::UnknownSite(s),
            SnapshotError::UnknownFactor(f) => EngineError::UnknownFactor(f),
            other => unreachable!("resolution does not raise {other}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasonKind {
    /// The resolved value fails the predicate.
    Violated,
    /// No value can be resolved, so the predicate cannot be verified.
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EliminationReason {
    pub criterion: String,
    pub factor: String,
    pub kind: ReasonKind,
    pub value: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "reasons", rename_all = "snake_case")]
pub enum Elimination {
    Pass,
    Fail(Vec<EliminationReason>),
}

impl Elimination {
    pub fn passed(&self) -> bool {
        matches!(self, Elimination::Pass)
    }
}

/// Checks every must-have in `criteria` (preferences are ignored).
pub fn eliminate(
    snapshot: &Snapshot,
    site_code: &str,
    criteria: &[Criterion],
    year: i32,
) -> Result<Elimination, EngineError> {
    if !snapshot.hierarchy().contains(site_code) {
        return Err(EngineError::UnknownSite(site_code.to_owned()));
    }
    let mut reasons = Vec::new();
    for c in criteria {
        let Some(p) = c.predicate() else { continue };
        let value = snapshot.resolve(site_code, &p.factor, year)?;
        match value {
            Some(v) if p.comparator.holds(v) => {}
            Some(v) => reasons.push(EliminationReason {
                criterion: c.name.clone(),
                factor: p.factor.clone(),
                kind: ReasonKind::Violated,
                value: Some(v),
                message: format!("{} = {v} is not {}", p.factor, p.comparator.describe()),
            }),
            None => reasons.push(EliminationReason {
                criterion: c.name.clone(),
                factor: p.factor.clone(),
                kind: ReasonKind::Missing,
                value: None,
                message: format!("{} has no value for {year}", p.factor),
            }),
        }
    }
    Ok(if reasons.is_empty() {
        Elimination::Pass
    } else {
        Elimination::Fail(reasons)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rating {
    pub value: f64,
    /// Factors that could not be resolved and contributed 0.
    pub missing: Vec<String>,
}

/// Weighted mean of membership degrees; inner weights are normalized.
pub fn rate(
    snapshot: &Snapshot,
    site_code: &str,
    rating: &QualitativeRating,
    year: i32,
) -> Result<Rating, EngineError> {
    if !snapshot.hierarchy().contains(site_code) {
        return Err(EngineError::UnknownSite(site_code.to_owned()));
    }
    let mut weighted = 0.0;
    let mut total_weight = 0.0;
    let mut missing = Vec::new();
    for term in &rating.terms {
        total_weight += term.weight;
        match snapshot.resolve(site_code, &term.factor, year)? {
            Some(v) => weighted += term.weight * term.membership.degree(v),
            None => missing.push(term.factor.clone()),
        }
    }
    let value = if total_weight > 0.0 {
        (weighted / total_weight).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(Rating { value, missing })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CriterionScore {
    MustHave {
        criterion: String,
        factor: String,
        value: Option<f64>,
        passed: bool,
        missing: bool,
    },
    Preference {
        criterion: String,
        rating: f64,
        /// Weight after normalization over all preferences.
        weight: f64,
        contribution: f64,
        missing: bool,
        missing_factors: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub site_code: String,
    pub site_name: String,
    pub total_score: f64,
    pub eliminated: bool,
    pub elimination_reasons: Vec<EliminationReason>,
    pub breakdown: Vec<CriterionScore>,
}

/// Scores one site: elimination first, then the weighted preference sum.
/// Eliminated sites keep their breakdown but score 0.
pub fn score(snapshot: &Snapshot, site_code: &str, urp: &Urp) -> Result<Recommendation, EngineError> {
    let site = snapshot
        .hierarchy()
        .get(site_code)
        .ok_or_else(|| EngineError::UnknownSite(site_code.to_owned()))?;
    let elimination = eliminate(snapshot, site_code, &urp.criteria, urp.year)?;

    let total_weight: f64 = urp.preferences().map(|(_, w, _)| w).sum();
    let mut weighted = 0.0;
    let mut breakdown = Vec::with_capacity(urp.criteria.len());
    for c in &urp.criteria {
        match &c.kind {
            CriterionKind::MustHave(p) => {
                let value = snapshot.resolve(site_code, &p.factor, urp.year)?;
                breakdown.push(CriterionScore::MustHave {
                    criterion: c.name.clone(),
                    factor: p.factor.clone(),
                    value,
                    passed: value.is_some_and(|v| p.comparator.holds(v)),
                    missing: value.is_none(),
                });
            }
            CriterionKind::Preference { weight, rating } => {
                let r = rate(snapshot, site_code, rating, urp.year)?;
                let normalized = weight / total_weight;
                weighted += weight * r.value;
                breakdown.push(CriterionScore::Preference {
                    criterion: c.name.clone(),
                    rating: r.value,
                    weight: normalized,
                    contribution: normalized * r.value,
                    missing: !r.missing.is_empty(),
                    missing_factors: r.missing,
                });
            }
        }
    }

    let (eliminated, reasons) = match elimination {
        Elimination::Pass => (false, Vec::new()),
        Elimination::Fail(r) => (true, r),
    };
    let total_score = if eliminated || total_weight == 0.0 {
        0.0
    } else {
        (weighted / total_weight).clamp(0.0, 1.0)
    };
    Ok(Recommendation {
        site_code: site.code.clone(),
        site_name: site.name.clone(),
        total_score,
        eliminated,
        elimination_reasons: reasons,
        breakdown,
    })
}

/// Sites at the profile's target level inside its focus subtrees, in
/// hierarchy order.
pub fn candidates(snapshot: &Snapshot, urp: &Urp) -> Result<Vec<SiteId>, EngineError> {
    if urp.focus.is_empty() {
        return Err(EngineError::EmptyFocus);
    }
    let h = snapshot.hierarchy();
    let level = h
        .levels()
        .by_name(&urp.target_level)
        .ok_or_else(|| EngineError::UnknownLevel(urp.target_level.clone()))?;
    let unknown: Vec<String> = urp.focus.iter().filter(|f| !h.contains(f)).cloned().collect();
    if !unknown.is_empty() {
        return Err(EngineError::UnknownFocus(unknown));
    }
    let mut out = BTreeSet::new();
    for code in &urp.focus {
        let root = h.id(code).expect("checked above");
        out.extend(h.subtree(root).into_iter().filter(|id| h.site(*id).level == level));
    }
    Ok(out.into_iter().collect())
}

fn validate(snapshot: &Snapshot, urp: &Urp) -> Result<Vec<SiteId>, EngineError> {
    if let Consistency::Conflicts(c) = check_consistency(urp) {
        return Err(EngineError::InconsistentProfile(c));
    }
    let candidates = candidates(snapshot, urp)?;
    for c in &urp.criteria {
        for f in c.factors() {
            if snapshot.factor(f).is_none() {
                return Err(EngineError::UnknownFactor(f.to_owned()));
            }
        }
    }
    Ok(candidates)
}

/// Scores every candidate, eliminated or not, in hierarchy order.
pub fn evaluate_candidates(snapshot: &Snapshot, urp: &Urp) -> Result<Vec<Recommendation>, EngineError> {
    let candidates = validate(snapshot, urp)?;
    let h = snapshot.hierarchy();
    candidates
        .par_iter()
        .map(|id| score(snapshot, &h.site(*id).code, urp))
        .collect()
}

/// Ranking order: score descending, then site code ascending.
pub fn ranking_order(a: &Recommendation, b: &Recommendation) -> Ordering {
    b.total_score
        .total_cmp(&a.total_score)
        .then_with(|| a.site_code.cmp(&b.site_code))
}

/// Ranked, non-eliminated candidates, truncated to `top_k` when given.
pub fn recommend(snapshot: &Snapshot, urp: &Urp, top_k: Option<usize>) -> Result<Vec<Recommendation>, EngineError> {
    let mut ranked: Vec<Recommendation> = evaluate_candidates(snapshot, urp)?
        .into_iter()
        .filter(|r| !r.eliminated)
        .collect();
    ranked.sort_by(ranking_order);
    if let Some(k) = top_k {
        ranked.truncate(k);
    }
    Ok(ranked)
}
