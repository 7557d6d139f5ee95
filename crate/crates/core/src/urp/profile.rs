use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::membership::MembershipFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UrpError {
    #[error("profile does not match the schema: {0}")]
    SchemaViolation(String),
    #[error("criterion `{criterion}`: weights must be positive, got {weight}")]
    NonPositiveWeight { criterion: String, weight: f64 },
    #[error("criterion `{criterion}`: membership breakpoints for `{factor}` must be strictly increasing")]
    UnsortedBreakpoints { criterion: String, factor: String },
    #[error("criterion `{criterion}`: membership degree {degree} for `{factor}` is outside [0, 1]")]
    DegreeOutOfRange {
        criterion: String,
        factor: String,
        degree: f64,
    },
    #[error("criterion `{criterion}`: {message}")]
    InvalidCriterion { criterion: String, message: String },
    #[error("criterion name `{0}` is used more than once")]
    DuplicateCriterion(String),
    #[error("profile needs at least one criterion or a regional focus")]
    EmptyProfile,
}

/// A must-have comparison against a factor value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Comparator {
    Ge(f64),
    Gt(f64),
    Le(f64),
    Lt(f64),
    /// Inclusive on both ends.
    Within(f64, f64),
}

impl Comparator {
    pub fn holds(&self, x: f64) -> bool {
        match *self {
            Comparator::Ge(t) => x >= t,
            Comparator::Gt(t) => x > t,
            Comparator::Le(t) => x <= t,
            Comparator::Lt(t) => x < t,
            Comparator::Within(a, b) => a <= x && x <= b,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Comparator::Ge(t) => format!(">= {t}"),
            Comparator::Gt(t) => format!("> {t}"),
            Comparator::Le(t) => format!("<= {t}"),
            Comparator::Lt(t) => format!("< {t}"),
            Comparator::Within(a, b) => format!("within [{a}, {b}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub factor: String,
    pub comparator: Comparator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingTerm {
    pub factor: String,
    pub weight: f64,
    pub membership: MembershipFunction,
}

/// Maps one or more factor values to a suitability degree in `[0, 1]`
/// through weighted membership functions.
#[derive(Debug, Clone, PartialEq)]
pub struct QualitativeRating {
    pub terms: Vec<RatingTerm>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CriterionKind {
    MustHave(Predicate),
    Preference { weight: f64, rating: QualitativeRating },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub name: String,
    pub kind: CriterionKind,
}

impl Criterion {
    pub fn must_have(name: impl Into<String>, factor: impl Into<String>, comparator: Comparator) -> Self {
        Self {
            name: name.into(),
            kind: CriterionKind::MustHave(Predicate {
                factor: factor.into(),
                comparator,
            }),
        }
    }

    pub fn preference(name: impl Into<String>, weight: f64, terms: Vec<RatingTerm>) -> Self {
        Self {
            name: name.into(),
            kind: CriterionKind::Preference {
                weight,
                rating: QualitativeRating { terms },
            },
        }
    }

    pub fn predicate(&self) -> Option<&Predicate> {
        match &self.kind {
            CriterionKind::MustHave(p) => Some(p),
            CriterionKind::Preference { .. } => None,
        }
    }

    /// Factor ids this criterion reads.
    pub fn factors(&self) -> Vec<&str> {
        match &self.kind {
            CriterionKind::MustHave(p) => vec![p.factor.as_str()],
            CriterionKind::Preference { rating, .. } => rating.terms.iter().map(|t| t.factor.as_str()).collect(),
        }
    }
}

/// User requirement profile: criteria, regional focus, the level candidate
/// sites live on, and the evaluation year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UrpDocument", into = "UrpDocument")]
pub struct Urp {
    pub year: i32,
    pub target_level: String,
    pub focus: Vec<String>,
    pub criteria: Vec<Criterion>,
}

impl Urp {
    pub fn must_haves(&self) -> impl Iterator<Item = &Criterion> {
        self.criteria.iter().filter(|c| c.predicate().is_some())
    }

    pub fn preferences(&self) -> impl Iterator<Item = (&Criterion, f64, &QualitativeRating)> {
        self.criteria.iter().filter_map(|c| match &c.kind {
            CriterionKind::Preference { weight, rating } => Some((c, *weight, rating)),
            CriterionKind::MustHave(_) => None,
        })
    }

    /// Same profile with every preference weight multiplied by `factor`.
    pub fn with_scaled_weights(&self, factor: f64) -> Urp {
        let mut out = self.clone();
        for c in &mut out.criteria {
            if let CriterionKind::Preference { weight, .. } = &mut c.kind {
                *weight *= factor;
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }
}

/// Wire shape of a profile document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UrpDocument {
    pub year: i32,
    pub target_level: String,
    #[serde(default)]
    pub focus: Vec<String>,
    #[serde(default)]
    pub criteria: Vec<CriterionDocument>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindDocument {
    MustHave,
    Preference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionDocument {
    pub name: String,
    pub kind: KindDocument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<PredicateDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<RatingDocument>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpDocument {
    Ge,
    Gt,
    Le,
    Lt,
    Within,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredicateDocument {
    pub factor: String,
    pub op: OpDocument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingDocument {
    pub factors: Vec<RatingTermDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingTermDocument {
    pub factor: String,
    pub weight: f64,
    pub membership: Vec<(f64, f64)>,
}

/// Parses and validates a JSON profile document.
pub fn parse_urp(document: &str) -> Result<Urp, UrpError> {
    let doc: UrpDocument = serde_json::from_str(document).map_err(|e| UrpError::SchemaViolation(e.to_string()))?;
    Urp::try_from(doc)
}

fn check_weight(criterion: &str, weight: f64) -> Result<f64, UrpError> {
    if weight.is_finite() && weight > 0.0 {
        Ok(weight)
    } else {
        Err(UrpError::NonPositiveWeight {
            criterion: criterion.to_owned(),
            weight,
        })
    }
}

fn check_finite(criterion: &str, x: f64) -> Result<f64, UrpError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(UrpError::InvalidCriterion {
            criterion: criterion.to_owned(),
            message: format!("non-finite number {x}"),
        })
    }
}

impl TryFrom<UrpDocument> for Urp {
    type Error = UrpError;

    fn try_from(doc: UrpDocument) -> Result<Self, Self::Error> {
        if doc.criteria.is_empty() && doc.focus.is_empty() {
            return Err(UrpError::EmptyProfile);
        }
        let mut names = HashSet::new();
        let mut criteria = Vec::with_capacity(doc.criteria.len());
        for c in doc.criteria {
            if !names.insert(c.name.clone()) {
                return Err(UrpError::DuplicateCriterion(c.name));
            }
            let invalid = |message: &str| UrpError::InvalidCriterion {
                criterion: c.name.clone(),
                message: message.to_owned(),
            };
            let kind = match c.kind {
                KindDocument::MustHave => {
                    if c.weight.is_some() || c.rating.is_some() {
                        return Err(invalid("must-have criteria take a predicate only"));
                    }
                    let p = c.predicate.as_ref().ok_or_else(|| invalid("must-have criteria need a predicate"))?;
                    let threshold = || {
                        p.threshold
                            .ok_or_else(|| invalid("comparison needs a `threshold`"))
                            .and_then(|t| check_finite(&c.name, t))
                    };
                    let comparator = match p.op {
                        OpDocument::Ge => Comparator::Ge(threshold()?),
                        OpDocument::Gt => Comparator::Gt(threshold()?),
                        OpDocument::Le => Comparator::Le(threshold()?),
                        OpDocument::Lt => Comparator::Lt(threshold()?),
                        OpDocument::Within => {
                            let (a, b) = p.range.ok_or_else(|| invalid("`within` needs a `range`"))?;
                            let (a, b) = (check_finite(&c.name, a)?, check_finite(&c.name, b)?);
                            if a > b {
                                return Err(invalid("`range` lower bound exceeds upper bound"));
                            }
                            Comparator::Within(a, b)
                        }
                    };
                    CriterionKind::MustHave(Predicate {
                        factor: p.factor.clone(),
                        comparator,
                    })
                }
                KindDocument::Preference => {
                    if c.predicate.is_some() {
                        return Err(invalid("preferences take a weight and a rating, not a predicate"));
                    }
                    let weight = check_weight(&c.name, c.weight.ok_or_else(|| invalid("preferences need a `weight`"))?)?;
                    let rating = c.rating.as_ref().ok_or_else(|| invalid("preferences need a `rating`"))?;
                    if rating.factors.is_empty() {
                        return Err(invalid("rating needs at least one factor"));
                    }
                    let mut terms = Vec::with_capacity(rating.factors.len());
                    for t in &rating.factors {
                        let weight = check_weight(&c.name, t.weight)?;
                        let membership = MembershipFunction::new(t.membership.clone()).map_err(|e| match e {
                            super::membership::MembershipError::Unsorted => UrpError::UnsortedBreakpoints {
                                criterion: c.name.clone(),
                                factor: t.factor.clone(),
                            },
                            super::membership::MembershipError::DegreeOutOfRange(degree) => {
                                UrpError::DegreeOutOfRange {
                                    criterion: c.name.clone(),
                                    factor: t.factor.clone(),
                                    degree,
                                }
                            }
                            other => UrpError::InvalidCriterion {
                                criterion: c.name.clone(),
                                message: other.to_string(),
                            },
                        })?;
                        terms.push(RatingTerm {
                            factor: t.factor.clone(),
                            weight,
                            membership,
                        });
                    }
                    CriterionKind::Preference {
                        weight,
                        rating: QualitativeRating { terms },
                    }
                }
            };
            criteria.push(Criterion { name: c.name, kind });
        }
        Ok(Urp {
            year: doc.year,
            target_level: doc.target_level,
            focus: doc.focus,
            criteria,
        })
    }
}

impl From<Urp> for UrpDocument {
    fn from(urp: Urp) -> Self {
        let criteria = urp
            .criteria
            .into_iter()
            .map(|c| match c.kind {
                CriterionKind::MustHave(p) => {
                    let (op, threshold, range) = match p.comparator {
                        Comparator::Ge(t) => (OpDocument::Ge, Some(t), None),
                        Comparator::Gt(t) => (OpDocument::Gt, Some(t), None),
                        Comparator::Le(t) => (OpDocument::Le, Some(t), None),
                        Comparator::Lt(t) => (OpDocument::Lt, Some(t), None),
                        Comparator::Within(a, b) => (OpDocument::Within, None, Some((a, b))),
                    };
                    CriterionDocument {
                        name: c.name,
                        kind: KindDocument::MustHave,
                        predicate: Some(PredicateDocument {
                            factor: p.factor,
                            op,
                            threshold,
                            range,
                        }),
                        weight: None,
                        rating: None,
                    }
                }
                CriterionKind::Preference { weight, rating } => CriterionDocument {
                    name: c.name,
                    kind: KindDocument::Preference,
                    predicate: None,
                    weight: Some(weight),
                    rating: Some(RatingDocument {
                        factors: rating
                            .terms
                            .into_iter()
                            .map(|t| RatingTermDocument {
                                factor: t.factor,
                                weight: t.weight,
                                membership: t.membership.points().to_vec(),
                            })
                            .collect(),
                    }),
                },
            })
            .collect();
        UrpDocument {
            year: urp.year,
            target_level: urp.target_level,
            focus: urp.focus,
            criteria,
        }
    }
}
