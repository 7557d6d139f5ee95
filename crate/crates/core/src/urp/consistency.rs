use serde::Serialize;

use super::profile::{Comparator, Urp};

/// Two must-haves on the same factor that no value can satisfy together.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conflict {
    pub first: String,
    pub second: String,
    pub factor: String,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "conflicts", rename_all = "snake_case")]
pub enum Consistency {
    Consistent,
    Conflicts(Vec<Conflict>),
}

impl Consistency {
    pub fn is_consistent(&self) -> bool {
        matches!(self, Consistency::Consistent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Endpoint {
    value: f64,
    open: bool,
}

/// Set of values accepted by a comparator, as an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Interval {
    lo: Endpoint,
    hi: Endpoint,
}

impl Interval {
    fn of(c: Comparator) -> Self {
        let closed = |value| Endpoint { value, open: false };
        let open = |value| Endpoint { value, open: true };
        match c {
            Comparator::Ge(t) => Interval {
                lo: closed(t),
                hi: open(f64::INFINITY),
            },
            Comparator::Gt(t) => Interval {
                lo: open(t),
                hi: open(f64::INFINITY),
            },
            Comparator::Le(t) => Interval {
                lo: open(f64::NEG_INFINITY),
                hi: closed(t),
            },
            Comparator::Lt(t) => Interval {
                lo: open(f64::NEG_INFINITY),
                hi: open(t),
            },
            Comparator::Within(a, b) => Interval {
                lo: closed(a),
                hi: closed(b),
            },
        }
    }

    fn intersect(self, other: Interval) -> Interval {
        let lo = if self.lo.value > other.lo.value {
            self.lo
        } else if other.lo.value > self.lo.value {
            other.lo
        } else {
            Endpoint {
                value: self.lo.value,
                open: self.lo.open || other.lo.open,
            }
        };
        let hi = if self.hi.value < other.hi.value {
            self.hi
        } else if other.hi.value < self.hi.value {
            other.hi
        } else {
            Endpoint {
                value: self.hi.value,
                open: self.hi.open || other.hi.open,
            }
        };
        Interval { lo, hi }
    }

    fn is_empty(self) -> bool {
        self.lo.value > self.hi.value || (self.lo.value == self.hi.value && (self.lo.open || self.hi.open))
    }
}

/// Pairwise check of must-have predicates sharing a factor.
pub fn check_consistency(urp: &Urp) -> Consistency {
    let must: Vec<_> = urp
        .must_haves()
        .map(|c| (c, c.predicate().expect("must-have has a predicate")))
        .collect();
    let mut conflicts = Vec::new();
    for (i, (ca, pa)) in must.iter().enumerate() {
        for (cb, pb) in &must[i + 1..] {
            if pa.factor != pb.factor {
                continue;
            }
            if Interval::of(pa.comparator).intersect(Interval::of(pb.comparator)).is_empty() {
                conflicts.push(Conflict {
                    first: ca.name.clone(),
                    second: cb.name.clone(),
                    factor: pa.factor.clone(),
                    explanation: format!(
                        "`{}` requires {} {} but `{}` requires {} {}",
                        ca.name,
                        pa.factor,
                        pa.comparator.describe(),
                        cb.name,
                        pb.factor,
                        pb.comparator.describe()
                    ),
                });
            }
        }
    }
    if conflicts.is_empty() {
        Consistency::Consistent
    } else {
        Consistency::Conflicts(conflicts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::urp::profile::Criterion;
    use proptest::prelude::*;

    fn urp(criteria: Vec<Criterion>) -> Urp {
        Urp {
            year: 2016,
            target_level: "Municipality".into(),
            focus: vec!["A".into()],
            criteria,
        }
    }

    /// Brute-force oracle: two intervals intersect iff one of a finite set
    /// of probe points (every threshold, midpoints between thresholds and
    /// points beyond the extremes) satisfies both comparators.
    fn satisfiable_by_probe(a: Comparator, b: Comparator) -> bool {
        let mut ts = Vec::new();
        for c in [a, b] {
            match c {
                Comparator::Ge(t) | Comparator::Gt(t) | Comparator::Le(t) | Comparator::Lt(t) => ts.push(t),
                Comparator::Within(x, y) => {
                    ts.push(x);
                    ts.push(y)
                }
            }
        }
        ts.sort_by(f64::total_cmp);
        let mut probes = ts.clone();
        for w in ts.windows(2) {
            probes.push((w[0] + w[1]) / 2.0);
        }
        probes.push(ts[0] - 1.0);
        probes.push(ts[ts.len() - 1] + 1.0);
        probes.iter().any(|&x| a.holds(x) && b.holds(x))
    }

    #[test]
    fn empty_profile_is_consistent() {
        assert_eq!(check_consistency(&urp(vec![])), Consistency::Consistent);
    }

    #[test]
    fn single_must_have_is_consistent() {
        let u = urp(vec![Criterion::must_have("big", "inhabitants", Comparator::Ge(5000.0))]);
        assert!(check_consistency(&u).is_consistent());
    }

    #[test]
    fn disjoint_thresholds_conflict() {
        let a = Comparator::Ge(5000.0);
        let b = Comparator::Le(2000.0);
        assert!(!satisfiable_by_probe(a, b));
        let u = urp(vec![
            Criterion::must_have("at least 5000", "inhabitants", a),
            Criterion::must_have("at most 2000", "inhabitants", b),
        ]);
        match check_consistency(&u) {
            Consistency::Conflicts(c) => {
                assert_eq!(c.len(), 1);
                assert_eq!(c[0].first, "at least 5000");
                assert_eq!(c[0].second, "at most 2000");
                assert!(c[0].explanation.contains("at least 5000") && c[0].explanation.contains("at most 2000"));
            }
            other => panic!("expected conflict, got {other:?}"),
        }
    }

    #[test]
    fn touching_endpoints() {
        let both = |a, b| {
            check_consistency(&urp(vec![
                Criterion::must_have("a", "f", a),
                Criterion::must_have("b", "f", b),
            ]))
            .is_consistent()
        };
        assert!(both(Comparator::Ge(5.0), Comparator::Le(5.0)));
        assert!(!both(Comparator::Gt(5.0), Comparator::Le(5.0)));
        assert!(!both(Comparator::Ge(5.0), Comparator::Lt(5.0)));
        assert!(both(Comparator::Within(1.0, 5.0), Comparator::Within(5.0, 9.0)));
        assert!(!both(Comparator::Within(1.0, 4.0), Comparator::Gt(4.0)));
    }

    #[test]
    fn different_factors_never_conflict() {
        let u = urp(vec![
            Criterion::must_have("a", "f", Comparator::Ge(5.0)),
            Criterion::must_have("b", "g", Comparator::Le(1.0)),
        ]);
        assert!(check_consistency(&u).is_consistent());
    }

    fn comparator() -> impl Strategy<Value = Comparator> {
        let t = (-5i32..=5).prop_map(f64::from);
        prop_oneof![
            t.clone().prop_map(Comparator::Ge),
            t.clone().prop_map(Comparator::Gt),
            t.clone().prop_map(Comparator::Le),
            t.clone().prop_map(Comparator::Lt),
            (t.clone(), t).prop_map(|(a, b)| Comparator::Within(a.min(b), a.max(b))),
        ]
    }

    proptest! {
        #[test]
        fn matches_probe_oracle(a in comparator(), b in comparator()) {
            let u = urp(vec![Criterion::must_have("a", "f", a), Criterion::must_have("b", "f", b)]);
            prop_assert_eq!(check_consistency(&u).is_consistent(), satisfiable_by_probe(a, b));
        }
    }
}
