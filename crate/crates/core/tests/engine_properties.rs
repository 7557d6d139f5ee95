//! Recommendation invariants over random profiles on the synthetic country.

use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use siteselect_core::fixtures::{random_profile, synthetic_country, SyntheticConfig, SyntheticCountry};
use siteselect_core::urp::{check_consistency, parse_urp, recommend, CriterionKind, EngineError, Urp};
use siteselect_core::Snapshot;

fn world() -> &'static (SyntheticCountry, Snapshot) {
    static WORLD: OnceLock<(SyntheticCountry, Snapshot)> = OnceLock::new();
    WORLD.get_or_init(|| {
        let c = synthetic_country(&SyntheticConfig::default());
        let s = c.dataset.snapshot();
        (c, s)
    })
}

/// Municipalities under any focus code, from the raw parent links.
fn focus_oracle(country: &SyntheticCountry, urp: &Urp) -> BTreeSet<String> {
    let parent: HashMap<&str, Option<&str>> = country
        .dataset
        .records
        .iter()
        .map(|r| (r.code.as_str(), r.parent_code.as_deref()))
        .collect();
    country
        .municipalities
        .iter()
        .filter(|m| {
            let mut cur = Some(m.as_str());
            while let Some(c) = cur {
                if urp.focus.iter().any(|f| f == c) {
                    return true;
                }
                cur = parent[c];
            }
            false
        })
        .cloned()
        .collect()
}

/// Sites whose resolved values satisfy every must-have.
fn survivors_oracle(snapshot: &Snapshot, urp: &Urp, sites: &BTreeSet<String>) -> BTreeSet<String> {
    sites
        .iter()
        .filter(|s| {
            urp.criteria.iter().all(|c| match &c.kind {
                CriterionKind::MustHave(p) => snapshot
                    .resolve(s, &p.factor, urp.year)
                    .unwrap()
                    .is_some_and(|v| p.comparator.holds(v)),
                CriterionKind::Preference { .. } => true,
            })
        })
        .cloned()
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn recommendation_invariants(seed in any::<u64>()) {
        let (country, snapshot) = world();
        let urp = random_profile(&mut ChaCha8Rng::seed_from_u64(seed), country);
        // documents round-trip bit for bit
        prop_assert_eq!(&parse_urp(&urp.to_json()).unwrap(), &urp);
        let result = recommend(snapshot, &urp, None);
        if !check_consistency(&urp).is_consistent() {
            prop_assert!(matches!(result, Err(EngineError::InconsistentProfile(_))));
            return Ok(());
        }
        let ranked = result.unwrap();
        let codes: BTreeSet<String> = ranked.iter().map(|r| r.site_code.clone()).collect();
        let focus = focus_oracle(country, &urp);
        let survivors = survivors_oracle(snapshot, &urp, &focus);
        prop_assert!(survivors.is_subset(&focus));
        prop_assert_eq!(&codes, &survivors);
        prop_assert_eq!(codes.len(), ranked.len());

        // sorted by score, ties by code
        for w in ranked.windows(2) {
            prop_assert!(w[0].total_score > w[1].total_score
                || (w[0].total_score == w[1].total_score && w[0].site_code < w[1].site_code));
        }

        // uniform weight scaling keeps the order and the scores
        for factor in [0.25, 3.0, 1000.0] {
            let scaled = recommend(snapshot, &urp.with_scaled_weights(factor), None).unwrap();
            let a: Vec<&str> = ranked.iter().map(|r| r.site_code.as_str()).collect();
            let b: Vec<&str> = scaled.iter().map(|r| r.site_code.as_str()).collect();
            prop_assert_eq!(a, b);
            for (x, y) in ranked.iter().zip(&scaled) {
                prop_assert!((x.total_score - y.total_score).abs() < 1e-12);
            }
        }

        // repeat runs serialize identically
        let first = serde_json::to_string(&ranked).unwrap();
        let again = serde_json::to_string(&recommend(snapshot, &urp, None).unwrap()).unwrap();
        prop_assert_eq!(first, again);
    }
}
