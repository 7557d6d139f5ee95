//! Aggregation invariants over randomly shaped forests, checked against an
//! oracle that works on the raw parent links only.

use std::collections::HashMap;

use proptest::prelude::*;
use siteselect_core::fixtures::{random_forest, RandomForest, FOREST_YEAR as YEAR};

/// Recursive additive oracle over the raw records.
fn additive_oracle(f: &RandomForest, code: &str, children: &HashMap<String, Vec<String>>) -> Option<f64> {
    if let Some(v) = f.additive.get(code) {
        return Some(*v);
    }
    let kids = children.get(code)?;
    let mut total = 0.0;
    for k in kids {
        total += additive_oracle(f, k, children)?;
    }
    Some(total)
}

fn intensive_oracle(f: &RandomForest, code: &str, parent: &HashMap<String, Option<String>>) -> Option<f64> {
    let mut cur = Some(code.to_owned());
    while let Some(c) = cur {
        if let Some(v) = f.intensive.get(&c) {
            return Some(*v);
        }
        cur = parent[&c].clone();
    }
    None
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn aggregation_matches_oracle(seed in any::<u64>()) {
        let f = random_forest(seed);
        let s = f.snapshot();
        let version = s.version().to_owned();
        let mut children: HashMap<String, Vec<String>> = HashMap::new();
        let mut parent = HashMap::new();
        for r in &f.records {
            parent.insert(r.code.clone(), r.parent_code.clone());
            if let Some(p) = &r.parent_code {
                children.entry(p.clone()).or_default().push(r.code.clone());
            }
        }

        let first: Vec<_> = f.records.iter().map(|r| {
            (
                s.resolve(&r.code, "additive", YEAR).unwrap(),
                s.resolve(&r.code, "intensive", YEAR).unwrap(),
                s.resolve(&r.code, "plain", YEAR).unwrap(),
            )
        }).collect();

        for (r, (add, int, plain)) in f.records.iter().zip(&first) {
            // additive: native wins, else exact integer sum of children
            prop_assert_eq!(*add, additive_oracle(&f, &r.code, &children), "additive at {}", r.code);
            if !f.additive.contains_key(&r.code) {
                if let Some(kids) = children.get(&r.code) {
                    let sum: Option<f64> = kids.iter().map(|k| s.resolve(k, "additive", YEAR).unwrap()).sum();
                    prop_assert_eq!(*add, sum);
                }
            }
            // intensive: nearest native value on the path to the root
            prop_assert_eq!(*int, intensive_oracle(&f, &r.code, &parent), "intensive at {}", r.code);
            // no derivation at all
            prop_assert_eq!(*plain, f.additive.get(&r.code).copied());
        }

        // purity: reverse-order re-evaluation is identical and the snapshot
        // is unchanged
        for (r, expected) in f.records.iter().zip(&first).rev() {
            let again = (
                s.resolve(&r.code, "additive", YEAR).unwrap(),
                s.resolve(&r.code, "intensive", YEAR).unwrap(),
                s.resolve(&r.code, "plain", YEAR).unwrap(),
            );
            prop_assert_eq!(&again, expected);
        }
        prop_assert_eq!(s.version(), version.as_str());
        let rebuilt = f.snapshot();
        prop_assert_eq!(rebuilt.version(), version.as_str());
    }
}
