//! Acceptance run over the primary criteria. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use siteselect_core::analysis::{
    chain_profile, correlation_matrix, pearson, select_sites, wilcoxon_rank_sum, wilcoxon_rank_sum_with, Attribute,
    ProfileFactors, RankSumMode, ValueContext, ValueSource,
};
use siteselect_core::fixtures::{
    random_forest, random_profile, synthetic_country, RandomForest, SyntheticConfig, SyntheticCountry,
    DISCOUNT_CHAIN, FOREST_YEAR, PROPORTIONAL_CHAIN, RANDOM_INDEX, THRESHOLD_CHAIN,
};
use siteselect_core::urp::{check_consistency, recommend, CriterionKind, EngineError, Urp};
use siteselect_core::{IndexFactors, Snapshot};

const BIN: &str = env!("CARGO_BIN_EXE_siteselect");

fn siteselect(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(BIN).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`siteselect {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn json(bytes: &[u8]) -> Result<Value, String> {
    serde_json::from_slice(bytes).map_err(|e| e.to_string())
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    check(elapsed < limit, || format!("{what} took {elapsed:.2?}, limit {limit:?}"))
}

// -- 1. published classification counts ------------------------------------

fn case_study_counts() -> Result<String, String> {
    // chain, cells (store∧fulfilled, store∧¬fulfilled, ¬store∧fulfilled, ¬store∧¬fulfilled), overlap
    let expected = [
        ("Lidl", [428, 25, 412, 839], 94.5),
        ("NP", [224, 32, 599, 849], 87.5),
        ("E-Center", [80, 10, 303, 1311], 88.9),
    ];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for (chain, cells, percent) in expected {
        let sub = dir.path().join(chain.to_lowercase());
        let manifest = String::from_utf8_lossy(&siteselect(&[
            "generate", "--kind", "case-study", "--chain", chain, "--out", s(&sub),
        ])?)
        .trim()
        .to_owned();
        let profile = format!("{chain}={}", s(&sub.join("profiles").join(format!("{}.json", chain.to_lowercase()))));
        let t = Instant::now();
        let report = json(&siteselect(&["evaluate", "--manifest", &manifest, "--profile", &profile, "--format", "json"])?)?;
        within(t.elapsed(), Duration::from_secs(1), &format!("{chain} evaluate"))?;
        let row = &report["chains"][0];
        let table = &row["table"];
        let got = ["store_fulfilled", "store_unfulfilled", "no_store_fulfilled", "no_store_unfulfilled"]
            .map(|k| table[k].as_u64().unwrap_or(u64::MAX));
        check(got == cells.map(|c: u64| c), || format!("{chain}: cells {got:?}, expected {cells:?}"))?;
        check(table["universe"] == 1704, || format!("{chain}: universe {}", table["universe"]))?;
        let overlap = row["overlap_percent"].as_f64().ok_or("no overlap")?;
        check((overlap - percent).abs() <= 0.05, || format!("{chain}: overlap {overlap:.3} vs {percent}"))?;
        detail.push(format!("{chain} {}/{}/{}/{} {overlap:.2}%", got[0], got[1], got[2], got[3]));
    }
    Ok(detail.join(", "))
}

// -- 2. synthetic country end to end ---------------------------------------

fn synthetic_end_to_end() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t = Instant::now();
    let manifest = String::from_utf8_lossy(&siteselect(&["generate", "--out", s(dir.path()), "--seed", "42"])?)
        .trim()
        .to_owned();
    let profile = dir.path().join("profiles").join(format!("{}.json", THRESHOLD_CHAIN.to_lowercase()));
    let report = json(&siteselect(&[
        "evaluate",
        "--manifest",
        &manifest,
        "--profile",
        &format!("{THRESHOLD_CHAIN}={}", s(&profile)),
        "--format",
        "json",
    ])?)?;
    let ranked = json(&siteselect(&["recommend", "--manifest", &manifest, "--urp", s(&profile), "--format", "json"])?)?;
    within(t.elapsed(), Duration::from_secs(5), "generate + evaluate + recommend")?;

    // oracle: classify every municipality directly from the generator's draws
    let c = synthetic_country(&SyntheticConfig::with_seed(42));
    check(c.municipalities.len() == 200, || "country size".into())?;
    let stores = c.dataset.presence(THRESHOLD_CHAIN).ok_or("no threshold chain")?;
    let threshold = c.config.threshold;
    let fulfilled: BTreeSet<&str> = c
        .municipalities
        .iter()
        .zip(&c.inhabitants)
        .filter(|(_, v)| **v >= threshold)
        .map(|(m, _)| m.as_str())
        .collect();
    let hits = fulfilled.iter().filter(|m| stores.contains(m)).count();
    let direct = 100.0 * hits as f64 / stores.len() as f64;

    let recommended: BTreeSet<&str> =
        ranked.as_array().ok_or("recommend output")?.iter().filter_map(|r| r["site_code"].as_str()).collect();
    check(recommended == fulfilled, || "recommended sites differ from the direct classification".into())?;
    let overlap = report["chains"][0]["overlap_percent"].as_f64().ok_or("no overlap")?;
    check(overlap == direct, || format!("evaluate {overlap} vs direct {direct}"))?;
    let expected = c.expected_threshold_overlap();
    check((overlap - expected).abs() <= 3.0, || format!("overlap {overlap:.2} vs expectation {expected:.2}"))?;
    Ok(format!("overlap {overlap:.2}% vs expectation {expected:.2}% (|Δ| {:.2} pp)", (overlap - expected).abs()))
}

// -- 3. aggregation over random forests -----------------------------------

fn forest_violations(f: &RandomForest) -> usize {
    let s = f.snapshot();
    let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
    let mut parent: HashMap<&str, Option<&str>> = HashMap::new();
    for r in &f.records {
        parent.insert(&r.code, r.parent_code.as_deref());
        if let Some(p) = &r.parent_code {
            children.entry(p).or_default().push(&r.code);
        }
    }
    fn additive(f: &RandomForest, code: &str, children: &HashMap<&str, Vec<&str>>) -> Option<f64> {
        if let Some(v) = f.additive.get(code) {
            return Some(*v);
        }
        children.get(code)?.iter().map(|k| additive(f, k, children)).sum()
    }
    let intensive = |code: &str| {
        let mut cur = Some(code);
        while let Some(c) = cur {
            if let Some(v) = f.intensive.get(c) {
                return Some(*v);
            }
            cur = parent[c];
        }
        None
    };
    let resolve = |code: &str| {
        ["additive", "intensive", "plain"].map(|factor| s.resolve(code, factor, FOREST_YEAR).ok().flatten())
    };
    let first: Vec<_> = f.records.iter().map(|r| resolve(&r.code)).collect();
    let mut bad = 0;
    for (r, got) in f.records.iter().zip(&first) {
        let want = [additive(f, &r.code, &children), intensive(&r.code), f.additive.get(&r.code).copied()];
        bad += usize::from(*got != want);
    }
    // purity: re-resolving in reverse order and rebuilding change nothing
    for (r, got) in f.records.iter().zip(&first).rev() {
        bad += usize::from(resolve(&r.code) != *got);
    }
    bad + usize::from(f.snapshot().version() != s.version())
}

fn hierarchy_invariants() -> Result<String, String> {
    let mut sites = 0;
    let mut violations = 0;
    for seed in 0..1000 {
        let f = random_forest(seed);
        sites += f.records.len();
        violations += forest_violations(&f);
    }
    check(violations == 0, || format!("{violations} violations"))?;
    Ok(format!("1000 forests, {sites} sites, 0 violations"))
}

// -- 4. engine over random profiles ------------------------------------------

fn focus_oracle(c: &SyntheticCountry, urp: &Urp) -> BTreeSet<String> {
    let parent: HashMap<&str, Option<&str>> =
        c.dataset.records.iter().map(|r| (r.code.as_str(), r.parent_code.as_deref())).collect();
    c.municipalities
        .iter()
        .filter(|m| {
            let mut cur = Some(m.as_str());
            while let Some(code) = cur {
                if urp.focus.iter().any(|f| f == code) {
                    return true;
                }
                cur = parent[code];
            }
            false
        })
        .cloned()
        .collect()
}

fn survivors_oracle(snapshot: &Snapshot, urp: &Urp, sites: &BTreeSet<String>) -> BTreeSet<String> {
    sites
        .iter()
        .filter(|site| {
            urp.criteria.iter().all(|c| match &c.kind {
                CriterionKind::MustHave(p) => {
                    matches!(snapshot.resolve(site, &p.factor, urp.year), Ok(Some(v)) if p.comparator.holds(v))
                }
                CriterionKind::Preference { .. } => true,
            })
        })
        .cloned()
        .collect()
}

fn profile_violations(c: &SyntheticCountry, snapshot: &Snapshot, urp: &Urp) -> Vec<String> {
    let mut v = Vec::new();
    let result = recommend(snapshot, urp, None);
    if !check_consistency(urp).is_consistent() {
        if !matches!(result, Err(EngineError::InconsistentProfile(_))) {
            v.push("inconsistent profile not rejected".into());
        }
        return v;
    }
    let ranked = match result {
        Ok(r) => r,
        Err(e) => return vec![format!("engine error {e}")],
    };
    let codes: BTreeSet<String> = ranked.iter().map(|r| r.site_code.clone()).collect();
    let focus = focus_oracle(c, urp);
    let survivors = survivors_oracle(snapshot, urp, &focus);
    if codes != survivors || codes.len() != ranked.len() || !survivors.is_subset(&focus) {
        v.push("output is not the must-have survivors of the focus".into());
    }
    if ranked.windows(2).any(|w| {
        !(w[0].total_score > w[1].total_score || (w[0].total_score == w[1].total_score && w[0].site_code < w[1].site_code))
    }) {
        v.push("ranking order".into());
    }
    for factor in [0.5, 7.0, 1000.0] {
        match recommend(snapshot, &urp.with_scaled_weights(factor), None) {
            Ok(scaled) => {
                let same = scaled.len() == ranked.len()
                    && scaled.iter().zip(&ranked).all(|(a, b)| a.site_code == b.site_code);
                if !same {
                    v.push(format!("ranking changed under weight scaling by {factor}"));
                }
            }
            Err(e) => v.push(format!("scaled profile failed: {e}")),
        }
    }
    v
}

fn engine_invariants() -> Result<String, String> {
    let c = synthetic_country(&SyntheticConfig::default());
    let snapshot = c.dataset.snapshot();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = c.dataset.write_to(dir.path()).map_err(|e| e.to_string())?;
    let urp_path = dir.path().join("random.json");
    let (mut violations, mut rejected, mut via_binary) = (Vec::new(), 0, 0);
    for i in 0..500u64 {
        let urp = random_profile(&mut ChaCha8Rng::seed_from_u64(1000 + i), &c);
        if !check_consistency(&urp).is_consistent() {
            rejected += 1;
        }
        violations.extend(profile_violations(&c, &snapshot, &urp).into_iter().map(|m| format!("profile {i}: {m}")));

        // JSON mode: repeat runs are byte-identical and equal the engine's output
        fs::write(&urp_path, urp.to_json()).map_err(|e| e.to_string())?;
        let args = ["siteselect", "recommend", "--manifest", s(&manifest), "--urp", s(&urp_path), "--format", "json"];
        let run = || {
            let (mut out, mut err) = (Vec::new(), Vec::new());
            let code = siteselect_cli::run(args, &mut out, &mut err);
            (code, out)
        };
        let (code, first) = run();
        if run().1 != first {
            violations.push(format!("profile {i}: repeat JSON output differs"));
        }
        if let Ok(ranked) = recommend(&snapshot, &urp, None) {
            let expected = format!("{}\n", serde_json::to_string_pretty(&ranked).expect("serializes"));
            if code != 0 || first != expected.as_bytes() {
                violations.push(format!("profile {i}: CLI JSON differs from the engine"));
            }
        }
        if i % 50 == 0 {
            via_binary += 1;
            let a = siteselect(&args[1..]).unwrap_or_default();
            let b = siteselect(&args[1..]).unwrap_or_default();
            if a != b || (code == 0 && a != first) {
                violations.push(format!("profile {i}: binary JSON output not byte-identical"));
            }
        }
    }
    check(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;
    Ok(format!(
        "500 profiles ({rejected} inconsistent, rejected), 0 violations; JSON byte-identical ({via_binary} via binary)"
    ))
}

// -- 5. statistics oracles -----------------------------------------------------

fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

fn enumerated_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let ranks: Vec<f64> = pooled
        .iter()
        .map(|v| {
            let below = pooled.iter().filter(|w| *w < v).count() as f64;
            let equal = pooled.iter().filter(|w| *w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let centre = a.len() as f64 * (n as f64 + 1.0) / 2.0;
    let observed = (ranks[..a.len()].iter().sum::<f64>() - centre).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == a.len() {
            total += 1;
            let sum: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
            hits += u64::from((sum - centre).abs() >= observed);
        }
    }
    hits as f64 / total as f64
}

/// Largest |exact − approximate| p over random continuous samples of
/// total size 12 split `n1`/`12 − n1`.
fn approximation_gap(rng: &mut ChaCha8Rng, n1: usize, samples: usize) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let values: Vec<f64> = (0..12).map(|_| rng.random_range(-1000.0..1000.0)).collect();
        let (a, b) = values.split_at(n1);
        let exact = wilcoxon_rank_sum_with(a, b, RankSumMode::Exact).map_err(|e| e.to_string())?;
        let approx = wilcoxon_rank_sum_with(a, b, RankSumMode::NormalApproximation).map_err(|e| e.to_string())?;
        worst = worst.max((exact.p_value - approx.p_value).abs());
    }
    Ok(worst)
}

fn statistics_oracles(unbalanced_gap: &mut f64) -> Result<String, String> {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    let mut worst_r = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..=100);
        let x: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(-1000..=1000))).collect();
        let y: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(-1000..=1000))).collect();
        let r = pearson(&x, &y).map_err(|e| e.to_string())?;
        worst_r = worst_r.max((r - pearson_oracle(&x, &y)).abs());
    }
    check(worst_r <= 1e-12, || format!("pearson off by {worst_r:e}"))?;

    let c = synthetic_country(&SyntheticConfig::default());
    let snapshot = c.dataset.snapshot();
    let sites = select_sites(&snapshot, Some("Municipality"), None).map_err(|e| e.to_string())?;
    let index = IndexFactors::default();
    let ctx = ValueContext::new(&snapshot, &c.dataset.presence, 2016, &index);
    let mut attrs: Vec<Attribute> = snapshot.factors().iter().map(|f| Attribute::factor(&f.id, &f.id)).collect();
    attrs.extend(c.dataset.presence.iter().map(|p| Attribute::presence(&p.label, &p.label)));
    attrs.push(Attribute {
        label: "ppi".into(),
        source: ValueSource::PurchasingPowerIndex,
    });
    let m = correlation_matrix(&ctx, &attrs, &sites).map_err(|e| e.to_string())?;
    for i in 0..attrs.len() {
        check(m.coefficients[i][i] == Some(1.0), || format!("diagonal at {}", attrs[i].label))?;
        for j in 0..attrs.len() {
            check(m.coefficients[i][j] == m.coefficients[j][i], || "matrix not symmetric".into())?;
        }
    }

    // every split with n1 + n2 <= 10, tie-heavy samples
    let mut exact_cases = 0;
    for total in 2..=10usize {
        for n1 in 1..total {
            for _ in 0..25 {
                let a: Vec<f64> = (0..n1).map(|_| f64::from(rng.random_range(0..6))).collect();
                let b: Vec<f64> = (0..total - n1).map(|_| f64::from(rng.random_range(0..6))).collect();
                let res = wilcoxon_rank_sum(&a, &b).map_err(|e| e.to_string())?;
                check(res.mode == RankSumMode::Exact, || "exact mode not chosen".into())?;
                let oracle = enumerated_p(&a, &b);
                check(res.p_value == oracle, || format!("exact p {} vs enumeration {oracle} for {a:?} {b:?}", res.p_value))?;
                exact_cases += 1;
            }
        }
    }

    let mut balanced_gap = 0.0f64;
    for n1 in 4..=8 {
        balanced_gap = balanced_gap.max(approximation_gap(&mut rng, n1, 400)?);
    }
    check(balanced_gap <= 0.02, || format!("approximation off by {balanced_gap:.4} at N = 12"))?;
    for n1 in [1, 2, 3, 9, 10, 11] {
        *unbalanced_gap = unbalanced_gap.max(approximation_gap(&mut rng, n1, 400)?);
    }
    within(t.elapsed(), Duration::from_secs(30), "statistics suite")?;
    Ok(format!(
        "pearson max |Δ| {worst_r:.1e}; matrix {0}x{0} symmetric, unit diagonal; exact = enumeration in {exact_cases} cases; \
         N = 12 splits 4/8..8/4 max |Δp| {balanced_gap:.4}",
        attrs.len()
    ))
}

// -- 6. correlation structure ------------------------------------------------

fn correlation_study() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = String::from_utf8_lossy(&siteselect(&["generate", "--out", s(dir.path())])?).trim().to_owned();
    let csv = String::from_utf8(siteselect(&[
        "correlate",
        "--manifest",
        &manifest,
        "--attr",
        &format!("count=chain:{PROPORTIONAL_CHAIN}"),
        "--attr",
        "inhabitants=factor:inhabitants",
        "--attr",
        &format!("random=factor:{RANDOM_INDEX}"),
    ])?)
    .map_err(|e| e.to_string())?;
    let row: Vec<&str> = csv.lines().nth(1).ok_or("empty matrix")?.split(',').collect();
    let parse = |i: usize| row.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or(format!("bad matrix row {row:?}"));
    let (r_inh, r_rand) = (parse(2)?, parse(3)?);
    check(r_inh > 0.95, || format!("corr(count, inhabitants) = {r_inh:.4}"))?;
    check(r_rand.abs() < 0.3, || format!("corr(count, random) = {r_rand:.4}"))?;
    Ok(format!("corr(count, inhabitants) = {r_inh:.4}, corr(count, random) = {r_rand:.4}"))
}

// -- 7. significance of the purchasing-power shift ----------------------------

fn significance() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = String::from_utf8_lossy(&siteselect(&["generate", "--out", s(dir.path())])?).trim().to_owned();
    let report = json(&siteselect(&["profile", "--manifest", &manifest, "--test", DISCOUNT_CHAIN, "--format", "json"])?)?;
    let test = &report["tests"][0];
    let p = test["test"]["p_value"].as_f64().ok_or("no p-value")?;
    check(p < 0.05, || format!("p = {p}"))?;

    // the printed group means are the module's
    let c = synthetic_country(&SyntheticConfig::default());
    let snapshot = c.dataset.snapshot();
    let sites = select_sites(&snapshot, Some("Municipality"), None).map_err(|e| e.to_string())?;
    let groups = chain_profile(&snapshot, &sites, &c.dataset.presence, 2016, &ProfileFactors::default())
        .map_err(|e| e.to_string())?;
    let mean = |name: &str| groups.iter().find(|g| g.group == name).and_then(|g| g.mean_purchasing_power_index);
    let discount = mean(DISCOUNT_CHAIN).ok_or("no discount group")?;
    let all = mean("all").ok_or("no overall group")?;
    check(discount < all, || format!("discount mean {discount:.2} not below overall {all:.2}"))?;
    let printed = report["chains"].as_array().ok_or("no groups")?;
    check(printed.len() == groups.len(), || "group count".into())?;
    Ok(format!(
        "{DISCOUNT_CHAIN} index {discount:.2} vs all {all:.2}; rank-sum z = {:.2}, p = {p:.2e}",
        test["test"]["z"].as_f64().unwrap_or(f64::NAN)
    ))
}

type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Result<String, String> + 'a>);

fn main() {
    let mut unbalanced_gap = 0.0;
    let criteria: Vec<Criterion> = vec![
        ("published classification counts (Lidl, NP, E-Center)", Box::new(case_study_counts)),
        ("synthetic country end to end", Box::new(synthetic_end_to_end)),
        ("hierarchy invariants on 1000 random forests", Box::new(hierarchy_invariants)),
        ("engine invariants on 500 random profiles", Box::new(engine_invariants)),
        ("statistics oracles", Box::new(|| statistics_oracles(&mut unbalanced_gap))),
        ("correlation structure", Box::new(correlation_study)),
        ("significance of the purchasing-power shift", Box::new(significance)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let elapsed = t.elapsed();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({elapsed:.2?})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why} ({elapsed:.2?})", i + 1);
            }
        }
    }
    println!(
        "KNOWN DEVIATION [5] normal approximation at N = 12 with a split below 4/8: max |Δp| {unbalanced_gap:.4} \
         (exact mode covers N <= 12)"
    );
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
