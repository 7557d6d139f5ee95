//! Seeded synthetic datasets: a small generated country with three store
//! chains, and per-chain datasets that encode published case-study counts.
//!
//! Every dataset can be written to a directory in the ingest formats
//! (manifest, hierarchy, factor files, stores file, profiles).

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::analysis::{PresenceSet, UNEMPLOYMENT_RATE};
use crate::hierarchy::{Hierarchy, Level, Levels, SiteRecord};
use crate::ingest::{serialize_factor_values, serialize_hierarchy, serialize_presence, DatasetManifest, FactorDescriptor};
use crate::snapshot::{Aggregation, FactorValue, LocationFactor, Snapshot, SnapshotBuilder, INHABITANTS, PURCHASING_POWER};
use crate::urp::{Comparator, Criterion, MembershipFunction, RatingTerm, Urp};

pub const YEAR: i32 = 2016;
pub const LEVELS: [&str; 4] = ["Nation", "State", "District", "Municipality"];
pub const RANDOM_INDEX: &str = "random_index";

/// Chain names of the synthetic country.
pub const THRESHOLD_CHAIN: &str = "Alpha";
pub const PROPORTIONAL_CHAIN: &str = "Beta";
pub const DISCOUNT_CHAIN: &str = "Gamma";

/// An in-memory dataset: hierarchy, factor observations, store presence
/// and requirement profiles keyed by chain.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub levels: Vec<String>,
    pub records: Vec<SiteRecord>,
    pub factors: Vec<(FactorDescriptor, Vec<FactorValue>)>,
    pub presence: Vec<PresenceSet>,
    pub profiles: Vec<(String, Urp)>,
}

impl Dataset {
    pub fn hierarchy(&self) -> Hierarchy {
        let levels = Levels::new(self.levels.clone()).expect("fixture levels are valid");
        Hierarchy::build(levels, self.records.clone()).expect("fixture hierarchy is valid")
    }

    pub fn snapshot(&self) -> Snapshot {
        let h = self.hierarchy();
        let levels = h.levels().clone();
        let mut b = SnapshotBuilder::new(h);
        for (d, values) in &self.factors {
            b.register_factor(LocationFactor {
                id: d.id.clone(),
                name: d.name.clone(),
                unit: d.unit.clone(),
                native_level: levels.by_name(&d.native_level).expect("fixture level"),
                aggregation: d.aggregation,
            })
            .expect("distinct fixture factors");
            for v in values {
                b.insert(v).expect("fixture values are valid");
            }
        }
        b.freeze()
    }

    pub fn values(&self, factor: &str) -> &[FactorValue] {
        self.factors
            .iter()
            .find(|(d, _)| d.id == factor)
            .map(|(_, v)| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn presence(&self, chain: &str) -> Option<&PresenceSet> {
        self.presence.iter().find(|p| p.label == chain)
    }

    pub fn profile(&self, chain: &str) -> Option<&Urp> {
        self.profiles.iter().find(|(c, _)| c == chain).map(|(_, u)| u)
    }

    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest {
            hierarchy: PathBuf::from("hierarchy.csv"),
            levels: self.levels.clone(),
            factors: self.factors.iter().map(|(d, _)| d.clone()).collect(),
            year_range: None,
            stores: Some(PathBuf::from("stores.csv")),
            base_dir: PathBuf::new(),
        }
    }

    /// Writes `manifest.json`, `hierarchy.csv`, one CSV per factor,
    /// `stores.csv` and `profiles/<chain>.json`; returns the manifest path.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> io::Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("profiles"))?;
        let levels = Levels::new(self.levels.clone()).expect("fixture levels are valid");
        fs::write(dir.join("hierarchy.csv"), serialize_hierarchy(&self.records, &levels))?;
        for (d, values) in &self.factors {
            fs::write(dir.join(&d.file), serialize_factor_values(values))?;
        }
        fs::write(dir.join("stores.csv"), serialize_presence(&self.presence))?;
        for (chain, urp) in &self.profiles {
            fs::write(dir.join("profiles").join(format!("{}.json", chain.to_lowercase())), urp.to_json())?;
        }
        let manifest = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        fs::write(&manifest, text)?;
        Ok(manifest)
    }
}

fn descriptor(id: &str, name: &str, unit: &str, level: &str, aggregation: Aggregation) -> FactorDescriptor {
    FactorDescriptor {
        id: id.into(),
        name: name.into(),
        unit: unit.into(),
        file: PathBuf::from(format!("{id}.csv")),
        native_level: level.into(),
        aggregation,
    }
}

fn observation(site: &str, factor: &str, value: f64) -> FactorValue {
    FactorValue {
        site_code: site.into(),
        factor_id: factor.into(),
        year: YEAR,
        value,
    }
}

/// Nation `N`, states `S1..`, districts `D01..` and municipalities `M0001..`
/// spread as evenly as possible over the districts.
fn tree(states: usize, districts_per_state: usize, municipalities: usize) -> (Vec<SiteRecord>, Vec<String>, Vec<String>) {
    let mut records = vec![SiteRecord::new("N", "Nation", Level(0), None)];
    let mut district_codes = Vec::new();
    for s in 1..=states {
        let state = format!("S{s}");
        records.push(SiteRecord::new(state.as_str(), format!("State {s}"), Level(1), Some("N")));
        for d in 0..districts_per_state {
            let n = (s - 1) * districts_per_state + d + 1;
            let code = format!("D{n:02}");
            records.push(SiteRecord::new(code.as_str(), format!("District {n}"), Level(2), Some(&state)));
            district_codes.push(code);
        }
    }
    let per = municipalities / district_codes.len();
    let extra = municipalities % district_codes.len();
    let mut muni_codes = Vec::with_capacity(municipalities);
    for (k, district) in district_codes.iter().enumerate() {
        let count = per + usize::from(k < extra);
        for _ in 0..count {
            let n = muni_codes.len() + 1;
            let code = format!("M{n:04}");
            records.push(SiteRecord::new(code.as_str(), format!("Municipality {n}"), Level(3), Some(district)));
            muni_codes.push(code);
        }
    }
    (records, district_codes, muni_codes)
}

fn state_codes(states: usize) -> Vec<String> {
    (1..=states).map(|s| format!("S{s}")).collect()
}

/// Shape of the generated country.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub states: usize,
    pub districts_per_state: usize,
    pub municipalities: usize,
    /// Inhabitant threshold of the threshold chain.
    pub threshold: f64,
    /// Share of fulfilling sites that get a threshold-chain store.
    pub hit_rate: f64,
    /// Share of non-fulfilling sites that get one anyway.
    pub noise_rate: f64,
    /// Inhabitants per store of the proportional chain.
    pub inhabitants_per_store: f64,
    /// Number of discount-chain sites.
    pub discount_sites: usize,
    /// Mean and standard deviation of purchasing power per inhabitant.
    pub per_capita_mean: f64,
    pub per_capita_sd: f64,
    /// Downward shift of discount-chain sites, in standard deviations.
    pub discount_shift: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            states: 3,
            districts_per_state: 4,
            municipalities: 200,
            threshold: 5000.0,
            hit_rate: 0.9,
            noise_rate: 0.1,
            inhabitants_per_store: 1500.0,
            discount_sites: 60,
            per_capita_mean: 22_000.0,
            per_capita_sd: 2_000.0,
            discount_shift: 2.0,
        }
    }
}

impl SyntheticConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Generated country plus the construction facts tests compare against.
#[derive(Debug, Clone)]
pub struct SyntheticCountry {
    pub config: SyntheticConfig,
    pub dataset: Dataset,
    pub municipalities: Vec<String>,
    /// Inhabitants per municipality, parallel to `municipalities`.
    pub inhabitants: Vec<f64>,
    /// Purchasing power per inhabitant, parallel to `municipalities`.
    pub per_capita: Vec<f64>,
}

impl SyntheticCountry {
    /// Overlap (percent) the threshold-chain placement rule is built to
    /// produce in expectation: hits over all stores.
    pub fn expected_threshold_overlap(&self) -> f64 {
        let c = &self.config;
        let fulfilled = self.inhabitants.iter().filter(|v| **v >= c.threshold).count() as f64;
        let rest = self.inhabitants.len() as f64 - fulfilled;
        100.0 * c.hit_rate * fulfilled / (c.hit_rate * fulfilled + c.noise_rate * rest)
    }
}

/// Generates a country with three chains:
///
/// * threshold chain: a store at `hit_rate` of the sites with at least
///   `threshold` inhabitants and at `noise_rate` of the others (exact
///   quotas, random choice of sites);
/// * proportional chain: `round(inhabitants / inhabitants_per_store)`
///   stores per site;
/// * discount chain: one store at `discount_sites` random sites whose
///   purchasing power per inhabitant is drawn `discount_shift` standard
///   deviations below everyone else's.
///
/// Inhabitants are log-normal, unemployment is a district-level rate and
/// `random_index` is independent noise.
pub fn synthetic_country(config: &SyntheticConfig) -> SyntheticCountry {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (records, districts, munis) = tree(config.states, config.districts_per_state, config.municipalities);
    let n = munis.len();

    let size = LogNormal::new(config.threshold.ln() - 0.2, 0.9).expect("valid parameters");
    let inhabitants: Vec<f64> = (0..n).map(|_| size.sample(&mut rng).round().max(150.0)).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut discount = vec![false; n];
    for &i in order.iter().take(config.discount_sites.min(n)) {
        discount[i] = true;
    }
    let normal = Normal::new(config.per_capita_mean, config.per_capita_sd).expect("valid parameters");
    let shift = config.discount_shift * config.per_capita_sd;
    let per_capita: Vec<f64> = discount
        .iter()
        .map(|d| {
            let v = normal.sample(&mut rng) - if *d { shift } else { 0.0 };
            v.max(1000.0).round()
        })
        .collect();

    let mut inh_values = Vec::with_capacity(n);
    let mut pp_values = Vec::with_capacity(n);
    let mut random_values = Vec::with_capacity(n);
    for (i, code) in munis.iter().enumerate() {
        inh_values.push(observation(code, INHABITANTS, inhabitants[i]));
        pp_values.push(observation(code, PURCHASING_POWER, inhabitants[i] * per_capita[i]));
        random_values.push(observation(code, RANDOM_INDEX, (rng.random::<f64>() * 1000.0).round() / 10.0));
    }
    let unemployment: Vec<FactorValue> = districts
        .iter()
        .map(|d| observation(d, UNEMPLOYMENT_RATE, (rng.random_range(3.0..12.0f64) * 10.0).round() / 10.0))
        .collect();

    // threshold chain with exact quotas
    let (mut hit, mut miss): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| inhabitants[i] >= config.threshold);
    hit.shuffle(&mut rng);
    miss.shuffle(&mut rng);
    let hit_quota = (config.hit_rate * hit.len() as f64).round() as usize;
    let miss_quota = (config.noise_rate * miss.len() as f64).round() as usize;
    let mut threshold_chain = PresenceSet::new(THRESHOLD_CHAIN);
    for &i in hit.iter().take(hit_quota).chain(miss.iter().take(miss_quota)) {
        threshold_chain.add(munis[i].as_str(), 1);
    }

    let mut proportional = PresenceSet::new(PROPORTIONAL_CHAIN);
    for (code, inh) in munis.iter().zip(&inhabitants) {
        proportional.add(code.as_str(), (inh / config.inhabitants_per_store).round() as u32);
    }

    let mut discount_chain = PresenceSet::new(DISCOUNT_CHAIN);
    for (code, d) in munis.iter().zip(&discount) {
        if *d {
            discount_chain.add(code.as_str(), 1);
        }
    }

    let focus = state_codes(config.states);
    let threshold_profile = Urp {
        year: YEAR,
        target_level: "Municipality".into(),
        focus: focus.clone(),
        criteria: vec![Criterion::must_have(
            "inhabitants",
            INHABITANTS,
            Comparator::Ge(config.threshold),
        )],
    };
    let ramp = |zero, one| MembershipFunction::ramp(zero, one).expect("finite ramp");
    let supermarket = Urp {
        year: YEAR,
        target_level: "Municipality".into(),
        focus,
        criteria: vec![
            Criterion::must_have("inhabitants", INHABITANTS, Comparator::Ge(config.threshold)),
            Criterion::preference(
                "market size",
                2.0,
                vec![RatingTerm {
                    factor: INHABITANTS.into(),
                    weight: 1.0,
                    membership: ramp(config.threshold, 10.0 * config.threshold),
                }],
            ),
            Criterion::preference(
                "labour market",
                1.0,
                vec![RatingTerm {
                    factor: UNEMPLOYMENT_RATE.into(),
                    weight: 1.0,
                    membership: ramp(12.0, 3.0),
                }],
            ),
        ],
    };

    let dataset = Dataset {
        levels: LEVELS.map(String::from).to_vec(),
        records,
        factors: vec![
            (
                descriptor(INHABITANTS, "Number of inhabitants", "persons", "Municipality", Aggregation::Additive),
                inh_values,
            ),
            (
                descriptor(PURCHASING_POWER, "Purchasing power", "EUR", "Municipality", Aggregation::Additive),
                pp_values,
            ),
            (
                descriptor(UNEMPLOYMENT_RATE, "Unemployment rate", "%", "District", Aggregation::Intensive),
                unemployment,
            ),
            (
                descriptor(RANDOM_INDEX, "Random index", "", "Municipality", Aggregation::None),
                random_values,
            ),
        ],
        presence: vec![threshold_chain, proportional, discount_chain],
        profiles: vec![(THRESHOLD_CHAIN.into(), threshold_profile), ("supermarket".into(), supermarket)],
    };
    SyntheticCountry {
        config: config.clone(),
        dataset,
        municipalities: munis,
        inhabitants,
        per_capita,
    }
}

/// Plausible value range of each synthetic factor, for random profiles.
const FACTOR_RANGES: [(&str, f64, f64); 4] = [
    (INHABITANTS, 300.0, 30_000.0),
    (PURCHASING_POWER, 5.0e6, 6.0e8),
    (UNEMPLOYMENT_RATE, 3.0, 12.0),
    (RANDOM_INDEX, 0.0, 100.0),
];

fn random_comparator(rng: &mut impl Rng, lo: f64, hi: f64) -> Comparator {
    let mut t = || (rng.random_range(lo..hi) * 10.0).round() / 10.0;
    let (a, b) = (t(), t());
    match rng.random_range(0..5) {
        0 => Comparator::Ge(a),
        1 => Comparator::Gt(a),
        2 => Comparator::Le(a),
        3 => Comparator::Lt(a),
        _ => Comparator::Within(a.min(b), a.max(b)),
    }
}

/// A random profile over the synthetic country's factors: a non-empty focus
/// of states, districts or municipalities, up to three must-haves (possibly
/// conflicting) and up to three preferences with random ramps.
pub fn random_profile(rng: &mut impl Rng, country: &SyntheticCountry) -> Urp {
    let c = &country.config;
    let mut pool: Vec<String> = state_codes(c.states);
    pool.extend((1..=c.states * c.districts_per_state).map(|d| format!("D{d:02}")));
    let mut focus: Vec<String> = Vec::new();
    if rng.random_bool(0.3) {
        focus.push("N".into());
    }
    for _ in 0..rng.random_range(1..=3) {
        let code = if rng.random_bool(0.2) {
            country.municipalities[rng.random_range(0..country.municipalities.len())].clone()
        } else {
            pool[rng.random_range(0..pool.len())].clone()
        };
        if !focus.contains(&code) {
            focus.push(code);
        }
    }
    let mut criteria = Vec::new();
    for k in 0..rng.random_range(0..=3) {
        let (factor, lo, hi) = FACTOR_RANGES[rng.random_range(0..FACTOR_RANGES.len())];
        criteria.push(Criterion::must_have(format!("must {k}"), factor, random_comparator(rng, lo, hi)));
    }
    for k in 0..rng.random_range(0..=3) {
        let terms = (0..rng.random_range(1..=2))
            .map(|_| {
                let (factor, lo, hi) = FACTOR_RANGES[rng.random_range(0..FACTOR_RANGES.len())];
                let a = rng.random_range(lo..hi);
                let b = rng.random_range(lo..hi);
                RatingTerm {
                    factor: factor.into(),
                    weight: rng.random_range(0.1..5.0),
                    membership: MembershipFunction::ramp(a, if a == b { b + 1.0 } else { b }).expect("finite ramp"),
                }
            })
            .collect();
        criteria.push(Criterion::preference(format!("pref {k}"), rng.random_range(0.1..10.0), terms));
    }
    Urp {
        year: YEAR,
        target_level: "Municipality".into(),
        focus,
        criteria,
    }
}

/// Published per-chain classification counts of the supermarket case study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainCounts {
    pub chain: &'static str,
    pub comparator: Comparator,
    pub universe: usize,
    pub stores: usize,
    pub fulfilled: usize,
    pub intersection: usize,
}

impl ChainCounts {
    /// Cells (store & fulfilled, store only, fulfilled only, neither).
    pub fn cells(&self) -> (usize, usize, usize, usize) {
        let a = self.intersection;
        let b = self.stores - a;
        let c = self.fulfilled - a;
        (a, b, c, self.universe - a - b - c)
    }
}

pub const CASE_STUDY_MUNICIPALITIES: usize = 1704;

pub const CASE_STUDY: [ChainCounts; 4] = [
    ChainCounts {
        chain: "Edeka",
        comparator: Comparator::Ge(5000.0),
        universe: CASE_STUDY_MUNICIPALITIES,
        stores: 481,
        fulfilled: 634,
        intersection: 364,
    },
    ChainCounts {
        chain: "E-Center",
        comparator: Comparator::Gt(10000.0),
        universe: CASE_STUDY_MUNICIPALITIES,
        stores: 90,
        fulfilled: 383,
        intersection: 80,
    },
    ChainCounts {
        chain: "Lidl",
        comparator: Comparator::Ge(5000.0),
        universe: CASE_STUDY_MUNICIPALITIES,
        stores: 453,
        fulfilled: 840,
        intersection: 428,
    },
    // the fulfilled-column cells (224 + 599) sum to 823
    ChainCounts {
        chain: "NP",
        comparator: Comparator::Gt(2500.0),
        universe: CASE_STUDY_MUNICIPALITIES,
        stores: 256,
        fulfilled: 823,
        intersection: 224,
    },
];

pub fn case_study_counts(chain: &str) -> Option<ChainCounts> {
    CASE_STUDY.iter().copied().find(|c| c.chain.eq_ignore_ascii_case(chain))
}

fn threshold_of(c: Comparator) -> f64 {
    match c {
        Comparator::Ge(t) | Comparator::Gt(t) | Comparator::Le(t) | Comparator::Lt(t) => t,
        Comparator::Within(a, _) => a,
    }
}

/// A dataset of `counts.universe` municipalities in three states whose
/// inhabitants satisfy the chain's threshold at exactly `counts.fulfilled`
/// sites, with the chain's stores at exactly `counts.intersection` of those
/// and `counts.stores - counts.intersection` of the others.
pub fn case_study_dataset(counts: &ChainCounts, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (records, _, munis) = tree(3, 3, counts.universe);
    let t = threshold_of(counts.comparator);
    let mut order: Vec<usize> = (0..munis.len()).collect();
    order.shuffle(&mut rng);
    let (fulfilled, rest) = order.split_at(counts.fulfilled);

    let mut inhabitants = vec![0.0; munis.len()];
    for &i in fulfilled {
        inhabitants[i] = (t + 1.0 + rng.random::<f64>() * 9.0 * t).round();
    }
    for &i in rest {
        inhabitants[i] = (100.0 + rng.random::<f64>() * (t - 101.0)).round();
    }
    debug_assert!(fulfilled.iter().all(|&i| counts.comparator.holds(inhabitants[i])));
    debug_assert!(rest.iter().all(|&i| !counts.comparator.holds(inhabitants[i])));

    let mut stores = PresenceSet::new(counts.chain);
    let others = counts.stores - counts.intersection;
    for &i in fulfilled.iter().take(counts.intersection).chain(rest.iter().take(others)) {
        stores.add(munis[i].as_str(), 1);
    }

    let profile = Urp {
        year: YEAR,
        target_level: "Municipality".into(),
        focus: state_codes(3),
        criteria: vec![Criterion::must_have("inhabitants", INHABITANTS, counts.comparator)],
    };
    let values = munis
        .iter()
        .zip(&inhabitants)
        .map(|(c, v)| observation(c, INHABITANTS, *v))
        .collect();
    Dataset {
        levels: LEVELS.map(String::from).to_vec(),
        records,
        factors: vec![(
            descriptor(INHABITANTS, "Number of inhabitants", "persons", "Municipality", Aggregation::Additive),
            values,
        )],
        presence: vec![stores],
        profiles: vec![(counts.chain.to_owned(), profile)],
    }
}

/// A randomly shaped forest with one additive, one intensive and one
/// non-derived factor, for aggregation property checks.
#[derive(Debug, Clone)]
pub struct RandomForest {
    pub depth: usize,
    pub records: Vec<SiteRecord>,
    /// Native observations of the additive factor (mostly at the bottom
    /// level, a few inner totals); `plain` carries the same values.
    pub additive: BTreeMap<String, f64>,
    /// Native observations of the intensive factor at `intensive_level`.
    pub intensive: BTreeMap<String, f64>,
    pub intensive_level: usize,
}

pub const FOREST_YEAR: i32 = 2020;

impl RandomForest {
    pub fn snapshot(&self) -> Snapshot {
        let names: Vec<String> = (0..self.depth).map(|i| format!("L{i}")).collect();
        let levels = Levels::new(names).expect("distinct level names");
        let h = Hierarchy::build(levels, self.records.clone()).expect("generated forest is valid");
        let mut b = SnapshotBuilder::new(h);
        for (id, level, aggregation) in [
            ("additive", self.depth - 1, Aggregation::Additive),
            ("intensive", self.intensive_level, Aggregation::Intensive),
            ("plain", self.depth - 1, Aggregation::None),
        ] {
            b.register_factor(LocationFactor {
                id: id.into(),
                name: id.into(),
                unit: String::new(),
                native_level: Level(level),
                aggregation,
            })
            .expect("distinct factor ids");
        }
        for (factor, values) in [("additive", &self.additive), ("plain", &self.additive), ("intensive", &self.intensive)] {
            for (site, v) in values {
                b.insert(&FactorValue {
                    site_code: site.clone(),
                    factor_id: factor.into(),
                    year: FOREST_YEAR,
                    value: *v,
                })
                .expect("observation of a known site");
            }
        }
        b.freeze()
    }
}

/// 1–3 roots, 2–5 levels, 0–4 children per inner node; integer additive
/// values so sums are exact.
pub fn random_forest(seed: u64) -> RandomForest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(2..=5usize);
    let mut records = Vec::new();
    let mut frontier = Vec::new();
    for r in 0..rng.random_range(1..=3) {
        let code = format!("r{r}");
        records.push(SiteRecord::new(code.as_str(), code.as_str(), Level(0), None));
        frontier.push((code, 0usize));
    }
    while let Some((parent, level)) = frontier.pop() {
        if level + 1 == depth {
            continue;
        }
        // occasionally a childless inner node
        let n = if rng.random_bool(0.05) { 0 } else { rng.random_range(1..=4) };
        for k in 0..n {
            let code = format!("{parent}.{k}");
            records.push(SiteRecord::new(code.as_str(), code.as_str(), Level(level + 1), Some(&parent)));
            frontier.push((code, level + 1));
        }
    }
    let mut additive = BTreeMap::new();
    let mut intensive = BTreeMap::new();
    let intensive_level = rng.random_range(0..depth - 1);
    for r in &records {
        let bottom = r.level.0 == depth - 1;
        if (bottom && rng.random_bool(0.97)) || (!bottom && rng.random_bool(0.1)) {
            additive.insert(r.code.clone(), f64::from(rng.random_range(0..1_000_000u32)));
        }
        if r.level.0 == intensive_level && rng.random_bool(0.85) {
            intensive.insert(r.code.clone(), f64::from(rng.random_range(0..1000u32)) / 10.0);
        }
    }
    RandomForest {
        depth,
        records,
        additive,
        intensive,
        intensive_level,
    }
}
