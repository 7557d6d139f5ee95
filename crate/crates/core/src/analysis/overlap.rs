//! Store presence versus recommended sites: contingency tables, overlap
//! percentages and uncovered candidates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::snapshot::Snapshot;
use crate::urp::{candidates, evaluate_candidates, EliminationReason, Urp};

/// Where a chain operates: site code -> number of stores (always > 0).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresenceSet {
    pub label: String,
    pub counts: BTreeMap<String, u32>,
}

impl PresenceSet {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            counts: BTreeMap::new(),
        }
    }

    pub fn from_sites<I, S>(label: impl Into<String>, sites: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = Self::new(label);
        for s in sites {
            set.add(s, 1);
        }
        set
    }

    pub fn add(&mut self, site: impl Into<String>, stores: u32) {
        if stores > 0 {
            *self.counts.entry(site.into()).or_insert(0) += stores;
        }
    }

    pub fn contains(&self, site: &str) -> bool {
        self.counts.contains_key(site)
    }

    pub fn count(&self, site: &str) -> u32 {
        self.counts.get(site).copied().unwrap_or(0)
    }

    pub fn sites(&self) -> BTreeSet<String> {
        self.counts.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn restricted_to(&self, universe: &BTreeSet<String>) -> PresenceSet {
        PresenceSet {
            label: self.label.clone(),
            counts: self
                .counts
                .iter()
                .filter(|(k, _)| universe.contains(*k))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }
}

/// 2x2 cross-classification of store presence against criteria fulfilment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContingencyTable {
    pub label: String,
    pub store_fulfilled: usize,
    pub store_unfulfilled: usize,
    pub no_store_fulfilled: usize,
    pub no_store_unfulfilled: usize,
    pub universe: usize,
}

impl ContingencyTable {
    pub fn store_total(&self) -> usize {
        self.store_fulfilled + self.store_unfulfilled
    }

    pub fn no_store_total(&self) -> usize {
        self.no_store_fulfilled + self.no_store_unfulfilled
    }

    pub fn fulfilled_total(&self) -> usize {
        self.store_fulfilled + self.no_store_fulfilled
    }

    pub fn unfulfilled_total(&self) -> usize {
        self.store_unfulfilled + self.no_store_unfulfilled
    }
}

pub fn contingency(
    universe: &BTreeSet<String>,
    store_present: &PresenceSet,
    criteria_fulfilled: &BTreeSet<String>,
) -> Result<ContingencyTable, AnalysisError> {
    let outside = |site: &String| AnalysisError::SetNotInUniverse {
        set: store_present.label.clone(),
        site: site.clone(),
    };
    if let Some(site) = store_present.counts.keys().find(|s| !universe.contains(*s)) {
        return Err(outside(site));
    }
    if let Some(site) = criteria_fulfilled.iter().find(|s| !universe.contains(*s)) {
        return Err(AnalysisError::SetNotInUniverse {
            set: "criteria fulfilled".into(),
            site: site.clone(),
        });
    }
    let mut t = ContingencyTable {
        label: store_present.label.clone(),
        store_fulfilled: 0,
        store_unfulfilled: 0,
        no_store_fulfilled: 0,
        no_store_unfulfilled: 0,
        universe: universe.len(),
    };
    for site in universe {
        match (store_present.contains(site), criteria_fulfilled.contains(site)) {
            (true, true) => t.store_fulfilled += 1,
            (true, false) => t.store_unfulfilled += 1,
            (false, true) => t.no_store_fulfilled += 1,
            (false, false) => t.no_store_unfulfilled += 1,
        }
    }
    Ok(t)
}

/// Share of store sites that fulfil the criteria, in percent.
pub fn overlap_percentage(table: &ContingencyTable) -> Result<f64, AnalysisError> {
    if table.store_total() == 0 {
        return Err(AnalysisError::EmptyStoreSet(table.label.clone()));
    }
    Ok(100.0 * table.store_fulfilled as f64 / table.store_total() as f64)
}

/// Pooled overlap across several tables: all fulfilled store sites over all
/// store sites.
pub fn overall_overlap(tables: &[ContingencyTable]) -> Result<f64, AnalysisError> {
    let stores: usize = tables.iter().map(ContingencyTable::store_total).sum();
    if stores == 0 {
        return Err(AnalysisError::EmptyStoreSet("overall".into()));
    }
    let hits: usize = tables.iter().map(|t| t.store_fulfilled).sum();
    Ok(100.0 * hits as f64 / stores as f64)
}

/// Recommended sites with no store yet.
pub fn new_site_candidates(recommended: &BTreeSet<String>, any_store_present: &BTreeSet<String>) -> BTreeSet<String> {
    recommended.difference(any_store_present).cloned().collect()
}

/// Percentages as printed in reports.
pub fn display_percent(p: f64) -> String {
    format!("{p:.1}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainEvaluation {
    pub chain: String,
    pub table: ContingencyTable,
    pub overlap_percent: Option<f64>,
    pub recommended_total: usize,
    /// Recommended sites where no chain has a store.
    pub without_markets: usize,
    /// Stores outside the profile's candidate sites, ignored above.
    pub stores_outside_focus: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverallOverlap {
    pub stores: usize,
    pub recommended: usize,
    pub overlap_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EliminatedSite {
    pub site_code: String,
    pub reasons: Vec<EliminationReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub chains: Vec<ChainEvaluation>,
    pub overall: OverallOverlap,
    /// Union of recommended sites without any store, over all chains.
    pub new_sites: Vec<String>,
}

struct ProfileOutcome {
    universe: BTreeSet<String>,
    fulfilled: BTreeSet<String>,
    eliminated: Vec<EliminatedSite>,
}

fn run_profile(snapshot: &Snapshot, urp: &Urp) -> Result<ProfileOutcome, AnalysisError> {
    let h = snapshot.hierarchy();
    let universe: BTreeSet<String> = candidates(snapshot, urp)?
        .into_iter()
        .map(|id| h.site(id).code.clone())
        .collect();
    let mut fulfilled = BTreeSet::new();
    let mut eliminated = Vec::new();
    for rec in evaluate_candidates(snapshot, urp)? {
        if rec.eliminated {
            eliminated.push(EliminatedSite {
                site_code: rec.site_code,
                reasons: rec.elimination_reasons,
            });
        } else {
            fulfilled.insert(rec.site_code);
        }
    }
    Ok(ProfileOutcome {
        universe,
        fulfilled,
        eliminated,
    })
}

/// Sites a profile eliminates, with reasons.
pub fn eliminated_sites(snapshot: &Snapshot, urp: &Urp) -> Result<Vec<EliminatedSite>, AnalysisError> {
    Ok(run_profile(snapshot, urp)?.eliminated)
}

/// Compares each chain's stores with the sites recommended by that chain's
/// profile. `presence` supplies every chain; chains without a profile still
/// count as occupying their sites.
pub fn evaluate_chains(
    snapshot: &Snapshot,
    profiles: &[(String, Urp)],
    presence: &[PresenceSet],
) -> Result<EvaluationReport, AnalysisError> {
    let mut outcomes = Vec::with_capacity(profiles.len());
    for (chain, urp) in profiles {
        let set = presence
            .iter()
            .find(|p| &p.label == chain)
            .ok_or_else(|| AnalysisError::UnknownChain(chain.clone()))?;
        outcomes.push((set, run_profile(snapshot, urp)?));
    }

    let mut chains = Vec::with_capacity(outcomes.len());
    let mut tables = Vec::new();
    let mut recommended_hits = 0;
    let mut new_sites = BTreeSet::new();
    for (set, outcome) in &outcomes {
        let restricted = set.restricted_to(&outcome.universe);
        let occupied: BTreeSet<String> = presence
            .iter()
            .flat_map(|p| p.restricted_to(&outcome.universe).counts.into_keys())
            .collect();
        let table = contingency(&outcome.universe, &restricted, &outcome.fulfilled)?;
        let candidates = new_site_candidates(&outcome.fulfilled, &occupied);
        recommended_hits += table.store_fulfilled;
        chains.push(ChainEvaluation {
            chain: set.label.clone(),
            overlap_percent: overlap_percentage(&table).ok(),
            recommended_total: outcome.fulfilled.len(),
            without_markets: candidates.len(),
            stores_outside_focus: set.len() - restricted.len(),
            table: table.clone(),
        });
        new_sites.extend(candidates);
        tables.push(table);
    }
    Ok(EvaluationReport {
        overall: OverallOverlap {
            stores: tables.iter().map(ContingencyTable::store_total).sum(),
            recommended: recommended_hits,
            overlap_percent: overall_overlap(&tables).ok(),
        },
        chains,
        new_sites: new_sites.into_iter().collect(),
    })
}
