//! Per-site attribute extraction and the analyses built on it: correlation
//! matrices, population buckets, group profiles and group rank-sum tests.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{pearson, wilcoxon_rank_sum, RankSumResult};
use super::{AnalysisError, PresenceSet};
use crate::hierarchy::SiteId;
use crate::snapshot::{IndexFactors, Snapshot};

pub const UNEMPLOYMENT_RATE: &str = "unemployment_rate";

/// Default population bucket bounds on inhabitants.
pub const DEFAULT_BUCKETS: [f64; 5] = [0.0, 2500.0, 5000.0, 10000.0, f64::INFINITY];

/// Where a per-site value comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ValueSource {
    Factor { factor: String },
    /// Store count of a chain; sites without a store count 0.
    Presence { chain: String },
    PurchasingPowerIndex,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub label: String,
    #[serde(flatten)]
    pub source: ValueSource,
}

impl Attribute {
    pub fn factor(label: impl Into<String>, factor: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            source: ValueSource::Factor { factor: factor.into() },
        }
    }

    pub fn presence(label: impl Into<String>, chain: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            source: ValueSource::Presence { chain: chain.into() },
        }
    }
}

/// Everything needed to turn a [`ValueSource`] into numbers.
#[derive(Debug, Clone, Copy)]
pub struct ValueContext<'a> {
    pub snapshot: &'a Snapshot,
    pub presence: &'a [PresenceSet],
    pub year: i32,
    pub index: &'a IndexFactors,
}

impl<'a> ValueContext<'a> {
    pub fn new(snapshot: &'a Snapshot, presence: &'a [PresenceSet], year: i32, index: &'a IndexFactors) -> Self {
        Self {
            snapshot,
            presence,
            year,
            index,
        }
    }

    fn chain(&self, label: &str) -> Result<&'a PresenceSet, AnalysisError> {
        self.presence
            .iter()
            .find(|p| p.label == label)
            .ok_or_else(|| AnalysisError::UnknownChain(label.to_owned()))
    }

    fn require_factor(&self, id: &str) -> Result<(), AnalysisError> {
        match self.snapshot.factor(id) {
            Some(_) => Ok(()),
            None => Err(AnalysisError::UnknownFactor(id.to_owned())),
        }
    }

    /// Values of `source` at each site; `None` where unresolvable.
    pub fn values(&self, source: &ValueSource, sites: &[String]) -> Result<Vec<Option<f64>>, AnalysisError> {
        let h = self.snapshot.hierarchy();
        if let Some(unknown) = sites.iter().find(|s| !h.contains(s)) {
            return Err(AnalysisError::UnknownSite(unknown.clone()));
        }
        match source {
            ValueSource::Factor { factor } => {
                let idx = self
                    .snapshot
                    .factor_idx(factor)
                    .map_err(|_| AnalysisError::UnknownFactor(factor.clone()))?;
                Ok(sites
                    .iter()
                    .map(|s| self.snapshot.resolve_id(h.id(s).expect("checked"), idx, self.year))
                    .collect())
            }
            ValueSource::Presence { chain } => {
                let set = self.chain(chain)?;
                Ok(sites.iter().map(|s| Some(f64::from(set.count(s)))).collect())
            }
            ValueSource::PurchasingPowerIndex => {
                self.require_factor(&self.index.purchasing_power)?;
                self.require_factor(&self.index.inhabitants)?;
                let national = self.snapshot.national_per_capita(self.year, self.index)?;
                Ok(sites
                    .iter()
                    .map(|s| {
                        self.snapshot
                            .per_capita(s, self.year, self.index)
                            .ok()
                            .map(|v| 100.0 * v / national)
                    })
                    .collect())
            }
        }
    }
}

/// Site codes at `level` (all levels when `None`), optionally restricted to
/// the subtree under `under`, in hierarchy order.
pub fn select_sites(snapshot: &Snapshot, level: Option<&str>, under: Option<&str>) -> Result<Vec<String>, AnalysisError> {
    let h = snapshot.hierarchy();
    let level = match level {
        Some(name) => Some(
            h.levels()
                .by_name(name)
                .ok_or_else(|| AnalysisError::UnknownLevel(name.to_owned()))?,
        ),
        None => None,
    };
    let root: Option<SiteId> = match under {
        Some(code) => Some(h.id(code).ok_or_else(|| AnalysisError::UnknownSite(code.to_owned()))?),
        None => None,
    };
    Ok(h
        .ids()
        .filter(|id| level.is_none_or(|l| h.site(*id).level == l))
        .filter(|id| root.is_none_or(|r| h.is_within(*id, r)))
        .map(|id| h.site(id).code.clone())
        .collect())
}

/// Symmetric matrix of pairwise-complete Pearson coefficients. `None`
/// marks pairs where the coefficient is undefined (zero variance or fewer
/// than two common sites).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub coefficients: Vec<Vec<Option<f64>>>,
    /// Number of sites with both values resolvable, per pair.
    pub observations: Vec<Vec<usize>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        self.coefficients[i][j]
    }

    /// CSV with a header row of labels; undefined entries as `NaN`.
    pub fn to_csv(&self, decimals: Option<usize>) -> String {
        let fmt = |v: Option<f64>| match (v, decimals) {
            (None, _) => "NaN".to_owned(),
            (Some(x), Some(d)) => format!("{x:.d$}"),
            (Some(x), None) => format!("{x}"),
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::from("attribute")];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (label, row) in self.labels.iter().zip(&self.coefficients) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|v| fmt(*v)));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }
}

fn pairwise(a: &[Option<f64>], b: &[Option<f64>]) -> (Option<f64>, usize) {
    let (xs, ys): (Vec<f64>, Vec<f64>) = a.iter().zip(b).filter_map(|(x, y)| Some(((*x)?, (*y)?))).unzip();
    (pearson(&xs, &ys).ok(), xs.len())
}

pub fn correlation_matrix(
    ctx: &ValueContext<'_>,
    attributes: &[Attribute],
    sites: &[String],
) -> Result<CorrelationMatrix, AnalysisError> {
    if attributes.len() < 2 {
        return Err(AnalysisError::TooFewAttributes(attributes.len()));
    }
    if sites.len() < 2 {
        return Err(AnalysisError::TooFewSites(sites.len()));
    }
    let columns = attributes
        .iter()
        .map(|a| ctx.values(&a.source, sites))
        .collect::<Result<Vec<_>, _>>()?;
    let n = attributes.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let cells: Vec<_> = pairs
        .par_iter()
        .map(|&(i, j)| (i, j, pairwise(&columns[i], &columns[j])))
        .collect();
    let mut coefficients = vec![vec![None; n]; n];
    let mut observations = vec![vec![0; n]; n];
    for (i, j, (r, count)) in cells {
        // self-correlation is exactly 1 whenever it is defined at all
        let r = if i == j { r.map(|_| 1.0) } else { r };
        coefficients[i][j] = r;
        coefficients[j][i] = r;
        observations[i][j] = count;
        observations[j][i] = count;
    }
    Ok(CorrelationMatrix {
        labels: attributes.iter().map(|a| a.label.clone()).collect(),
        coefficients,
        observations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bucket {
    pub lo: f64,
    /// Exclusive; infinite for the open-ended top bucket.
    pub hi: f64,
    pub count: usize,
    /// Sites in the bucket whose value resolved.
    pub resolved: usize,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketStats {
    pub buckets: Vec<Bucket>,
    /// Sites whose inhabitants are unresolvable or outside all buckets.
    pub unassigned: Vec<String>,
}

impl BucketStats {
    pub fn assigned(&self) -> usize {
        self.buckets.iter().map(|b| b.count).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lo,hi,count,resolved,mean\n");
        for b in &self.buckets {
            let hi = if b.hi.is_infinite() { "inf".to_owned() } else { b.hi.to_string() };
            let mean = b.mean.map_or_else(String::new, |m| m.to_string());
            let _ = writeln!(out, "{},{hi},{},{},{mean}", b.lo, b.count, b.resolved);
        }
        out
    }
}

/// Groups `sites` into half-open inhabitant buckets `[bounds[i], bounds[i+1])`
/// and averages `value` per bucket.
pub fn bucket_stats(
    ctx: &ValueContext<'_>,
    sites: &[String],
    bounds: &[f64],
    value: &ValueSource,
) -> Result<BucketStats, AnalysisError> {
    if bounds.len() < 2 {
        return Err(AnalysisError::InvalidBuckets("need at least two bounds".into()));
    }
    if bounds.iter().any(|b| b.is_nan()) || bounds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::InvalidBuckets("bounds must be strictly increasing".into()));
    }
    let inhabitants = ctx.values(
        &ValueSource::Factor {
            factor: ctx.index.inhabitants.clone(),
        },
        sites,
    )?;
    let values = ctx.values(value, sites)?;
    let mut sums = vec![(0usize, 0usize, 0.0f64); bounds.len() - 1];
    let mut unassigned = Vec::new();
    for ((site, inh), v) in sites.iter().zip(inhabitants).zip(values) {
        let slot = inh.and_then(|x| bounds.windows(2).position(|w| w[0] <= x && x < w[1]));
        match slot {
            Some(k) => {
                sums[k].0 += 1;
                if let Some(v) = v {
                    sums[k].1 += 1;
                    sums[k].2 += v;
                }
            }
            None => unassigned.push(site.clone()),
        }
    }
    let buckets = bounds
        .windows(2)
        .zip(sums)
        .map(|(w, (count, resolved, sum))| Bucket {
            lo: w[0],
            hi: w[1],
            count,
            resolved,
            mean: (resolved > 0).then(|| sum / resolved as f64),
        })
        .collect();
    Ok(BucketStats { buckets, unassigned })
}

/// A set of sites defined relative to the presence data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "group", rename_all = "snake_case")]
pub enum GroupSelector {
    Chain { chain: String },
    NotChain { chain: String },
    AnyChain,
    NoChain,
    All,
    Sites { sites: Vec<String> },
}

impl GroupSelector {
    pub fn label(&self) -> String {
        match self {
            GroupSelector::Chain { chain } => chain.clone(),
            GroupSelector::NotChain { chain } => format!("not {chain}"),
            GroupSelector::AnyChain => "any chain".into(),
            GroupSelector::NoChain => "no chain".into(),
            GroupSelector::All => "all".into(),
            GroupSelector::Sites { .. } => "sites".into(),
        }
    }

    /// Members of `universe` selected by this group, in universe order.
    pub fn select(&self, universe: &[String], presence: &[PresenceSet]) -> Result<Vec<String>, AnalysisError> {
        let chain = |label: &str| {
            presence
                .iter()
                .find(|p| p.label == label)
                .ok_or_else(|| AnalysisError::UnknownChain(label.to_owned()))
        };
        let any = |s: &str| presence.iter().any(|p| p.contains(s));
        let keep: Box<dyn Fn(&str) -> bool> = match self {
            GroupSelector::Chain { chain: c } => {
                let set = chain(c)?;
                Box::new(move |s| set.contains(s))
            }
            GroupSelector::NotChain { chain: c } => {
                let set = chain(c)?;
                Box::new(move |s| !set.contains(s))
            }
            GroupSelector::AnyChain => Box::new(any),
            GroupSelector::NoChain => Box::new(move |s| !any(s)),
            GroupSelector::All => Box::new(|_| true),
            GroupSelector::Sites { sites } => {
                let wanted: BTreeSet<&str> = sites.iter().map(String::as_str).collect();
                Box::new(move |s| wanted.contains(s))
            }
        };
        Ok(universe.iter().filter(|s| keep(s)).cloned().collect())
    }
}

/// Resolvable values of `source` over the sites a group selects.
pub fn group_values(
    ctx: &ValueContext<'_>,
    universe: &[String],
    group: &GroupSelector,
    source: &ValueSource,
) -> Result<Vec<f64>, AnalysisError> {
    let sites = group.select(universe, ctx.presence)?;
    Ok(ctx.values(source, &sites)?.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRankSum {
    pub first: String,
    pub second: String,
    pub first_mean: f64,
    pub second_mean: f64,
    pub test: RankSumResult,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Wilcoxon rank-sum test of `source` between two groups of sites.
pub fn rank_sum_groups(
    ctx: &ValueContext<'_>,
    universe: &[String],
    first: &GroupSelector,
    second: &GroupSelector,
    source: &ValueSource,
) -> Result<GroupRankSum, AnalysisError> {
    let a = group_values(ctx, universe, first, source)?;
    let b = group_values(ctx, universe, second, source)?;
    let first_mean = mean(&a).ok_or_else(|| AnalysisError::EmptyGroup(first.label()))?;
    let second_mean = mean(&b).ok_or_else(|| AnalysisError::EmptyGroup(second.label()))?;
    Ok(GroupRankSum {
        first: first.label(),
        second: second.label(),
        first_mean,
        second_mean,
        test: wilcoxon_rank_sum(&a, &b)?,
    })
}

/// Factor ids used by [`chain_profile`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileFactors {
    pub index: IndexFactors,
    pub unemployment: String,
}

impl Default for ProfileFactors {
    fn default() -> Self {
        Self {
            index: IndexFactors::default(),
            unemployment: UNEMPLOYMENT_RATE.to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupProfile {
    pub group: String,
    pub sites: usize,
    pub mean_purchasing_power_index: Option<f64>,
    pub mean_unemployment_rate: Option<f64>,
}

/// Mean purchasing-power index and unemployment rate for every chain, for
/// sites with any store, for sites with none, and for all sites.
pub fn chain_profile(
    snapshot: &Snapshot,
    sites: &[String],
    chains: &[PresenceSet],
    year: i32,
    factors: &ProfileFactors,
) -> Result<Vec<GroupProfile>, AnalysisError> {
    let ctx = ValueContext::new(snapshot, chains, year, &factors.index);
    let index = ctx.values(&ValueSource::PurchasingPowerIndex, sites)?;
    let unemployment = ctx.values(
        &ValueSource::Factor {
            factor: factors.unemployment.clone(),
        },
        sites,
    )?;
    let mut groups: Vec<GroupSelector> = chains
        .iter()
        .map(|c| GroupSelector::Chain { chain: c.label.clone() })
        .collect();
    groups.extend([GroupSelector::AnyChain, GroupSelector::NoChain, GroupSelector::All]);
    groups
        .iter()
        .map(|g| {
            let members: BTreeSet<String> = g.select(sites, chains)?.into_iter().collect();
            let pick = |col: &[Option<f64>]| {
                let xs: Vec<f64> = sites
                    .iter()
                    .zip(col)
                    .filter(|(s, _)| members.contains(*s))
                    .filter_map(|(_, v)| *v)
                    .collect();
                mean(&xs)
            };
            Ok(GroupProfile {
                group: g.label(),
                sites: members.len(),
                mean_purchasing_power_index: pick(&index),
                mean_unemployment_rate: pick(&unemployment),
            })
        })
        .collect()
}
