//! Factor store on top of a [`Hierarchy`], frozen into an immutable,
//! versioned [`Snapshot`].
//!
//! Values are stored only at the level where they were observed. Queries go
//! through [`Snapshot::resolve`], which derives missing values: additive
//! factors are summed up from children, intensive factors are copied down
//! from the nearest ancestor that carries a native value.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::hierarchy::{Hierarchy, Level, SiteId};

/// Factor id used for population counts unless configured otherwise.
pub const INHABITANTS: &str = "inhabitants";
/// Factor id used for (total) purchasing power unless configured otherwise.
pub const PURCHASING_POWER: &str = "purchasing_power";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Counts and totals: a parent equals the sum of its children.
    Additive,
    /// Rates and averages: children inherit the ancestor's value.
    Intensive,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocationFactor {
    pub id: String,
    pub name: String,
    pub unit: String,
    pub native_level: Level,
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorValue {
    pub site_code: String,
    pub factor_id: String,
    pub year: i32,
    pub value: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnapshotError {
    #[error("unknown site `{0}`")]
    UnknownSite(String),
    #[error("unknown factor `{0}`")]
    UnknownFactor(String),
    #[error("factor `{0}` is registered twice")]
    DuplicateFactor(String),
    #[error("duplicate observation for site `{site}`, factor `{factor}`, year {year}")]
    DuplicateObservation { site: String, factor: String, year: i32 },
    #[error("year {year} outside dataset bounds {from}..={to}")]
    YearOutOfRange { year: i32, from: i32, to: i32 },
    #[error("non-finite value {value} for site `{site}`, factor `{factor}`")]
    NonFinite { site: String, factor: String, value: f64 },
    #[error("factor `{factor}` cannot be resolved at the root level for year {year}")]
    UnresolvableAtRoot { factor: String, year: i32 },
    #[error("factor `{factor}` is not resolvable for site `{site}` in {year}")]
    MissingFactor { factor: String, site: String, year: i32 },
    #[error("national per-inhabitant average of `{0}` is zero")]
    ZeroNationalAverage(String),
}

/// Dense index of a registered factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FactorIdx(usize);

/// Mutable single-writer store used during ingestion.
#[derive(Debug)]
pub struct SnapshotBuilder {
    hierarchy: Hierarchy,
    year_range: Option<(i32, i32)>,
    factors: Vec<LocationFactor>,
    factor_index: HashMap<String, FactorIdx>,
    values: Vec<HashMap<(SiteId, i32), f64>>,
}

impl SnapshotBuilder {
    pub fn new(hierarchy: Hierarchy) -> Self {
        Self {
            hierarchy,
            year_range: None,
            factors: Vec::new(),
            factor_index: HashMap::new(),
            values: Vec::new(),
        }
    }

    pub fn with_year_range(mut self, from: i32, to: i32) -> Self {
        self.year_range = Some((from, to));
        self
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn register_factor(&mut self, factor: LocationFactor) -> Result<FactorIdx, SnapshotError> {
        if self.factor_index.contains_key(&factor.id) {
            return Err(SnapshotError::DuplicateFactor(factor.id));
        }
        let idx = FactorIdx(self.factors.len());
        self.factor_index.insert(factor.id.clone(), idx);
        self.factors.push(factor);
        self.values.push(HashMap::new());
        Ok(idx)
    }

    pub fn insert(&mut self, value: &FactorValue) -> Result<(), SnapshotError> {
        let site = self
            .hierarchy
            .id(&value.site_code)
            .ok_or_else(|| SnapshotError::UnknownSite(value.site_code.clone()))?;
        let factor = *self
            .factor_index
            .get(&value.factor_id)
            .ok_or_else(|| SnapshotError::UnknownFactor(value.factor_id.clone()))?;
        if let Some((from, to)) = self.year_range {
            if value.year < from || value.year > to {
                return Err(SnapshotError::YearOutOfRange {
                    year: value.year,
                    from,
                    to,
                });
            }
        }
        if !value.value.is_finite() {
            return Err(SnapshotError::NonFinite {
                site: value.site_code.clone(),
                factor: value.factor_id.clone(),
                value: value.value,
            });
        }
        let slot = &mut self.values[factor.0];
        if slot.contains_key(&(site, value.year)) {
            return Err(SnapshotError::DuplicateObservation {
                site: value.site_code.clone(),
                factor: value.factor_id.clone(),
                year: value.year,
            });
        }
        slot.insert((site, value.year), value.value);
        Ok(())
    }

    pub fn freeze(self) -> Snapshot {
        let version = content_hash(&self);
        Snapshot {
            hierarchy: self.hierarchy,
            year_range: self.year_range,
            factors: self.factors,
            factor_index: self.factor_index,
            values: self.values,
            version,
        }
    }
}

fn content_hash(b: &SnapshotBuilder) -> String {
    let mut h = Sha256::new();
    for name in b.hierarchy.levels().names() {
        h.update(name.as_bytes());
        h.update([0x1f]);
    }
    for site in b.hierarchy.sites() {
        h.update(site.code.as_bytes());
        h.update([0x1f]);
        h.update(site.name.as_bytes());
        h.update([0x1f]);
        h.update((site.level.0 as u64).to_le_bytes());
        h.update(site.parent_code.as_deref().unwrap_or("").as_bytes());
        h.update([0x1e]);
    }
    if let Some((from, to)) = b.year_range {
        h.update(from.to_le_bytes());
        h.update(to.to_le_bytes());
    }
    for (factor, values) in b.factors.iter().zip(&b.values) {
        h.update(factor.id.as_bytes());
        h.update([0x1f]);
        h.update(factor.name.as_bytes());
        h.update([0x1f]);
        h.update(factor.unit.as_bytes());
        h.update([0x1f]);
        h.update((factor.native_level.0 as u64).to_le_bytes());
        h.update([factor.aggregation as u8]);
        let mut entries: Vec<_> = values.iter().collect();
        entries.sort_by_key(|((site, year), _)| (*site, *year));
        for ((site, year), value) in entries {
            h.update((site.0 as u64).to_le_bytes());
            h.update(year.to_le_bytes());
            h.update(value.to_bits().to_le_bytes());
        }
        h.update([0x1e]);
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Factor ids used by the purchasing-power index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexFactors {
    /// Either a per-region total (additive) or a per-inhabitant figure
    /// (intensive); both are handled.
    pub purchasing_power: String,
    pub inhabitants: String,
}

impl Default for IndexFactors {
    fn default() -> Self {
        Self {
            purchasing_power: PURCHASING_POWER.to_owned(),
            inhabitants: INHABITANTS.to_owned(),
        }
    }
}

/// A native parent value that disagrees with the sum of its children.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdditiveMismatch {
    pub site_code: String,
    pub factor_id: String,
    pub year: i32,
    pub native: f64,
    pub children_sum: f64,
}

/// Immutable hierarchy + factor store. Cheap to share behind an `Arc`.
#[derive(Debug)]
pub struct Snapshot {
    hierarchy: Hierarchy,
    year_range: Option<(i32, i32)>,
    factors: Vec<LocationFactor>,
    factor_index: HashMap<String, FactorIdx>,
    values: Vec<HashMap<(SiteId, i32), f64>>,
    version: String,
}

impl Snapshot {
    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    /// Content hash of the snapshot; equal inputs give equal versions.
    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn year_range(&self) -> Option<(i32, i32)> {
        self.year_range
    }

    pub fn factors(&self) -> &[LocationFactor] {
        &self.factors
    }

    pub fn factor(&self, id: &str) -> Option<&LocationFactor> {
        self.factor_index.get(id).map(|idx| &self.factors[idx.0])
    }

    pub fn value_count(&self) -> usize {
        self.values.iter().map(HashMap::len).sum()
    }

    /// Years with at least one native observation of `factor_id`.
    pub fn years(&self, factor_id: &str) -> BTreeSet<i32> {
        self.factor_index
            .get(factor_id)
            .map(|idx| self.values[idx.0].keys().map(|(_, y)| *y).collect())
            .unwrap_or_default()
    }

    /// Latest year observed for any factor.
    pub fn latest_year(&self) -> Option<i32> {
        self.values.iter().flat_map(|v| v.keys().map(|(_, y)| *y)).max()
    }

    pub fn native(&self, site_code: &str, factor_id: &str, year: i32) -> Result<Option<f64>, SnapshotError> {
        let (site, factor) = self.lookup(site_code, factor_id)?;
        Ok(self.native_by_id(site, factor, year))
    }

    fn lookup(&self, site_code: &str, factor_id: &str) -> Result<(SiteId, FactorIdx), SnapshotError> {
        let site = self
            .hierarchy
            .id(site_code)
            .ok_or_else(|| SnapshotError::UnknownSite(site_code.to_owned()))?;
        let factor = self.factor_idx(factor_id)?;
        Ok((site, factor))
    }

    pub fn factor_idx(&self, factor_id: &str) -> Result<FactorIdx, SnapshotError> {
        self.factor_index
            .get(factor_id)
            .copied()
            .ok_or_else(|| SnapshotError::UnknownFactor(factor_id.to_owned()))
    }

    fn native_by_id(&self, site: SiteId, factor: FactorIdx, year: i32) -> Option<f64> {
        self.values[factor.0].get(&(site, year)).copied()
    }

    /// Value of `factor_id` at `site_code`, native or derived through the
    /// hierarchy. `Ok(None)` means no rule produces a value.
    pub fn resolve(&self, site_code: &str, factor_id: &str, year: i32) -> Result<Option<f64>, SnapshotError> {
        let (site, factor) = self.lookup(site_code, factor_id)?;
        Ok(self.resolve_id(site, factor, year))
    }

    pub fn resolve_id(&self, site: SiteId, factor: FactorIdx, year: i32) -> Option<f64> {
        if let Some(v) = self.native_by_id(site, factor, year) {
            return Some(v);
        }
        match self.factors[factor.0].aggregation {
            Aggregation::Additive => {
                let children = self.hierarchy.children(site);
                if children.is_empty() {
                    return None;
                }
                // a single unresolvable child makes the whole sum absent
                children
                    .iter()
                    .map(|c| self.resolve_id(*c, factor, year))
                    .sum::<Option<f64>>()
            }
            Aggregation::Intensive => self
                .hierarchy
                .ancestors(site)
                .find_map(|a| self.native_by_id(a, factor, year)),
            Aggregation::None => None,
        }
    }

    /// Country-wide aggregate of a factor.
    ///
    /// Additive factors are summed over the roots. Intensive factors use the
    /// roots' own values weighted by `weight_factor` (default
    /// [`INHABITANTS`]); if some root has no native value, the weighted mean
    /// is taken over all leaves where both value and weight resolve.
    pub fn national_aggregate(
        &self,
        factor_id: &str,
        year: i32,
        weight_factor: Option<&str>,
    ) -> Result<f64, SnapshotError> {
        let factor = self.factor_idx(factor_id)?;
        let unresolvable = || SnapshotError::UnresolvableAtRoot {
            factor: factor_id.to_owned(),
            year,
        };
        let roots = self.hierarchy.roots();
        match self.factors[factor.0].aggregation {
            Aggregation::Additive => roots
                .iter()
                .map(|r| self.resolve_id(*r, factor, year))
                .sum::<Option<f64>>()
                .ok_or_else(unresolvable),
            Aggregation::None => match roots {
                [root] => self.native_by_id(*root, factor, year).ok_or_else(unresolvable),
                _ => Err(unresolvable()),
            },
            Aggregation::Intensive => {
                let root_values: Option<Vec<f64>> =
                    roots.iter().map(|r| self.native_by_id(*r, factor, year)).collect();
                if let (Some(values), [_]) = (&root_values, roots) {
                    return Ok(values[0]);
                }
                let weight = self.factor_idx(weight_factor.unwrap_or(INHABITANTS))?;
                let pairs: Vec<(f64, f64)> = match root_values {
                    Some(values) => {
                        let weights: Option<Vec<f64>> =
                            roots.iter().map(|r| self.resolve_id(*r, weight, year)).collect();
                        values.into_iter().zip(weights.ok_or_else(unresolvable)?).collect()
                    }
                    None => self
                        .hierarchy
                        .leaves()
                        .filter_map(|leaf| {
                            let v = self.resolve_id(leaf, factor, year)?;
                            let w = self.resolve_id(leaf, weight, year)?;
                            Some((v, w))
                        })
                        .collect(),
                };
                let total_weight: f64 = pairs.iter().map(|(_, w)| w).sum();
                if pairs.is_empty() || total_weight == 0.0 {
                    return Err(unresolvable());
                }
                Ok(pairs.iter().map(|(v, w)| v * w).sum::<f64>() / total_weight)
            }
        }
    }

    /// Per-inhabitant purchasing power at a site.
    pub fn per_capita(&self, site_code: &str, year: i32, factors: &IndexFactors) -> Result<f64, SnapshotError> {
        let missing = |factor: &str| SnapshotError::MissingFactor {
            factor: factor.to_owned(),
            site: site_code.to_owned(),
            year,
        };
        let pp_meta = self
            .factor(&factors.purchasing_power)
            .ok_or_else(|| missing(&factors.purchasing_power))?;
        let pp = self
            .resolve(site_code, &factors.purchasing_power, year)?
            .ok_or_else(|| missing(&factors.purchasing_power))?;
        match pp_meta.aggregation {
            Aggregation::Additive => {
                if self.factor(&factors.inhabitants).is_none() {
                    return Err(missing(&factors.inhabitants));
                }
                let inh = self
                    .resolve(site_code, &factors.inhabitants, year)?
                    .filter(|v| *v > 0.0)
                    .ok_or_else(|| missing(&factors.inhabitants))?;
                Ok(pp / inh)
            }
            _ => Ok(pp),
        }
    }

    /// National per-inhabitant purchasing power.
    pub fn national_per_capita(&self, year: i32, factors: &IndexFactors) -> Result<f64, SnapshotError> {
        let pp_meta = self.factor(&factors.purchasing_power).ok_or_else(|| SnapshotError::MissingFactor {
            factor: factors.purchasing_power.clone(),
            site: String::new(),
            year,
        })?;
        let avg = match pp_meta.aggregation {
            Aggregation::Additive => {
                let total = self.national_aggregate(&factors.purchasing_power, year, None)?;
                let inh = self.national_aggregate(&factors.inhabitants, year, None)?;
                if inh == 0.0 {
                    return Err(SnapshotError::ZeroNationalAverage(factors.purchasing_power.clone()));
                }
                total / inh
            }
            _ => self.national_aggregate(&factors.purchasing_power, year, Some(&factors.inhabitants))?,
        };
        if avg == 0.0 {
            return Err(SnapshotError::ZeroNationalAverage(factors.purchasing_power.clone()));
        }
        Ok(avg)
    }

    /// Purchasing power per inhabitant relative to the national average,
    /// with the national average at 100.
    pub fn purchasing_power_index(&self, site_code: &str, year: i32) -> Result<f64, SnapshotError> {
        self.purchasing_power_index_with(site_code, year, &IndexFactors::default())
    }

    pub fn purchasing_power_index_with(
        &self,
        site_code: &str,
        year: i32,
        factors: &IndexFactors,
    ) -> Result<f64, SnapshotError> {
        let site = self.per_capita(site_code, year, factors)?;
        let national = self.national_per_capita(year, factors)?;
        Ok(100.0 * site / national)
    }

    /// Native parent values of additive factors deviating from their
    /// children's sum by more than `relative_tolerance`.
    pub fn additive_mismatches(&self, relative_tolerance: f64) -> Vec<AdditiveMismatch> {
        let mut out = Vec::new();
        for (fi, factor) in self.factors.iter().enumerate() {
            if factor.aggregation != Aggregation::Additive {
                continue;
            }
            let idx = FactorIdx(fi);
            let mut entries: Vec<_> = self.values[fi].iter().collect();
            entries.sort_by_key(|((site, year), _)| (*site, *year));
            for ((site, year), native) in entries {
                let children = self.hierarchy.children(*site);
                if children.is_empty() {
                    continue;
                }
                let Some(sum) = children
                    .iter()
                    .map(|c| self.resolve_id(*c, idx, *year))
                    .sum::<Option<f64>>()
                else {
                    continue;
                };
                let scale = native.abs().max(sum.abs());
                if scale > 0.0 && (native - sum).abs() / scale > relative_tolerance {
                    out.push(AdditiveMismatch {
                        site_code: self.hierarchy.site(*site).code.clone(),
                        factor_id: factor.id.clone(),
                        year: *year,
                        native: *native,
                        children_sum: sum,
                    });
                }
            }
        }
        out
    }
}
