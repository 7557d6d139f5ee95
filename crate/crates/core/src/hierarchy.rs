//! Territorial hierarchy: an ordered list of administrative levels and a
//! validated forest of sites.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Position of an administrative level, `0` being the top (e.g. nation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Level(pub usize);

impl Level {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered, dataset-specific level names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Levels {
    names: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LevelsError {
    #[error("at least two administrative levels are required, got {0}")]
    TooFew(usize),
    #[error("level name `{0}` appears more than once")]
    Duplicate(String),
}

impl Levels {
    pub fn new<I, S>(names: I) -> Result<Self, LevelsError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(LevelsError::TooFew(names.len()));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(LevelsError::Duplicate(name.clone()));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn top(&self) -> Level {
        Level(0)
    }

    pub fn bottom(&self) -> Level {
        Level(self.names.len() - 1)
    }

    pub fn by_name(&self, name: &str) -> Option<Level> {
        self.names.iter().position(|n| n == name).map(Level)
    }

    pub fn name(&self, level: Level) -> &str {
        &self.names[level.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl Iterator<Item = Level> + '_ {
        (0..self.names.len()).map(Level)
    }
}

impl Default for Levels {
    fn default() -> Self {
        Self::new(["Nation", "State", "County", "District", "Municipality"]).expect("static level list")
    }
}

impl TryFrom<Vec<String>> for Levels {
    type Error = LevelsError;

    fn try_from(names: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(names)
    }
}

impl From<Levels> for Vec<String> {
    fn from(levels: Levels) -> Self {
        levels.names
    }
}

/// One row of a hierarchy dataset before validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteRecord {
    pub code: String,
    pub name: String,
    pub level: Level,
    pub parent_code: Option<String>,
}

impl SiteRecord {
    pub fn new(code: impl Into<String>, name: impl Into<String>, level: Level, parent: Option<&str>) -> Self {
        Self {
            code: code.into(),
            name: name.into(),
            level,
            parent_code: parent.map(str::to_owned),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Site {
    pub code: String,
    pub name: String,
    pub level: Level,
    pub parent_code: Option<String>,
}

/// Dense index of a site inside a [`Hierarchy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SiteId(pub(crate) usize);

impl SiteId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HierarchyError {
    #[error("hierarchy has no sites")]
    Empty,
    #[error("site code `{0}` is not unique")]
    DuplicateCode(String),
    #[error("site `{code}` references unknown parent `{parent}`")]
    UnknownParent { code: String, parent: String },
    #[error("site `{code}` at level {level} has parent `{parent}` at level {parent_level}; parents must be exactly one level higher")]
    LevelSkip {
        code: String,
        level: usize,
        parent: String,
        parent_level: usize,
    },
    #[error("parent chain of `{0}` contains a cycle")]
    CycleDetected(String),
    #[error("site `{code}` has no parent but is not at the top level")]
    RootBelowTop { code: String },
    #[error("site `{code}` uses level {level}, but only {levels} levels are configured")]
    LevelOutOfRange { code: String, level: usize, levels: usize },
}

/// Validated forest of sites with parent and child indexes.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    levels: Levels,
    sites: Vec<Site>,
    by_code: HashMap<String, SiteId>,
    parents: Vec<Option<SiteId>>,
    children: Vec<Vec<SiteId>>,
    roots: Vec<SiteId>,
}

impl Hierarchy {
    /// Validates `records` into a forest. Record order is preserved for
    /// iteration, child lists and roots.
    pub fn build(levels: Levels, records: Vec<SiteRecord>) -> Result<Self, HierarchyError> {
        if records.is_empty() {
            return Err(HierarchyError::Empty);
        }
        let mut by_code = HashMap::with_capacity(records.len());
        for (idx, rec) in records.iter().enumerate() {
            if rec.level.0 >= levels.len() {
                return Err(HierarchyError::LevelOutOfRange {
                    code: rec.code.clone(),
                    level: rec.level.0,
                    levels: levels.len(),
                });
            }
            if by_code.insert(rec.code.clone(), SiteId(idx)).is_some() {
                return Err(HierarchyError::DuplicateCode(rec.code.clone()));
            }
        }

        let mut parents = Vec::with_capacity(records.len());
        for rec in &records {
            let parent = match &rec.parent_code {
                None => None,
                Some(p) => match by_code.get(p) {
                    Some(id) => Some(*id),
                    None => {
                        return Err(HierarchyError::UnknownParent {
                            code: rec.code.clone(),
                            parent: p.clone(),
                        })
                    }
                },
            };
            parents.push(parent);
        }

        // Cycles are reported before level checks so a self-referencing
        // record surfaces as a cycle rather than a level mismatch.
        let mut state = vec![0u8; records.len()]; // 0 = unvisited, 1 = on path, 2 = done
        for start in 0..records.len() {
            let mut path = Vec::new();
            let mut cur = Some(start);
            while let Some(idx) = cur {
                match state[idx] {
                    2 => break,
                    1 => return Err(HierarchyError::CycleDetected(records[idx].code.clone())),
                    _ => {
                        state[idx] = 1;
                        path.push(idx);
                        cur = parents[idx].map(|p: SiteId| p.0);
                    }
                }
            }
            for idx in path {
                state[idx] = 2;
            }
        }

        let mut children = vec![Vec::new(); records.len()];
        let mut roots = Vec::new();
        for (idx, rec) in records.iter().enumerate() {
            match parents[idx] {
                None => {
                    if rec.level != levels.top() {
                        return Err(HierarchyError::RootBelowTop { code: rec.code.clone() });
                    }
                    roots.push(SiteId(idx));
                }
                Some(parent) => {
                    let parent_level = records[parent.0].level;
                    if parent_level.0 + 1 != rec.level.0 {
                        return Err(HierarchyError::LevelSkip {
                            code: rec.code.clone(),
                            level: rec.level.0,
                            parent: records[parent.0].code.clone(),
                            parent_level: parent_level.0,
                        });
                    }
                    children[parent.0].push(SiteId(idx));
                }
            }
        }

        let sites = records
            .into_iter()
            .map(|r| Site {
                code: r.code,
                name: r.name,
                level: r.level,
                parent_code: r.parent_code,
            })
            .collect();

        Ok(Self {
            levels,
            sites,
            by_code,
            parents,
            children,
            roots,
        })
    }

    pub fn levels(&self) -> &Levels {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn id(&self, code: &str) -> Option<SiteId> {
        self.by_code.get(code).copied()
    }

    pub fn site(&self, id: SiteId) -> &Site {
        &self.sites[id.0]
    }

    pub fn get(&self, code: &str) -> Option<&Site> {
        self.id(code).map(|id| self.site(id))
    }

    pub fn contains(&self, code: &str) -> bool {
        self.by_code.contains_key(code)
    }

    pub fn parent(&self, id: SiteId) -> Option<SiteId> {
        self.parents[id.0]
    }

    pub fn children(&self, id: SiteId) -> &[SiteId] {
        &self.children[id.0]
    }

    pub fn roots(&self) -> &[SiteId] {
        &self.roots
    }

    pub fn is_leaf(&self, id: SiteId) -> bool {
        self.children[id.0].is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = SiteId> {
        (0..self.sites.len()).map(SiteId)
    }

    pub fn sites(&self) -> impl Iterator<Item = &Site> {
        self.sites.iter()
    }

    pub fn leaves(&self) -> impl Iterator<Item = SiteId> + '_ {
        self.ids().filter(|id| self.is_leaf(*id))
    }

    /// Strict ancestors, nearest first.
    pub fn ancestors(&self, id: SiteId) -> impl Iterator<Item = SiteId> + '_ {
        std::iter::successors(self.parent(id), |p| self.parent(*p))
    }

    /// Number of sites on each level, top level first.
    pub fn level_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.levels.len()];
        for site in &self.sites {
            counts[site.level.0] += 1;
        }
        counts
    }

    pub fn at_level(&self, level: Level) -> impl Iterator<Item = SiteId> + '_ {
        self.ids().filter(move |id| self.sites[id.0].level == level)
    }

    /// `root` and all its descendants, depth-first in child order.
    pub fn subtree(&self, root: SiteId) -> Vec<SiteId> {
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.children[id.0].iter().rev());
        }
        out
    }

    pub fn is_within(&self, id: SiteId, ancestor: SiteId) -> bool {
        id == ancestor || self.ancestors(id).any(|a| a == ancestor)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
