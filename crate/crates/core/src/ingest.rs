//! Loading hierarchy and factor datasets from delimited text.
//!
//! Formats (UTF-8, `,` delimiter, `"` quoting, `.` decimal separator):
//!
//! * hierarchy: `code,name,level,parent_code` (empty parent marks a root)
//! * factor:    `site_code,year,value` (blank value is skipped with a warning)
//! * stores:    `chain,site_code,count` (store presence per chain)
//! * manifest:  JSON with `hierarchy`, `levels`, `factors` and optional
//!   `year_range` and `stores`; relative paths are taken from the
//!   manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::PresenceSet;
use crate::hierarchy::{Hierarchy, HierarchyError, Levels, LevelsError, SiteRecord};
use crate::snapshot::{Aggregation, FactorValue, LocationFactor, Snapshot, SnapshotBuilder, SnapshotError};

pub const HIERARCHY_HEADER: [&str; 4] = ["code", "name", "level", "parent_code"];
pub const FACTOR_HEADER: [&str; 3] = ["site_code", "year", "value"];
pub const STORES_HEADER: [&str; 3] = ["chain", "site_code", "count"];

/// Relative deviation above which a native parent value is reported as
/// inconsistent with its children.
pub const ADDITIVE_TOLERANCE: f64 = 0.005;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("file is empty")]
    EmptyFile,
    #[error("line 1: expected header `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("line {line}: expected {expected} columns, found {found}")]
    MalformedRow { line: u64, expected: usize, found: usize },
    #[error("line {line}: unknown level `{name}`")]
    UnknownLevelName { line: u64, name: String },
    #[error("line {line}: empty `{field}`")]
    MissingField { line: u64, field: &'static str },
    #[error("line {line}: `{raw}` is not a plain decimal number")]
    NonNumericValue { line: u64, raw: String },
    #[error("line {line}: `{raw}` is not a valid year")]
    BadYear { line: u64, raw: String },
    #[error("line {line}: duplicate observation for `{site}` in {year}")]
    DuplicateObservation { line: u64, site: String, year: i32 },
    #[error("line {line}: `{raw}` is not a positive store count")]
    BadCount { line: u64, raw: String },
    #[error("line {line}: `{chain}` listed twice for `{site}`")]
    DuplicatePresence { line: u64, chain: String, site: String },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Levels(#[from] LevelsError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    BlankValue { factor: String, line: u64, site: String },
    OrphanValue { factor: String, line: u64, site: String },
    AdditiveMismatch {
        factor: String,
        site: String,
        year: i32,
        native: f64,
        children_sum: f64,
    },
    MissingYear { factor: String, year: i32 },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::BlankValue { factor, line, site } => {
                write!(f, "{factor}: line {line}: blank value for `{site}` skipped")
            }
            Warning::OrphanValue { factor, line, site } => {
                write!(f, "{factor}: line {line}: unknown site `{site}`, value dropped")
            }
            Warning::AdditiveMismatch {
                factor,
                site,
                year,
                native,
                children_sum,
            } => write!(
                f,
                "{factor}: `{site}` {year}: native value {native} differs from children sum {children_sum}"
            ),
            Warning::MissingYear { factor, year } => write!(f, "{factor}: no observations for {year}"),
        }
    }
}

fn csv_reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes)
}

/// Reads all records, checking the header and column count.
fn read_rows(bytes: &[u8], header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>, IngestError> {
    let mut rows = Vec::new();
    let mut reader = csv_reader(bytes);
    let mut seen_header = false;
    for result in reader.records() {
        let record = result.map_err(|e| IngestError::Csv {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if !seen_header {
            let found: Vec<&str> = record.iter().collect();
            if found != header {
                return Err(IngestError::BadHeader {
                    expected: header.join(","),
                    found: found.join(","),
                });
            }
            seen_header = true;
            continue;
        }
        if record.len() != header.len() {
            return Err(IngestError::MalformedRow {
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        rows.push((line, record));
    }
    if !seen_header {
        return Err(IngestError::EmptyFile);
    }
    Ok(rows)
}

pub fn parse_hierarchy_file(bytes: &[u8], levels: &Levels) -> Result<Vec<SiteRecord>, IngestError> {
    read_rows(bytes, &HIERARCHY_HEADER)?
        .into_iter()
        .map(|(line, row)| {
            let code = &row[0];
            if code.is_empty() {
                return Err(IngestError::MissingField { line, field: "code" });
            }
            let level = levels.by_name(&row[2]).ok_or_else(|| IngestError::UnknownLevelName {
                line,
                name: row[2].to_owned(),
            })?;
            let parent = (!row[3].is_empty()).then(|| &row[3]);
            Ok(SiteRecord::new(code, &row[1], level, parent))
        })
        .collect()
}

pub fn serialize_hierarchy(records: &[SiteRecord], levels: &Levels) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HIERARCHY_HEADER).expect("in-memory write");
    for r in records {
        w.write_record([
            r.code.as_str(),
            r.name.as_str(),
            levels.name(r.level),
            r.parent_code.as_deref().unwrap_or(""),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn serialize_factor_values<'a>(values: impl IntoIterator<Item = &'a FactorValue>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(FACTOR_HEADER).expect("in-memory write");
    for v in values {
        w.write_record([v.site_code.clone(), v.year.to_string(), v.value.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Parses `chain,site_code,count` rows into one set per chain, in order of
/// first appearance. Site codes are not checked against any hierarchy.
pub fn parse_presence_file(bytes: &[u8]) -> Result<Vec<PresenceSet>, IngestError> {
    let mut sets: Vec<PresenceSet> = Vec::new();
    for (line, row) in read_rows(bytes, &STORES_HEADER)? {
        let chain = row[0].trim();
        let site = row[1].trim();
        if chain.is_empty() {
            return Err(IngestError::MissingField { line, field: "chain" });
        }
        if site.is_empty() {
            return Err(IngestError::MissingField { line, field: "site_code" });
        }
        let count = row[2]
            .trim()
            .parse::<u32>()
            .ok()
            .filter(|c| *c > 0)
            .ok_or_else(|| IngestError::BadCount {
                line,
                raw: row[2].to_owned(),
            })?;
        let set = match sets.iter().position(|s| s.label == chain) {
            Some(i) => &mut sets[i],
            None => {
                sets.push(PresenceSet::new(chain));
                sets.last_mut().expect("just pushed")
            }
        };
        if set.contains(site) {
            return Err(IngestError::DuplicatePresence {
                line,
                chain: chain.to_owned(),
                site: site.to_owned(),
            });
        }
        set.add(site, count);
    }
    Ok(sets)
}

pub fn serialize_presence(sets: &[PresenceSet]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(STORES_HEADER).expect("in-memory write");
    for set in sets {
        for (site, count) in &set.counts {
            w.write_record([set.label.as_str(), site.as_str(), &count.to_string()])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn load_presence(path: impl AsRef<Path>) -> Result<Vec<PresenceSet>, IngestError> {
    parse_presence_file(&read_file(path.as_ref())?)
}

/// Parses a decimal number, rejecting thousands separators, `inf` and `NaN`.
fn parse_number(raw: &str) -> Option<f64> {
    let s = raw.trim();
    if !s.bytes().any(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// One factor entry of a manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorDescriptor {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub unit: String,
    pub file: PathBuf,
    pub native_level: String,
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedFactorFile {
    pub values: Vec<(u64, FactorValue)>,
    pub warnings: Vec<Warning>,
    pub total_rows: usize,
}

impl ParsedFactorFile {
    pub fn skipped(&self) -> usize {
        self.total_rows - self.values.len()
    }
}

/// Parses `site_code,year,value` rows. Values carry `descriptor.id` and the
/// source line number.
pub fn parse_factor_file(bytes: &[u8], descriptor: &FactorDescriptor) -> Result<ParsedFactorFile, IngestError> {
    let rows = read_rows(bytes, &FACTOR_HEADER)?;
    let total_rows = rows.len();
    let mut seen = HashSet::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    let mut warnings = Vec::new();
    for (line, row) in rows {
        let site = row[0].trim();
        if site.is_empty() {
            return Err(IngestError::MissingField { line, field: "site_code" });
        }
        let year: i32 = row[1].trim().parse().map_err(|_| IngestError::BadYear {
            line,
            raw: row[1].to_owned(),
        })?;
        if !seen.insert((site.to_owned(), year)) {
            return Err(IngestError::DuplicateObservation {
                line,
                site: site.to_owned(),
                year,
            });
        }
        let raw = &row[2];
        if raw.trim().is_empty() {
            warnings.push(Warning::BlankValue {
                factor: descriptor.id.clone(),
                line,
                site: site.to_owned(),
            });
            continue;
        }
        let value = parse_number(raw).ok_or_else(|| IngestError::NonNumericValue {
            line,
            raw: raw.to_owned(),
        })?;
        values.push((
            line,
            FactorValue {
                site_code: site.to_owned(),
                factor_id: descriptor.id.clone(),
                year,
                value,
            },
        ));
    }
    Ok(ParsedFactorFile {
        values,
        warnings,
        total_rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub hierarchy: PathBuf,
    pub levels: Vec<String>,
    #[serde(default)]
    pub factors: Vec<FactorDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year_range: Option<(i32, i32)>,
    /// Optional store presence file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stores: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| IngestError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| IngestError::Manifest(e.to_string()))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }

    /// Store presence named by the manifest; empty when it names none.
    pub fn presence(&self) -> Result<Vec<PresenceSet>, IngestError> {
        match &self.stores {
            Some(p) => load_presence(self.resolve_path(p)),
            None => Ok(Vec::new()),
        }
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub sites: usize,
    pub sites_per_level: Vec<(String, usize)>,
    pub factors: usize,
    pub total_rows: usize,
    pub accepted: usize,
    pub skipped: usize,
    pub orphaned: usize,
    pub warnings: Vec<Warning>,
    pub fatal: Vec<String>,
}

impl ValidationReport {
    pub fn is_fatal(&self) -> bool {
        !self.fatal.is_empty()
    }
}

#[derive(Debug)]
pub struct Ingested {
    pub snapshot: Snapshot,
    pub report: ValidationReport,
}

/// Snapshot construction was refused; `report.fatal` lists why.
#[derive(Debug, Error)]
#[error("ingestion failed with {} fatal error(s): {}", .report.fatal.len(), .report.fatal.join("; "))]
pub struct IngestFailure {
    pub report: ValidationReport,
}

fn read_file(path: &Path) -> Result<Vec<u8>, IngestError> {
    fs::read(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load(manifest_path: impl AsRef<Path>) -> Result<Ingested, IngestFailure> {
    let manifest = DatasetManifest::from_path(manifest_path).map_err(|e| IngestFailure {
        report: ValidationReport {
            fatal: vec![e.to_string()],
            ..Default::default()
        },
    })?;
    build_snapshot(&manifest)
}

pub fn build_snapshot(manifest: &DatasetManifest) -> Result<Ingested, IngestFailure> {
    let mut report = ValidationReport::default();
    let fail = |mut report: ValidationReport, e: IngestError| {
        report.fatal.push(e.to_string());
        IngestFailure { report }
    };

    let levels = match Levels::new(manifest.levels.clone()) {
        Ok(l) => l,
        Err(e) => return Err(fail(report, e.into())),
    };
    let hierarchy_path = manifest.resolve_path(&manifest.hierarchy);
    let hierarchy = read_file(&hierarchy_path)
        .and_then(|bytes| parse_hierarchy_file(&bytes, &levels))
        .and_then(|records| Ok(Hierarchy::build(levels.clone(), records)?));
    let hierarchy = match hierarchy {
        Ok(h) => h,
        Err(e @ IngestError::Io { .. }) => return Err(fail(report, e)),
        Err(e) => {
            report.fatal.push(format!("{}: {e}", hierarchy_path.display()));
            return Err(IngestFailure { report });
        }
    };
    report.sites = hierarchy.len();
    report.sites_per_level = levels
        .names()
        .iter()
        .cloned()
        .zip(hierarchy.level_counts())
        .collect();

    let mut builder = SnapshotBuilder::new(hierarchy);
    if let Some((from, to)) = manifest.year_range {
        builder = builder.with_year_range(from, to);
    }

    let mut ids = HashSet::new();
    for d in &manifest.factors {
        if !ids.insert(d.id.as_str()) {
            report.fatal.push(format!("factor id `{}` declared twice", d.id));
        }
        if levels.by_name(&d.native_level).is_none() {
            report
                .fatal
                .push(format!("factor `{}`: unknown native level `{}`", d.id, d.native_level));
        }
    }
    if report.is_fatal() {
        return Err(IngestFailure { report });
    }

    let parsed: Vec<Result<ParsedFactorFile, IngestError>> = manifest
        .factors
        .par_iter()
        .map(|d| read_file(&manifest.resolve_path(&d.file)).and_then(|bytes| parse_factor_file(&bytes, d)))
        .collect();

    for (d, parsed) in manifest.factors.iter().zip(parsed) {
        let parsed = match parsed {
            Ok(p) => p,
            Err(e) => {
                report.fatal.push(format!("factor `{}` ({}): {e}", d.id, d.file.display()));
                continue;
            }
        };
        builder
            .register_factor(LocationFactor {
                id: d.id.clone(),
                name: d.name.clone(),
                unit: d.unit.clone(),
                native_level: levels.by_name(&d.native_level).expect("checked above"),
                aggregation: d.aggregation,
            })
            .expect("ids checked above");
        report.factors += 1;
        report.total_rows += parsed.total_rows;
        report.skipped += parsed.skipped();
        report.warnings.extend(parsed.warnings);
        for (line, value) in parsed.values {
            if !builder.hierarchy().contains(&value.site_code) {
                report.orphaned += 1;
                report.warnings.push(Warning::OrphanValue {
                    factor: d.id.clone(),
                    line,
                    site: value.site_code,
                });
                continue;
            }
            match builder.insert(&value) {
                Ok(()) => report.accepted += 1,
                Err(e) => report.fatal.push(format!("factor `{}` line {line}: {e}", d.id)),
            }
        }
    }
    if report.is_fatal() {
        return Err(IngestFailure { report });
    }

    let snapshot = builder.freeze();
    for m in snapshot.additive_mismatches(ADDITIVE_TOLERANCE) {
        report.warnings.push(Warning::AdditiveMismatch {
            factor: m.factor_id,
            site: m.site_code,
            year: m.year,
            native: m.native,
            children_sum: m.children_sum,
        });
    }
    if let Some((from, to)) = manifest.year_range {
        for d in &manifest.factors {
            let years = snapshot.years(&d.id);
            for year in from..=to {
                if !years.contains(&year) {
                    report.warnings.push(Warning::MissingYear {
                        factor: d.id.clone(),
                        year,
                    });
                }
            }
        }
    }
    Ok(Ingested { snapshot, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::Level;

    fn descriptor(id: &str) -> FactorDescriptor {
        FactorDescriptor {
            id: id.into(),
            name: id.into(),
            unit: String::new(),
            file: PathBuf::from(format!("{id}.csv")),
            native_level: "Municipality".into(),
            aggregation: Aggregation::Additive,
        }
    }

    #[test]
    fn two_row_hierarchy() {
        let text = "code,name,level,parent_code\nDE,Germany,Nation,\nDE.BE,Berlin,State,DE\n";
        let records = parse_hierarchy_file(text.as_bytes(), &Levels::default()).unwrap();
        assert_eq!(
            records,
            vec![
                SiteRecord::new("DE", "Germany", Level(0), None),
                SiteRecord::new("DE.BE", "Berlin", Level(1), Some("DE")),
            ]
        );
    }

    #[test]
    fn three_column_row_is_malformed() {
        let text = "code,name,level,parent_code\nDE,Germany,Nation,\nDE.BE,Berlin,State\n";
        let err = parse_hierarchy_file(text.as_bytes(), &Levels::default()).unwrap_err();
        assert_eq!(
            err,
            IngestError::MalformedRow {
                line: 3,
                expected: 4,
                found: 3
            }
        );
    }

    #[test]
    fn hierarchy_errors() {
        let levels = Levels::default();
        assert_eq!(parse_hierarchy_file(b"", &levels).unwrap_err(), IngestError::EmptyFile);
        assert!(matches!(
            parse_hierarchy_file(b"code,name,level\n", &levels).unwrap_err(),
            IngestError::BadHeader { .. }
        ));
        let err = parse_hierarchy_file(b"code,name,level,parent_code\nX,x,Planet,\n", &levels).unwrap_err();
        assert_eq!(
            err,
            IngestError::UnknownLevelName {
                line: 2,
                name: "Planet".into()
            }
        );
    }

    #[test]
    fn quoted_names_round_trip() {
        let levels = Levels::default();
        let records = vec![
            SiteRecord::new("DE", "Germany", Level(0), None),
            SiteRecord::new("DE.NW", "Nordrhein-Westfalen, \"NRW\"", Level(1), Some("DE")),
        ];
        let text = serialize_hierarchy(&records, &levels);
        assert_eq!(parse_hierarchy_file(text.as_bytes(), &levels).unwrap(), records);
    }

    #[test]
    fn single_factor_row() {
        let text = "site_code,year,value\nDE.BE,2016,3484995\n";
        let parsed = parse_factor_file(text.as_bytes(), &descriptor("inhabitants")).unwrap();
        assert_eq!(parsed.values.len(), 1);
        assert_eq!(
            parsed.values[0].1,
            FactorValue {
                site_code: "DE.BE".into(),
                factor_id: "inhabitants".into(),
                year: 2016,
                value: 3_484_995.0
            }
        );
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn duplicate_observation() {
        let text = "site_code,year,value\nA,2016,1\nA,2016,2\n";
        let err = parse_factor_file(text.as_bytes(), &descriptor("f")).unwrap_err();
        assert!(matches!(err, IngestError::DuplicateObservation { line: 3, .. }));
    }

    #[test]
    fn blank_value_is_skipped_with_warning() {
        let mut text = String::from("site_code,year,value\n");
        for i in 0..10 {
            if i == 4 {
                text.push_str(&format!("S{i},2016,\n"));
            } else {
                text.push_str(&format!("S{i},2016,{}\n", i * 10));
            }
        }
        let parsed = parse_factor_file(text.as_bytes(), &descriptor("f")).unwrap();
        assert_eq!(parsed.values.len(), 9);
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.total_rows, 10);
        assert_eq!(parsed.skipped(), 1);
    }

    #[test]
    fn thousands_separators_and_specials_rejected() {
        for raw in ["\"3,484,995\"", "3.484.995", "inf", "NaN", "12a", "1 000"] {
            let text = format!("site_code,year,value\nA,2016,{raw}\n");
            let err = parse_factor_file(text.as_bytes(), &descriptor("f")).unwrap_err();
            assert!(matches!(err, IngestError::NonNumericValue { .. }), "{raw}: {err:?}");
        }
        let text = "site_code,year,value\nA,2016,-1.5e3\nB,2016, 78.9 \n";
        let parsed = parse_factor_file(text.as_bytes(), &descriptor("f")).unwrap();
        assert_eq!(parsed.values[0].1.value, -1500.0);
        assert_eq!(parsed.values[1].1.value, 78.9);
    }

    #[test]
    fn presence_file() {
        let text = "chain,site_code,count\nLidl,M1,2\nNP,M1,1\nLidl,M3,1\n";
        let sets = parse_presence_file(text.as_bytes()).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].label, "Lidl");
        assert_eq!(sets[0].count("M1"), 2);
        assert_eq!(sets[0].len(), 2);
        assert_eq!(sets[1].sites().into_iter().collect::<Vec<_>>(), ["M1"]);
        assert_eq!(parse_presence_file(serialize_presence(&sets).as_bytes()).unwrap(), sets);
    }

    #[test]
    fn presence_errors() {
        let bad = |t: &str| parse_presence_file(t.as_bytes()).unwrap_err();
        assert!(matches!(bad("chain,site_code,count\nA,M1,0\n"), IngestError::BadCount { line: 2, .. }));
        assert!(matches!(bad("chain,site_code,count\nA,M1,x\n"), IngestError::BadCount { .. }));
        assert!(matches!(
            bad("chain,site_code,count\nA,M1,1\nA,M1,2\n"),
            IngestError::DuplicatePresence { line: 3, .. }
        ));
        assert!(matches!(bad("chain,site,n\n"), IngestError::BadHeader { .. }));
    }

    #[test]
    fn bad_year() {
        let text = "site_code,year,value\nA,twenty,1\n";
        assert!(matches!(
            parse_factor_file(text.as_bytes(), &descriptor("f")).unwrap_err(),
            IngestError::BadYear { line: 2, .. }
        ));
    }
}
