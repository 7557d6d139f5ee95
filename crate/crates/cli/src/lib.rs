//! `siteselect` command-line driver.
//!
//! Every report is assembled from core operations; the CLI only parses
//! arguments, loads inputs and renders results as a table, CSV or JSON.

mod output;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use siteselect_core::analysis::{
    bucket_stats, chain_profile, correlation_matrix, display_percent, evaluate_chains, rank_sum_groups,
    select_sites, AnalysisError, Attribute, BucketStats, EvaluationReport, GroupProfile, GroupRankSum,
    GroupSelector, PresenceSet, ProfileFactors, ValueContext, ValueSource, DEFAULT_BUCKETS,
};
use siteselect_core::fixtures::{case_study_counts, case_study_dataset, synthetic_country, SyntheticConfig, CASE_STUDY};
use siteselect_core::ingest::{self, DatasetManifest, IngestError, IngestFailure, ValidationReport};
use siteselect_core::urp::{parse_urp, recommend, CriterionScore, EngineError, Recommendation, Urp, UrpError};
use siteselect_core::{IndexFactors, Snapshot};
use siteselect_service::{LoadError, Service};
use thiserror::Error;

pub use output::Table;

pub const EXIT_OK: u8 = 0;
pub const EXIT_WARNINGS: u8 = 1;
pub const EXIT_FATAL: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "siteselect", version, about = "Hierarchical site-selection recommender")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a dataset and print the ingestion report.
    Ingest(IngestArgs),
    /// Rank candidate sites for a requirement profile.
    Recommend(RecommendArgs),
    /// Compare recommendations with existing store locations, per chain.
    Evaluate(EvaluateArgs),
    /// Pearson correlation matrix of factors and store counts (CSV).
    Correlate(CorrelateArgs),
    /// Size-bucket statistics and per-chain purchasing-power profile.
    Profile(ProfileArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Write a generated fixture dataset.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

/// A year, or the newest year in the snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YearArg {
    Latest,
    Fixed(i32),
}

impl FromStr for YearArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("latest") {
            return Ok(YearArg::Latest);
        }
        s.parse().map(YearArg::Fixed).map_err(|_| format!("`{s}` is neither a year nor `latest`"))
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Stores file (`chain,site_code,count`); defaults to the manifest's.
    #[arg(long)]
    pub stores: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Treat validation warnings as errors (exit 1).
    #[arg(long)]
    pub strict: bool,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Requirement profile (JSON).
    #[arg(long)]
    pub urp: PathBuf,
    #[arg(long)]
    pub top: Option<usize>,
    /// Overrides the profile's year: a number or `latest`.
    #[arg(long)]
    pub year: Option<YearArg>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// `CHAIN=PATH` of a chain's requirement profile; repeatable.
    #[arg(long = "profile", required = true, value_parser = parse_labelled_path)]
    pub profiles: Vec<(String, PathBuf)>,
    #[arg(long)]
    pub year: Option<YearArg>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// `LABEL=factor:ID`, `LABEL=chain:NAME` or `LABEL=ppi`; repeatable.
    /// Defaults to every factor and every chain.
    #[arg(long = "attr", value_parser = parse_attribute)]
    pub attributes: Vec<Attribute>,
    /// Level of the correlated sites; defaults to the bottom level.
    #[arg(long)]
    pub level: Option<String>,
    #[arg(long)]
    pub under: Option<String>,
    #[arg(long, default_value = "latest")]
    pub year: YearArg,
    /// Decimals of the printed coefficients; full precision when absent.
    #[arg(long)]
    pub decimals: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub level: Option<String>,
    #[arg(long)]
    pub under: Option<String>,
    #[arg(long, default_value = "latest")]
    pub year: YearArg,
    /// Inhabitant bucket bounds, comma separated; `inf` closes the top.
    #[arg(long, value_delimiter = ',', value_parser = parse_bound)]
    pub buckets: Vec<f64>,
    /// Value averaged per bucket: `factor:ID`, `chain:NAME` or `ppi`.
    #[arg(long, default_value = "ppi", value_parser = parse_source)]
    pub value: ValueSource,
    /// Rank-sum test of a chain's sites against all others; repeatable.
    #[arg(long = "test")]
    pub tests: Vec<String>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureKind {
    /// Generated country with threshold, proportional and discount chains.
    Synthetic,
    /// Published per-chain classification counts, one dataset per chain.
    CaseStudy,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "synthetic")]
    pub kind: FixtureKind,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Case-study chain; all chains (one subdirectory each) when absent.
    #[arg(long)]
    pub chain: Option<String>,
}

fn parse_labelled_path(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((label, path)) if !label.is_empty() && !path.is_empty() => Ok((label.to_owned(), PathBuf::from(path))),
        _ => Err(format!("expected LABEL=PATH, got `{s}`")),
    }
}

fn parse_source(s: &str) -> Result<ValueSource, String> {
    match s.split_once(':') {
        _ if s == "ppi" => Ok(ValueSource::PurchasingPowerIndex),
        Some(("factor", id)) if !id.is_empty() => Ok(ValueSource::Factor { factor: id.to_owned() }),
        Some(("chain", name)) if !name.is_empty() => Ok(ValueSource::Presence { chain: name.to_owned() }),
        _ => Err(format!("expected `factor:ID`, `chain:NAME` or `ppi`, got `{s}`")),
    }
}

fn parse_attribute(s: &str) -> Result<Attribute, String> {
    let (label, source) = s.split_once('=').ok_or_else(|| format!("expected LABEL=SOURCE, got `{s}`"))?;
    Ok(Attribute {
        label: label.to_owned(),
        source: parse_source(source)?,
    })
}

fn parse_bound(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    s.parse().map_err(|_| format!("`{s}` is not a number"))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Ingest(#[from] IngestFailure),
    #[error("{0}")]
    Input(#[from] IngestError),
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Profile { path: PathBuf, source: UrpError },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("snapshot has no observations; pass an explicit --year")]
    NoYears,
    #[error("unknown case-study chain `{0}`")]
    UnknownChain(String),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code: 0 success, 1 warnings under `--strict`, 2 fatal or
/// usage errors.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FATAL } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let CliError::Ingest(f) = &e {
                for line in &f.report.fatal {
                    let _ = writeln!(err, "  {line}");
                }
            }
            EXIT_FATAL
        }
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8, CliError> {
    match command {
        Command::Ingest(a) => cmd_ingest(a, out),
        Command::Recommend(a) => cmd_recommend(a, out).map(|_| EXIT_OK),
        Command::Evaluate(a) => cmd_evaluate(a, out).map(|_| EXIT_OK),
        Command::Correlate(a) => cmd_correlate(a, out).map(|_| EXIT_OK),
        Command::Profile(a) => cmd_profile(a, out).map(|_| EXIT_OK),
        Command::Serve(a) => cmd_serve(a, err).map(|_| EXIT_OK),
        Command::Generate(a) => cmd_generate(a, out).map(|_| EXIT_OK),
    }
}

fn load_snapshot(manifest: &Path) -> Result<(DatasetManifest, Snapshot), CliError> {
    let m = DatasetManifest::from_path(manifest)?;
    let ingested = ingest::build_snapshot(&m)?;
    Ok((m, ingested.snapshot))
}

fn load_data(data: &DataArgs) -> Result<(Snapshot, Vec<PresenceSet>), CliError> {
    let (m, snapshot) = load_snapshot(&data.manifest)?;
    let presence = match &data.stores {
        Some(p) => ingest::load_presence(p)?,
        None => m.presence()?,
    };
    Ok((snapshot, presence))
}

fn load_profile(path: &Path) -> Result<Urp, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })?;
    parse_urp(&text).map_err(|source| CliError::Profile {
        path: path.to_owned(),
        source,
    })
}

fn resolve_year(snapshot: &Snapshot, year: YearArg) -> Result<i32, CliError> {
    match year {
        YearArg::Fixed(y) => Ok(y),
        YearArg::Latest => snapshot.latest_year().ok_or(CliError::NoYears),
    }
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    writeln!(out, "{text}")?;
    Ok(())
}

fn write_table(out: &mut dyn Write, table: &Table, format: Format) -> Result<(), CliError> {
    match format {
        Format::Csv => out.write_all(table.to_csv().as_bytes())?,
        _ => out.write_all(table.to_text().as_bytes())?,
    }
    Ok(())
}

fn report_table(report: &ValidationReport, version: Option<&str>) -> Table {
    let mut t = Table::new(["item", "value"]);
    t.push(["sites".to_owned(), report.sites.to_string()]);
    for (level, n) in &report.sites_per_level {
        t.push([format!("  {level}"), n.to_string()]);
    }
    for (k, v) in [
        ("factors", report.factors),
        ("rows", report.total_rows),
        ("accepted", report.accepted),
        ("skipped", report.skipped),
        ("orphaned", report.orphaned),
        ("warnings", report.warnings.len()),
        ("fatal", report.fatal.len()),
    ] {
        t.push([k.to_owned(), v.to_string()]);
    }
    if let Some(v) = version {
        t.push(["snapshot version", v]);
    }
    t
}

fn cmd_ingest(a: IngestArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let manifest = DatasetManifest::from_path(&a.manifest)?;
    let (report, version) = match ingest::build_snapshot(&manifest) {
        Ok(ing) => (ing.report, Some(ing.snapshot.version().to_owned())),
        Err(f) => (f.report, None),
    };
    match a.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                snapshot_version: Option<&'a str>,
                report: &'a ValidationReport,
            }
            write_json(
                out,
                &Out {
                    snapshot_version: version.as_deref(),
                    report: &report,
                },
            )?;
        }
        f => {
            write_table(out, &report_table(&report, version.as_deref()), f)?;
            if f == Format::Table {
                for w in &report.warnings {
                    writeln!(out, "warning: {w}")?;
                }
                for e in &report.fatal {
                    writeln!(out, "fatal: {e}")?;
                }
            }
        }
    }
    Ok(if report.is_fatal() {
        EXIT_FATAL
    } else if a.strict && !report.warnings.is_empty() {
        EXIT_WARNINGS
    } else {
        EXIT_OK
    })
}

fn preference_names(ranked: &[Recommendation]) -> Vec<String> {
    ranked
        .first()
        .map(|r| {
            r.breakdown
                .iter()
                .filter_map(|c| match c {
                    CriterionScore::Preference { criterion, .. } => Some(criterion.clone()),
                    CriterionScore::MustHave { .. } => None,
                })
                .collect()
        })
        .unwrap_or_default()
}

pub fn recommendation_table(ranked: &[Recommendation], decimals: Option<usize>) -> Table {
    let num = |v: f64| decimals.map_or_else(|| v.to_string(), |d| output::fixed(v, d));
    let mut header = vec!["rank".to_owned(), "site".into(), "name".into(), "score".into()];
    header.extend(preference_names(ranked));
    let mut t = Table::new(header);
    for (i, r) in ranked.iter().enumerate() {
        let mut row = vec![(i + 1).to_string(), r.site_code.clone(), r.site_name.clone(), num(r.total_score)];
        row.extend(r.breakdown.iter().filter_map(|c| match c {
            CriterionScore::Preference { rating, .. } => Some(num(*rating)),
            CriterionScore::MustHave { .. } => None,
        }));
        t.push(row);
    }
    t
}

fn cmd_recommend(a: RecommendArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (_, snapshot) = load_snapshot(&a.manifest)?;
    let mut urp = load_profile(&a.urp)?;
    if let Some(y) = a.year {
        urp.year = resolve_year(&snapshot, y)?;
    }
    let ranked = recommend(&snapshot, &urp, a.top)?;
    match a.format {
        Format::Json => write_json(out, &ranked),
        Format::Csv => write_table(out, &recommendation_table(&ranked, None), Format::Csv),
        Format::Table => write_table(out, &recommendation_table(&ranked, Some(4)), Format::Table),
    }
}

/// Per-chain contingency tables in the store × fulfilled layout.
pub fn contingency_text(report: &EvaluationReport) -> String {
    let mut s = String::new();
    for c in &report.chains {
        let t = &c.table;
        let mut table = Table::new([c.chain.as_str(), "fulfilled", "not fulfilled", "total"]);
        table.push([
            "store".to_owned(),
            t.store_fulfilled.to_string(),
            t.store_unfulfilled.to_string(),
            t.store_total().to_string(),
        ]);
        table.push([
            "no store".to_owned(),
            t.no_store_fulfilled.to_string(),
            t.no_store_unfulfilled.to_string(),
            t.no_store_total().to_string(),
        ]);
        table.push([
            "total".to_owned(),
            t.fulfilled_total().to_string(),
            t.unfulfilled_total().to_string(),
            t.universe.to_string(),
        ]);
        s.push_str(&table.to_text());
        s.push('\n');
    }
    s
}

/// One summary row per chain plus the overall row.
pub fn overlap_table(report: &EvaluationReport) -> Table {
    let pct = |p: Option<f64>| p.map_or_else(|| "-".to_owned(), |p| format!("{} %", display_percent(p)));
    let mut t = Table::new([
        "chain",
        "stores",
        "stores fulfilling",
        "overlap",
        "recommended",
        "without markets",
        "outside focus",
    ]);
    for c in &report.chains {
        t.push([
            c.chain.clone(),
            c.table.store_total().to_string(),
            c.table.store_fulfilled.to_string(),
            pct(c.overlap_percent),
            c.recommended_total.to_string(),
            c.without_markets.to_string(),
            c.stores_outside_focus.to_string(),
        ]);
    }
    t.push([
        "overall".to_owned(),
        report.overall.stores.to_string(),
        report.overall.recommended.to_string(),
        pct(report.overall.overlap_percent),
        String::new(),
        report.new_sites.len().to_string(),
        String::new(),
    ]);
    t
}

fn evaluation_csv(report: &EvaluationReport) -> Table {
    let mut t = Table::new([
        "chain",
        "universe",
        "store_fulfilled",
        "store_unfulfilled",
        "no_store_fulfilled",
        "no_store_unfulfilled",
        "overlap_percent",
        "recommended_total",
        "without_markets",
        "stores_outside_focus",
    ]);
    for c in &report.chains {
        let tb = &c.table;
        t.push([
            c.chain.clone(),
            tb.universe.to_string(),
            tb.store_fulfilled.to_string(),
            tb.store_unfulfilled.to_string(),
            tb.no_store_fulfilled.to_string(),
            tb.no_store_unfulfilled.to_string(),
            c.overlap_percent.map_or_else(String::new, |p| p.to_string()),
            c.recommended_total.to_string(),
            c.without_markets.to_string(),
            c.stores_outside_focus.to_string(),
        ]);
    }
    t
}

fn cmd_evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (snapshot, presence) = load_data(&a.data)?;
    let year = a.year.map(|y| resolve_year(&snapshot, y)).transpose()?;
    let profiles = a
        .profiles
        .iter()
        .map(|(label, path)| {
            let mut urp = load_profile(path)?;
            if let Some(y) = year {
                urp.year = y;
            }
            Ok((label.clone(), urp))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = evaluate_chains(&snapshot, &profiles, &presence)?;
    match a.format {
        Format::Json => write_json(out, &report),
        Format::Csv => write_table(out, &evaluation_csv(&report), Format::Csv),
        Format::Table => {
            out.write_all(contingency_text(&report).as_bytes())?;
            write_table(out, &overlap_table(&report), Format::Table)
        }
    }
}

fn bottom_level(snapshot: &Snapshot) -> String {
    let levels = snapshot.hierarchy().levels();
    levels.name(levels.bottom()).to_owned()
}

fn cmd_correlate(a: CorrelateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (snapshot, presence) = load_data(&a.data)?;
    let year = resolve_year(&snapshot, a.year)?;
    let level = a.level.unwrap_or_else(|| bottom_level(&snapshot));
    let sites = select_sites(&snapshot, Some(&level), a.under.as_deref())?;
    let attributes = if a.attributes.is_empty() {
        let mut attrs: Vec<Attribute> = presence.iter().map(|p| Attribute::presence(&p.label, &p.label)).collect();
        attrs.extend(snapshot.factors().iter().map(|f| Attribute::factor(&f.id, &f.id)));
        attrs
    } else {
        a.attributes
    };
    let index = IndexFactors::default();
    let ctx = ValueContext::new(&snapshot, &presence, year, &index);
    let matrix = correlation_matrix(&ctx, &attributes, &sites)?;
    match a.format {
        Format::Json => write_json(out, &matrix),
        Format::Csv => Ok(out.write_all(matrix.to_csv(a.decimals).as_bytes())?),
        Format::Table => {
            let d = a.decimals.unwrap_or(2);
            let mut header = vec![String::new()];
            header.extend(matrix.labels.iter().cloned());
            let mut t = Table::new(header);
            for (label, row) in matrix.labels.iter().zip(&matrix.coefficients) {
                let mut cells = vec![label.clone()];
                cells.extend(row.iter().map(|v| output::opt(*v, d)));
                t.push(cells);
            }
            write_table(out, &t, Format::Table)
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ProfileReport {
    pub year: i32,
    pub level: String,
    pub buckets: BucketStats,
    pub chains: Vec<GroupProfile>,
    pub tests: Vec<GroupRankSum>,
}

fn cmd_profile(a: ProfileArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (snapshot, presence) = load_data(&a.data)?;
    let year = resolve_year(&snapshot, a.year)?;
    let level = a.level.unwrap_or_else(|| bottom_level(&snapshot));
    let sites = select_sites(&snapshot, Some(&level), a.under.as_deref())?;
    let bounds = if a.buckets.is_empty() { DEFAULT_BUCKETS.to_vec() } else { a.buckets };
    let factors = ProfileFactors::default();
    let ctx = ValueContext::new(&snapshot, &presence, year, &factors.index);
    let buckets = bucket_stats(&ctx, &sites, &bounds, &a.value)?;
    let chains = chain_profile(&snapshot, &sites, &presence, year, &factors)?;
    let tests = a
        .tests
        .iter()
        .map(|chain| {
            rank_sum_groups(
                &ctx,
                &sites,
                &GroupSelector::Chain { chain: chain.clone() },
                &GroupSelector::NotChain { chain: chain.clone() },
                &ValueSource::PurchasingPowerIndex,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = ProfileReport {
        year,
        level,
        buckets,
        chains,
        tests,
    };
    if a.format == Format::Json {
        return write_json(out, &report);
    }
    let mut b = Table::new(["inhabitants from", "below", "sites", "resolved", "mean"]);
    for k in &report.buckets.buckets {
        b.push([
            k.lo.to_string(),
            if k.hi.is_infinite() { "inf".to_owned() } else { k.hi.to_string() },
            k.count.to_string(),
            k.resolved.to_string(),
            output::opt(k.mean, 2),
        ]);
    }
    let mut c = Table::new(["group", "sites", "purchasing power index", "unemployment rate"]);
    for g in &report.chains {
        c.push([
            g.group.clone(),
            g.sites.to_string(),
            output::opt(g.mean_purchasing_power_index, 2),
            output::opt(g.mean_unemployment_rate, 2),
        ]);
    }
    let mut r = Table::new(["first", "second", "first mean", "second mean", "z", "p", "mode"]);
    for t in &report.tests {
        r.push([
            t.first.clone(),
            t.second.clone(),
            output::fixed(t.first_mean, 2),
            output::fixed(t.second_mean, 2),
            output::fixed(t.test.z, 3),
            format!("{:.3e}", t.test.p_value),
            format!("{:?}", t.test.mode),
        ]);
    }
    write_table(out, &b, a.format)?;
    if a.format == Format::Table {
        writeln!(out)?;
    }
    write_table(out, &c, a.format)?;
    if !report.tests.is_empty() {
        if a.format == Format::Table {
            writeln!(out)?;
        }
        write_table(out, &r, a.format)?;
    }
    Ok(())
}

fn cmd_serve(a: ServeArgs, err: &mut dyn Write) -> Result<(), CliError> {
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    let service = Service::empty();
    if let Err(e) = service.load_snapshot(&a.manifest) {
        if let Some(report) = e.report() {
            for line in &report.fatal {
                let _ = writeln!(err, "  {line}");
            }
        }
        return Err(e.into());
    }
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(siteselect_service::serve(service, a.addr))?;
    Ok(())
}

fn cmd_generate(a: GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    match a.kind {
        FixtureKind::Synthetic => {
            let country = synthetic_country(&SyntheticConfig::with_seed(a.seed));
            let manifest = country.dataset.write_to(&a.out)?;
            writeln!(out, "{}", manifest.display())?;
        }
        FixtureKind::CaseStudy => match &a.chain {
            Some(chain) => {
                let counts = case_study_counts(chain).ok_or_else(|| CliError::UnknownChain(chain.clone()))?;
                let manifest = case_study_dataset(&counts, a.seed).write_to(&a.out)?;
                writeln!(out, "{}", manifest.display())?;
            }
            None => {
                for counts in &CASE_STUDY {
                    let dir = a.out.join(counts.chain.to_lowercase());
                    let manifest = case_study_dataset(counts, a.seed).write_to(dir)?;
                    writeln!(out, "{}", manifest.display())?;
                }
            }
        },
    }
    Ok(())
}
