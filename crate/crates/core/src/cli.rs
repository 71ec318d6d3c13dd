//! Command-line front end.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::api::{self, ApiConfig};
use crate::bench::{self, BenchConfig, GridPairing};
use crate::catalog::{load_catalog, Catalog};
use crate::combination::Operator;
use crate::error::Error;
use crate::formation::Formation;
use crate::profile::{Mode, PreferencesDocument};
use crate::session::{Clock, EventLog, Session};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NO_FEASIBLE: i32 = 3;

pub const LOG_ENV: &str = "FORMATION_GENIUS_LOG";

#[derive(Debug, Parser)]
#[command(name = "formation-genius", version, about = "Rank VM image and cloud service combinations for multi-component migrations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank image/service combinations for one component.
    Evaluate(EvaluateArgs),
    /// Run a scripted migration over every component.
    Migrate(MigrateArgs),
    /// Time synthetic migrations and write CSV and a fitted summary.
    Bench(BenchArgs),
    /// Check catalog, formation, preferences or event-log files.
    Validate(ValidateArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Stepwise,
    Integrated,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OperatorArg {
    Sum,
    Product,
}

/// Overrides applied on top of a preferences document.
#[derive(Debug, Clone, Args)]
pub struct PolicyArgs {
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub operator: Option<OperatorArg>,
    /// Do not divide by the normalized network-cost delta.
    #[arg(long)]
    pub no_network_delta: bool,
}

impl PolicyArgs {
    fn apply(&self, doc: &mut PreferencesDocument) {
        match self.mode {
            Some(ModeArg::Stepwise) => doc.mode = Mode::Stepwise,
            Some(ModeArg::Integrated) => doc.mode = Mode::Integrated,
            None => {}
        }
        match self.operator {
            Some(OperatorArg::Sum) => doc.combination.operator = Operator::Sum,
            Some(OperatorArg::Product) => doc.combination.operator = Operator::Product,
            None => {}
        }
        if self.no_network_delta {
            doc.combination.apply_network_delta = false;
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub formation: PathBuf,
    #[arg(long)]
    pub component: String,
    #[arg(long)]
    pub prefs: Option<PathBuf>,
    /// Event log of an earlier session whose commits constrain this evaluation.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep only the first N combinations in the output.
    #[arg(long)]
    pub top: Option<usize>,
    #[command(flatten)]
    pub policy: PolicyArgs,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum AutoCommit {
    #[default]
    Top,
}

/// Migration script: optional component order, default preferences and
/// per-component overrides.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MigrationScript {
    #[serde(default)]
    pub order: Option<Vec<String>>,
    #[serde(default)]
    pub defaults: Option<PreferencesDocument>,
    #[serde(default)]
    pub components: BTreeMap<String, PreferencesDocument>,
}

#[derive(Debug, Args)]
pub struct MigrateArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub formation: PathBuf,
    #[arg(long, conflicts_with = "prefs")]
    pub script: Option<PathBuf>,
    /// Preferences used for every component.
    #[arg(long)]
    pub prefs: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "top")]
    pub auto_commit: AutoCommit,
    /// Where to write the session event log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "migration")]
    pub session_id: String,
    #[command(flatten)]
    pub policy: PolicyArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub images: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub services: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub components: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub providers: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    /// Draw deployability at random instead of allowing every pair.
    #[arg(long)]
    pub sparse_d: bool,
    /// Pair image and service counts element-wise instead of crosswise.
    #[arg(long)]
    pub zip: bool,
    /// Score pairs on all cores.
    #[arg(long)]
    pub parallel: bool,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub formation: Option<PathBuf>,
    #[arg(long)]
    pub prefs: Option<PathBuf>,
    /// Replay an event log against the catalog.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 3600)]
    pub ttl_secs: u64,
}

pub fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env(LOG_ENV)
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Parses arguments, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(Error::NoFeasibleCombination(_)) => EXIT_NO_FEASIBLE,
        Some(err) if err.is_validation() || matches!(err, Error::Io { .. } | Error::UnknownComponent(_)) => {
            EXIT_VALIDATION
        }
        _ => EXIT_FAILURE,
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Evaluate(a) => evaluate(a),
        Command::Migrate(a) => migrate(a),
        Command::Bench(a) => run_bench(a),
        Command::Validate(a) => validate(a),
        Command::Serve(a) => serve(a),
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| Error::Io { path: p.to_path_buf(), source }.into()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn pretty(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn load_inputs(catalog: &Path, formation: &Path) -> anyhow::Result<(Arc<Catalog>, Formation)> {
    let catalog = load_catalog(catalog)?;
    for w in catalog.warnings() {
        tracing::warn!("catalog: {w}");
    }
    let formation = Formation::from_json(&read(formation)?)?;
    for w in formation.warnings() {
        tracing::warn!("formation: {w}");
    }
    Ok((Arc::new(catalog), formation))
}

fn load_prefs(path: Option<&Path>) -> anyhow::Result<PreferencesDocument> {
    Ok(match path {
        Some(p) => PreferencesDocument::from_json(&read(p)?)?,
        None => PreferencesDocument::default(),
    })
}

fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let (catalog, formation) = load_inputs(&a.catalog, &a.formation)?;
    let mut prefs = load_prefs(a.prefs.as_deref())?;
    a.policy.apply(&mut prefs);
    let mut session = match &a.resume {
        Some(log) => {
            let log = EventLog::from_json(&read(log)?)?;
            let s = Session::replay(catalog, &log)?;
            if s.formation().to_document() != formation.to_document() {
                anyhow::bail!(Error::validation("event log", &log.session_id, "formation", "differs from --formation"));
            }
            s
        }
        None => Session::new("evaluate", catalog, formation, Clock::Logical(0)),
    };
    session.select_component(&a.component)?;
    session.set_preferences(&a.component, prefs)?;
    let rec = session.evaluate()?;
    for w in &rec.warnings {
        tracing::warn!("{w}");
    }
    let rec = match a.top {
        Some(n) => rec.truncated(n),
        None => rec.clone(),
    };
    write_output(a.out.as_deref(), &pretty(&rec))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct MigrationSummary<'a> {
    session_id: &'a str,
    commits: &'a [crate::session::HistoryEntry],
}

fn migrate(a: MigrateArgs) -> anyhow::Result<()> {
    let (catalog, formation) = load_inputs(&a.catalog, &a.formation)?;
    let script = match (&a.script, &a.prefs) {
        (Some(p), _) => serde_json::from_str::<MigrationScript>(&read(p)?).map_err(|e| Error::parse("migration script", e))?,
        (None, Some(p)) => MigrationScript {
            defaults: Some(PreferencesDocument::from_json(&read(p)?)?),
            ..Default::default()
        },
        (None, None) => MigrationScript::default(),
    };
    let order: Vec<String> = match &script.order {
        Some(o) => o.clone(),
        None => formation.components().iter().map(|c| c.id.clone()).collect(),
    };
    for id in script.components.keys() {
        if formation.component(id).is_none() {
            return Err(Error::UnknownComponent(id.clone()).into());
        }
    }
    let mut session = Session::new(a.session_id.clone(), catalog, formation, Clock::Logical(0));
    for component in &order {
        session.select_component(component)?;
        let mut prefs = script
            .components
            .get(component)
            .or(script.defaults.as_ref())
            .cloned()
            .unwrap_or_default();
        a.policy.apply(&mut prefs);
        session.set_preferences(component, prefs)?;
        let rec = session.evaluate()?;
        let AutoCommit::Top = a.auto_commit;
        let best = rec.best().ok_or_else(|| Error::NoFeasibleCombination(component.clone()))?.clone();
        tracing::info!(component = %component, image = %best.image_id, service = %best.service_id, "commit");
        session.commit(&best.image_id, &best.service_id, None)?;
    }
    if let Some(log) = &a.log {
        fs::write(log, session.event_log().to_json()).map_err(|source| Error::Io { path: log.clone(), source })?;
    }
    let summary = MigrationSummary {
        session_id: session.id(),
        commits: session.history(),
    };
    write_output(a.out.as_deref(), &pretty(&summary))
}

fn run_bench(a: BenchArgs) -> anyhow::Result<()> {
    let config = BenchConfig {
        image_counts: a.images,
        service_counts: a.services,
        component_counts: a.components,
        provider_count: a.providers,
        seed: a.seed,
        repetitions: a.repetitions,
        full_d: !a.sparse_d,
        pairing: if a.zip { GridPairing::Zip } else { GridPairing::Product },
        parallel: a.parallel,
    };
    let records = bench::run_scaling(&config)?;
    let mut csv = Vec::new();
    bench::write_csv(&records, &mut csv)?;
    match &a.csv {
        Some(p) => fs::write(p, &csv).map_err(|source| Error::Io { path: p.clone(), source })?,
        None => std::io::stdout().lock().write_all(&csv)?,
    }
    let summary = serde_json::json!({ "config": config, "summary": bench::summarize(&records) });
    match &a.summary {
        Some(p) => fs::write(p, pretty(&summary)).map_err(|source| Error::Io { path: p.clone(), source })?,
        None if a.csv.is_some() => write_output(None, &pretty(&summary))?,
        None => {}
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> anyhow::Result<()> {
    let catalog = Arc::new(load_catalog(&a.catalog)?);
    let mut report = vec![format!(
        "catalog: {} providers, {} images, {} services",
        catalog.providers().len(),
        catalog.images().len(),
        catalog.services().len()
    )];
    report.extend(catalog.warnings().iter().map(|w| format!("catalog warning: {w}")));
    if let Some(p) = &a.formation {
        let f = Formation::from_json(&read(p)?)?;
        report.push(format!("formation: {} components, {} links", f.components().len(), f.links().len()));
        report.extend(f.warnings().iter().map(|w| format!("formation warning: {w}")));
    }
    if let Some(p) = &a.prefs {
        let doc = PreferencesDocument::from_json(&read(p)?)?;
        let profile = crate::profile::PreferenceProfile::resolve(&doc, &catalog)?;
        report.push("preferences: ok".into());
        report.extend(profile.warnings.iter().map(|w| format!("preferences warning: {w}")));
    }
    if let Some(p) = &a.log {
        let log = EventLog::from_json(&read(p)?)?;
        let s = Session::replay(catalog.clone(), &log)?;
        report.push(format!("event log: {} events replayed, {} commits", log.events.len(), s.history().len()));
    }
    let mut text = report.join("\n");
    text.push('\n');
    write_output(None, &text)
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let catalog = Arc::new(load_catalog(&a.catalog).with_context(|| "loading catalog for the API")?);
    let config = ApiConfig {
        session_ttl: Duration::from_secs(a.ttl_secs),
        log_dir: a.log_dir,
        logical_clock: false,
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(api::serve(a.addr, catalog, config))
}
