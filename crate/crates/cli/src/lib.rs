//! Command-line front end for the `jifadjust` library.
//!
//! Exit codes: 0 on success (flagged rows included), 2 for unreadable or
//! malformed input, 3 for invalid options.

pub mod svg;

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use jifadjust::curves::{
    cumulative, detect_anomalous_volumes, mean_accrual_curve, observed_volumes, standardize_to_age2, volume_self_rates,
    AnomalyFinding, AnomalyThresholds, ClassThresholds, CountBasis, CurveError, JournalClass,
};
use jifadjust::ledger::{
    ingest_citation_csv, parse_alias_csv, parse_publication_csv, profiles_to_csv, strip_self_references, AliasMap,
    LedgerError, Profiles, PublicationCounts,
};
use jifadjust::metrics::{round_to, WindowPolicy};
use jifadjust::report::{number_text, REPORT_COLUMNS};
use jifadjust::synth::{fixtures, generate_profile, SynthError, SynthSpec};
use jifadjust::{compute_report, AccrualCurve, IndicatorReport, JournalId};

use svg::{emit_svg_chart, Series};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "jifadjust",
    version,
    about = "Journal impact indicators from citation ledgers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Every indicator for every cited journal.
    Report(ReportArgs),
    /// Impact factors before and after half-life scaling, with ranks.
    Adjust(ReportArgs),
    /// Per-volume accrual curves and anomalies for one journal.
    Curves(CurvesArgs),
    /// Expand a synthetic spec into ledger files.
    Synth(SynthArgs),
    /// Parse the inputs and summarize them.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChartKind {
    Raw,
    Cumulative,
    Standardized,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Citation ledger CSV.
    #[arg(long)]
    pub citations: PathBuf,
    /// Citeable-item counts CSV.
    #[arg(long)]
    pub publications: Option<PathBuf>,
    /// Journal alias CSV.
    #[arg(long)]
    pub aliases: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    /// Volume ages counted by the impact factor.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub window: Vec<u32>,
    /// Oldest age included in the coverage denominator.
    #[arg(long, default_value_t = 20)]
    pub horizon: u32,
    /// Share of citations the adjusted window should capture.
    #[arg(long, default_value_t = 0.5)]
    pub quantile: f64,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Round numeric output to this many decimal places.
    #[arg(long)]
    pub decimals: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Evaluation year.
    #[arg(long)]
    pub year: Option<i32>,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Drop self-citations before computing anything.
    #[arg(long)]
    pub strip_self: bool,
    /// Coverage at or above which a journal is a Hare.
    #[arg(long, default_value_t = 0.25)]
    pub hare: f64,
    /// Coverage at or below which a journal is a Tortoise.
    #[arg(long, default_value_t = 0.15)]
    pub tortoise: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Journal to plot.
    #[arg(long)]
    pub journal: String,
    /// Last citing year to include; defaults to the latest in the ledger.
    #[arg(long)]
    pub year: Option<i32>,
    #[arg(long)]
    pub strip_self: bool,
    /// Also draw the volumes as an SVG chart.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Curve drawn in the SVG chart.
    #[arg(long, value_enum, default_value_t = ChartKind::Standardized)]
    pub chart: ChartKind,
    /// Self-citation share that flags a volume.
    #[arg(long, default_value_t = 0.5)]
    pub self_threshold: f64,
    /// Distance from the median standardized curve, in percentage points,
    /// that flags a volume.
    #[arg(long, default_value_t = 25.0)]
    pub deviation_threshold: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Bundled fixture name.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    pub fixture: Option<String>,
    /// Spec file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Directory receiving citations.csv and publications.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub citations: Option<PathBuf>,
    #[arg(long)]
    pub publications: Option<PathBuf>,
    #[arg(long)]
    pub aliases: Option<PathBuf>,
    /// Synthetic spec file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

/// Runs one command. Primary output goes to `out` (or the `--output` file),
/// warnings to `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Report(args) => cmd_report(args, false, out, err),
        Command::Adjust(args) => cmd_report(args, true, out, err),
        Command::Curves(args) => cmd_curves(args, out, err),
        Command::Synth(args) => cmd_synth(args),
        Command::Validate(args) => cmd_validate(args, out),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn ledger_error(path: &Path, e: LedgerError) -> CliError {
    match e {
        LedgerError::Parse { line, reason } => CliError::Input(format!("{}:{line}: {reason}", path.display())),
        LedgerError::Io(e) => CliError::Input(format!("{}: {e}", path.display())),
    }
}

fn read_aliases(path: Option<&PathBuf>) -> Result<AliasMap> {
    match path {
        Some(p) => parse_alias_csv(open(p)?).map_err(|e| ledger_error(p, e)),
        None => Ok(AliasMap::new()),
    }
}

fn read_profiles(path: &Path, aliases: &AliasMap) -> Result<Profiles> {
    ingest_citation_csv(open(path)?, aliases).map_err(|e| ledger_error(path, e))
}

fn read_publications(path: &Path) -> Result<PublicationCounts> {
    parse_publication_csv(open(path)?).map_err(|e| ledger_error(path, e))
}

fn emit(output: Option<&PathBuf>, text: &str, out: &mut dyn Write) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text),
        None => out.write_all(text.as_bytes()),
    }
    .map_err(|e| CliError::Input(format!("cannot write output: {e}")))
}

fn warn(err: &mut dyn Write, message: impl std::fmt::Display) {
    let _ = writeln!(err, "warning: {message}");
}

fn policy(args: &PolicyArgs) -> Result<WindowPolicy> {
    WindowPolicy::new(args.window.iter().copied(), args.horizon, args.quantile)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn check_decimals(output: &OutputArgs) -> Result<()> {
    match output.decimals {
        Some(d) if d > 15 => Err(CliError::Config(format!("--decimals {d} exceeds 15"))),
        _ => Ok(()),
    }
}

/// Report row: the indicator fields followed by the classification.
#[derive(Serialize)]
struct ReportRow<'a> {
    #[serde(flatten)]
    indicators: &'a IndicatorReport,
    class: Option<JournalClass>,
}

#[derive(Serialize)]
struct AdjustRow<'a> {
    journal: &'a JournalId,
    eval_year: i32,
    jif: Option<f64>,
    coverage: Option<f64>,
    scaling_factor: Option<f64>,
    adjusted_jif: Option<f64>,
    jif_rank: Option<usize>,
    adjusted_rank: Option<usize>,
    class: Option<JournalClass>,
    flags: &'a std::collections::BTreeSet<jifadjust::Flag>,
}

const ADJUST_COLUMNS: [&str; 10] = [
    "journal",
    "eval_year",
    "jif",
    "coverage",
    "scaling_factor",
    "adjusted_jif",
    "jif_rank",
    "adjusted_rank",
    "class",
    "flags",
];

/// 1-based descending ranks. Undefined values are unranked; ties keep
/// input order.
fn ranks(values: &[Option<f64>]) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    order.sort_by(|&a, &b| values[b].unwrap().total_cmp(&values[a].unwrap()));
    let mut out = vec![None; values.len()];
    for (rank, i) in order.into_iter().enumerate() {
        out[i] = Some(rank + 1);
    }
    out
}

fn class_text(class: Option<JournalClass>) -> String {
    class.map(|c| c.to_string()).unwrap_or_default()
}

fn json_text<T: Serialize + ?Sized>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report values serialize");
    text.push('\n');
    text
}

fn cmd_report(args: &ReportArgs, adjust: bool, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let policy = policy(&args.policy)?;
    let classes = ClassThresholds::new(args.hare, args.tortoise).map_err(|e| CliError::Config(e.to_string()))?;
    check_decimals(&args.output)?;
    let year = args.year.ok_or_else(|| CliError::Config("--year is required".into()))?;
    let pubs_path = args
        .input
        .publications
        .as_ref()
        .ok_or_else(|| CliError::Config("--publications is required".into()))?;

    let aliases = read_aliases(args.input.aliases.as_ref())?;
    let profiles = read_profiles(&args.input.citations, &aliases)?;
    let pubs = read_publications(pubs_path)?.with_aliases(&aliases);

    let mut rows = Vec::with_capacity(profiles.len());
    for profile in profiles.values() {
        let stripped;
        let profile = if args.strip_self {
            stripped = strip_self_references(profile);
            &stripped
        } else {
            profile
        };
        let report = compute_report(profile, &pubs, year, &policy, &classes);
        for w in &report.warnings {
            warn(err, w);
        }
        let indicators = match args.output.decimals {
            Some(d) => report.indicators.rounded(d),
            None => report.indicators,
        };
        rows.push((indicators, report.class));
    }

    let text = if adjust {
        adjust_text(&rows, args.output.format, args.output.decimals)
    } else {
        report_text(&rows, args.output.format)
    };
    emit(args.output.output.as_ref(), &text, out)
}

fn report_text(rows: &[(IndicatorReport, Option<JournalClass>)], format: Format) -> String {
    match format {
        Format::Json => {
            let rows: Vec<ReportRow> = rows
                .iter()
                .map(|(indicators, class)| ReportRow {
                    indicators,
                    class: *class,
                })
                .collect();
            json_text(&rows)
        }
        Format::Csv => {
            let mut text = REPORT_COLUMNS.join(",");
            text.push_str(",class\n");
            for (indicators, class) in rows {
                let mut fields = indicators.csv_fields();
                fields.push(class_text(*class));
                text.push_str(&fields.join(","));
                text.push('\n');
            }
            text
        }
    }
}

fn adjust_text(rows: &[(IndicatorReport, Option<JournalClass>)], format: Format, decimals: Option<u32>) -> String {
    let jif: Vec<Option<f64>> = rows.iter().map(|(r, _)| r.jif).collect();
    let adjusted: Vec<Option<f64>> = rows.iter().map(|(r, _)| r.adjusted_jif).collect();
    let round = |v: &[Option<f64>]| -> Vec<Option<f64>> {
        v.iter()
            .map(|x| x.map(|x| decimals.map_or(x, |d| round_to(x, d))))
            .collect()
    };
    let jif_rank = ranks(&round(&jif));
    let adjusted_rank = ranks(&round(&adjusted));
    let table: Vec<AdjustRow> = rows
        .iter()
        .enumerate()
        .map(|(i, (r, class))| AdjustRow {
            journal: &r.journal,
            eval_year: r.eval_year,
            jif: r.jif,
            coverage: r.coverage,
            scaling_factor: r.scaling_factor,
            adjusted_jif: r.adjusted_jif,
            jif_rank: jif_rank[i],
            adjusted_rank: adjusted_rank[i],
            class: *class,
            flags: &r.flags,
        })
        .collect();
    match format {
        Format::Json => json_text(&table),
        Format::Csv => {
            let mut text = ADJUST_COLUMNS.join(",");
            text.push('\n');
            let rank = |r: Option<usize>| r.map(|r| r.to_string()).unwrap_or_default();
            for (row, (report, _)) in table.iter().zip(rows) {
                let fields = [
                    row.journal.to_string(),
                    row.eval_year.to_string(),
                    number_text(row.jif),
                    number_text(row.coverage),
                    number_text(row.scaling_factor),
                    number_text(row.adjusted_jif),
                    rank(row.jif_rank),
                    rank(row.adjusted_rank),
                    class_text(row.class),
                    report.flags_joined(),
                ];
                text.push_str(&fields.join(","));
                text.push('\n');
            }
            text
        }
    }
}

/// Every curve drawn for one volume.
struct VolumeCurves {
    raw: AccrualCurve,
    cumulative: AccrualCurve,
    standardized: Option<AccrualCurve>,
}

fn cmd_curves(args: &CurvesArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    if !(0.0..=1.0).contains(&args.self_threshold) {
        return Err(CliError::Config(format!(
            "--self-threshold {} outside [0, 1]",
            args.self_threshold
        )));
    }
    if args.deviation_threshold.is_nan() || args.deviation_threshold <= 0.0 {
        return Err(CliError::Config(format!(
            "--deviation-threshold {} must be positive",
            args.deviation_threshold
        )));
    }
    check_decimals(&args.output)?;
    let thresholds = AnomalyThresholds {
        self_rate: args.self_threshold,
        deviation_pp: args.deviation_threshold,
    };

    let aliases = read_aliases(args.input.aliases.as_ref())?;
    let profiles = read_profiles(&args.input.citations, &aliases)?;
    if let Some(p) = &args.input.publications {
        read_publications(p)?;
    }
    let id = JournalId::new(&args.journal)
        .map(|id| aliases.resolve(id))
        .ok_or_else(|| CliError::Config("--journal is empty".into()))?;
    let profile = profiles
        .get(&id)
        .ok_or_else(|| CliError::Input(format!("unknown journal `{}`", args.journal)))?;
    let profile = if args.strip_self {
        strip_self_references(profile)
    } else {
        profile.clone()
    };
    let through = match args.year {
        Some(y) => y,
        None => profile.last_citing_year().expect("profiles are never empty"),
    };

    let raw = observed_volumes(&profile, through, CountBasis::Total);
    let mut volumes = Vec::with_capacity(raw.len());
    for r in &raw {
        let cum = cumulative(r).expect("raw curve");
        let standardized = match standardize_to_age2(&cum) {
            Ok(s) => Some(s),
            Err(e) => {
                warn(err, describe_curve_error(&e));
                None
            }
        };
        volumes.push(VolumeCurves {
            raw: r.clone(),
            cumulative: cum,
            standardized,
        });
    }
    let horizon = raw.iter().filter_map(AccrualCurve::max_age).max();
    let mean = horizon.and_then(|h| mean_accrual_curve(&raw, h).ok());

    let standardized: Vec<AccrualCurve> = volumes.iter().filter_map(|v| v.standardized.clone()).collect();
    let anomalies = match detect_anomalous_volumes(&standardized, &volume_self_rates(&profile), &thresholds) {
        Ok(found) => found,
        Err(e) => {
            warn(err, format!("{id}: anomaly detection skipped: {e}"));
            Vec::new()
        }
    };

    let decimals = args.output.decimals;
    let text = match args.output.format {
        Format::Csv => {
            for a in &anomalies {
                let _ = writeln!(
                    err,
                    "anomaly: {} {} age {}: {} ({} pp)",
                    a.journal,
                    a.pub_year,
                    a.age,
                    a.reason,
                    round_to(a.deviation, 1)
                );
            }
            curves_csv(&volumes, mean.as_ref(), decimals)
        }
        Format::Json => curves_json(&id, through, &volumes, mean.as_ref(), &anomalies, decimals),
    };
    emit(args.output.output.as_ref(), &text, out)?;

    if let Some(path) = &args.svg {
        let series: Vec<Series> = volumes
            .iter()
            .filter_map(|v| {
                let curve = match args.chart {
                    ChartKind::Raw => Some(&v.raw),
                    ChartKind::Cumulative => Some(&v.cumulative),
                    ChartKind::Standardized => v.standardized.as_ref(),
                }?;
                let points = curve.values.iter().enumerate().map(|(a, &y)| (a as f64, y)).collect();
                Some(Series::new(
                    v.raw.pub_year.map(|y| y.to_string()).unwrap_or_default(),
                    points,
                ))
            })
            .collect();
        let y_label = match args.chart {
            ChartKind::Raw => "citations",
            ChartKind::Cumulative => "cumulative citations",
            ChartKind::Standardized => "cumulative citations (% of age 2)",
        };
        let chart = emit_svg_chart(&series, "age (years since publication)", y_label)
            .map_err(|e| CliError::Input(format!("{id}: cannot draw chart: {e}")))?;
        std::fs::write(path, chart).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn describe_curve_error(e: &CurveError) -> String {
    match e {
        CurveError::TooShort {
            journal,
            pub_year: Some(y),
            ..
        } => {
            format!("{journal} {y}: too young to standardize")
        }
        CurveError::DegenerateVolume {
            journal,
            pub_year: Some(y),
        } => {
            format!("{journal} {y}: no citations through age 2; not standardized")
        }
        other => other.to_string(),
    }
}

fn value_text(v: f64, decimals: Option<u32>) -> String {
    number_text(Some(decimals.map_or(v, |d| round_to(v, d))))
}

fn curves_csv(volumes: &[VolumeCurves], mean: Option<&AccrualCurve>, decimals: Option<u32>) -> String {
    let mut text = String::from("journal,pub_year,kind,age,value,observations\n");
    let mut rows = |curve: &AccrualCurve, kind: &str| {
        let year = curve.pub_year.map(|y| y.to_string()).unwrap_or_default();
        for (age, &v) in curve.values.iter().enumerate() {
            let obs = curve
                .observations
                .as_ref()
                .map(|o| o[age].to_string())
                .unwrap_or_default();
            text.push_str(&format!(
                "{},{year},{kind},{age},{},{obs}\n",
                curve.journal,
                value_text(v, decimals)
            ));
        }
    };
    for v in volumes {
        rows(&v.raw, "raw");
        rows(&v.cumulative, "cumulative");
        if let Some(s) = &v.standardized {
            rows(s, "standardized");
        }
    }
    if let Some(m) = mean {
        rows(m, "mean");
    }
    text
}

fn curves_json(
    journal: &JournalId,
    through: i32,
    volumes: &[VolumeCurves],
    mean: Option<&AccrualCurve>,
    anomalies: &[AnomalyFinding],
    decimals: Option<u32>,
) -> String {
    let values = |c: &AccrualCurve| -> Vec<f64> {
        c.values
            .iter()
            .map(|&v| decimals.map_or(v, |d| round_to(v, d)))
            .collect()
    };
    let volumes: Vec<serde_json::Value> = volumes
        .iter()
        .map(|v| {
            json!({
                "pub_year": v.raw.pub_year,
                "raw": values(&v.raw),
                "cumulative": values(&v.cumulative),
                "standardized": v.standardized.as_ref().map(values),
            })
        })
        .collect();
    let mean = mean.map(|m| json!({ "values": values(m), "observations": m.observations }));
    json_text(&json!({
        "journal": journal,
        "through_year": through,
        "volumes": volumes,
        "mean": mean,
        "anomalies": anomalies,
    }))
}

fn synth_spec_error(source: &str, e: SynthError) -> CliError {
    match e {
        SynthError::Parse { line, reason } => CliError::Input(format!("{source}:{line}: {reason}")),
        other => CliError::Input(format!("{source}: {other}")),
    }
}

fn load_spec(path: &Path) -> Result<SynthSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let spec: SynthSpec = text
        .parse()
        .map_err(|e| synth_spec_error(&path.display().to_string(), e))?;
    spec.validate()
        .map_err(|e| synth_spec_error(&path.display().to_string(), e))?;
    Ok(spec)
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let spec = match (&args.fixture, &args.spec) {
        (Some(name), None) => fixtures::load(name).ok_or_else(|| {
            CliError::Config(format!(
                "unknown fixture `{name}`; available: {}",
                fixtures::NAMES.join(", ")
            ))
        })?,
        (None, Some(path)) => load_spec(path)?,
        _ => return Err(CliError::Config("give exactly one of --fixture and --spec".into())),
    };
    let (profile, pubs) = generate_profile(&spec).map_err(|e| synth_spec_error(&spec.journal, e))?;
    let write = |name: &str, text: String| -> Result<()> {
        let path = args.out.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    };
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::Input(format!("{}: {e}", args.out.display())))?;
    write("citations.csv", profiles_to_csv([&profile]))?;
    write("publications.csv", pubs.to_csv())?;
    Ok(())
}

fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<()> {
    if args.citations.is_none() && args.publications.is_none() && args.aliases.is_none() && args.spec.is_none() {
        return Err(CliError::Config("nothing to validate".into()));
    }
    let mut text = String::new();
    let aliases = read_aliases(args.aliases.as_ref())?;
    if args.aliases.is_some() {
        text.push_str(&format!("aliases: {} entries\n", aliases.len()));
    }
    if let Some(path) = &args.citations {
        let profiles = read_profiles(path, &aliases)?;
        let cells: usize = profiles.values().map(|p| p.cell_count()).sum();
        let citations: u64 = profiles.values().map(|p| p.total_citations()).sum();
        text.push_str(&format!(
            "citations: {} cited journals, {cells} cells, {citations} citations\n",
            profiles.len()
        ));
    }
    if let Some(path) = &args.publications {
        let pubs = read_publications(path)?;
        text.push_str(&format!("publications: {} journal-years\n", pubs.len()));
    }
    if let Some(path) = &args.spec {
        let spec = load_spec(path)?;
        text.push_str(&format!(
            "spec: {} {}-{}, kernel {}\n",
            spec.journal, spec.first_year, spec.last_year, spec.kernel
        ));
    }
    emit(None, &text, out)
}
