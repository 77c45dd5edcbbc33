//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 configuration or environment
//! error, 3 endpoint-failure fraction above the configured threshold.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::geometry::{self, EmbeddingDump};
use crate::oracle;
use crate::taskgen::ScoringKey;
use crate::topology::{adjacency, Rule, Topology, TopologyKind};

use super::aggregate::{aggregate_with, GroupSummary};
use super::config::ExperimentConfig;
use super::records::{read_records, RecordWriter};
use super::report;
use super::runner::{self, RunOptions};
use super::HarnessError;

#[derive(Parser)]
#[command(
    name = "graphtrace",
    version,
    about = "Generate, run, score, and analyze graph-tracing and world-modeling tasks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Salt mixed into derived replicate seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Generate records without any network calls.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Continue an interrupted run, skipping completed records.
    #[arg(long, global = true)]
    resume: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Emit prompt bundles as JSONL without running anything.
    Gen(GenArgs),
    /// Execute an experiment against its configured endpoint.
    Run(RunArgs),
    /// Re-score stored responses from their provenance.
    Score(ScoreArgs),
    /// Compute representation metrics from a hidden-state dump.
    Geometry(GeometryArgs),
    /// Print the analytic naive-baseline accuracy.
    Baseline(BaselineArgs),
    /// Aggregate records and emit report files.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output path for bundle JSONL; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Process at most this many replicates in this invocation.
    #[arg(long)]
    limit: Option<usize>,
    /// Dry run that scores each bundle's own correct answer; must yield
    /// accuracy 1.0.
    #[arg(long)]
    self_test: bool,
}

#[derive(Args)]
struct ScoreArgs {
    /// Record file to re-score.
    #[arg(long)]
    records: PathBuf,
    /// Where to write re-scored records.
    #[arg(long)]
    out: PathBuf,
    /// Custom wordlist file matching the records' wordlist id.
    #[arg(long)]
    wordlist: Option<PathBuf>,
    /// Score state-space descriptions by literal topology mention instead
    /// of leaving them for a judge.
    #[arg(long)]
    describe_local: bool,
}

#[derive(Args)]
struct GeometryArgs {
    /// Dump directory (manifest.txt, layer_*.f32, alignment.i32).
    #[arg(long)]
    dump: PathBuf,
    /// Topology the dump was collected over, e.g. grid5x5, grid25, line16.
    #[arg(long)]
    topology: String,
    /// Comma-separated layer ids; all manifest layers when omitted.
    #[arg(long)]
    layers: Option<String>,
    #[arg(long, default_value_t = 10)]
    stride: usize,
    #[arg(long, default_value_t = geometry::DEFAULT_WINDOW)]
    width: usize,
    /// Write the metric curve as long-format CSV here; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Walk token region `start..end` for relative energy.
    #[arg(long)]
    walk_region: Option<String>,
    /// Few-shot token region `start..end` for relative energy.
    #[arg(long)]
    fewshot_region: Option<String>,
}

#[derive(Args)]
struct BaselineArgs {
    /// Topology, e.g. line16, line25, grid4x4, grid25.
    #[arg(long)]
    topology: String,
    /// Rule: one_step, two_step, or three_step.
    #[arg(long)]
    rule: String,
}

#[derive(Args)]
struct ReportArgs {
    /// Record file to aggregate.
    #[arg(long)]
    records: PathBuf,
    /// Directory for summary.csv.
    #[arg(long)]
    out_dir: PathBuf,
    /// Count endpoint failures as incorrect answers.
    #[arg(long)]
    count_failures_as_incorrect: bool,
}

/// Parse a topology name: `lineN`, `gridNxN`, or `gridN` where N is a side
/// length or one of the canonical state counts 16 and 25.
pub fn parse_topology(text: &str) -> Result<Topology, HarnessError> {
    let usage = || {
        HarnessError::Usage(format!(
            "unrecognized topology '{text}'; expected e.g. line16, line25, grid4x4, grid25"
        ))
    };
    let normalized = text.trim().to_ascii_lowercase().replace('-', "");
    let build = |kind, size| Topology::new(kind, size).map_err(|_| usage());
    if let Some(rest) = normalized.strip_prefix("line") {
        let n: usize = rest.parse().map_err(|_| usage())?;
        return build(TopologyKind::Line, n);
    }
    if let Some(rest) = normalized.strip_prefix("grid") {
        if let Some((a, b)) = rest.split_once('x') {
            let a: usize = a.parse().map_err(|_| usage())?;
            let b: usize = b.parse().map_err(|_| usage())?;
            if a != b {
                return Err(usage());
            }
            return build(TopologyKind::Grid, a);
        }
        let n: usize = rest.parse().map_err(|_| usage())?;
        // canonical state-count aliases, otherwise a side length
        let side = match n {
            16 => 4,
            25 => 5,
            other => other,
        };
        return build(TopologyKind::Grid, side);
    }
    Err(usage())
}

pub fn parse_rule(text: &str) -> Result<Rule, HarnessError> {
    match text.trim().to_ascii_lowercase().replace('-', "_").as_str() {
        "one_step" | "1_step" => Ok(Rule::OneStep),
        "two_step" | "2_step" => Ok(Rule::TwoStep),
        "three_step" | "3_step" => Ok(Rule::ThreeStep),
        other => Err(HarnessError::Usage(format!(
            "unrecognized rule '{other}'; expected one_step, two_step, or three_step"
        ))),
    }
}

fn parse_region(text: &str) -> Result<std::ops::Range<usize>, HarnessError> {
    let usage = || HarnessError::Usage(format!("bad region '{text}'; expected start..end"));
    let (start, end) = text.split_once("..").ok_or_else(usage)?;
    let start: usize = start.trim().parse().map_err(|_| usage())?;
    let end: usize = end.trim().parse().map_err(|_| usage())?;
    if start >= end {
        return Err(usage());
    }
    Ok(start..end)
}

fn require_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, HarnessError> {
    let path = path
        .as_ref()
        .ok_or_else(|| HarnessError::Usage("--config is required for this command".into()))?;
    ExperimentConfig::load(path)
}

/// Run the CLI and return the process exit code.
pub fn cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version through this path as well
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help { 0 } else { 1 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match &cli.command {
        Command::Gen(args) => gen_command(&cli, args),
        Command::Run(args) => run_command(&cli, args),
        Command::Score(args) => score_command(args),
        Command::Geometry(args) => geometry_command(args),
        Command::Baseline(args) => baseline_command(args),
        Command::Report(args) => report_command(args),
    }
}

fn gen_command(cli: &Cli, args: &GenArgs) -> Result<(), HarnessError> {
    let config = require_config(&cli.config)?;
    let wordlist = runner::load_wordlist(&config)?;
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    for replicate in 0..config.n_replicates {
        let (_, bundle) = runner::replicate_bundle(&config, &wordlist, replicate, cli.seed)?;
        let line = serde_json::to_string(&bundle)
            .map_err(|e| HarnessError::Config(format!("bundle serialization: {e}")))?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn run_command(cli: &Cli, args: &RunArgs) -> Result<(), HarnessError> {
    let config = require_config(&cli.config)?;
    let options = RunOptions {
        dry_run: cli.dry_run,
        resume: cli.resume,
        limit: args.limit,
        self_test: args.self_test,
        seed_salt: cli.seed,
    };
    let summary = runner::run_experiment(&config, &options)?;
    eprintln!(
        "{}: wrote {} records ({} skipped as complete, {} endpoint failures)",
        config.experiment_id, summary.written, summary.skipped_existing, summary.infra_failures
    );
    if summary.written > 0 {
        let rate = summary.infra_failures as f64 / summary.written as f64;
        if rate > config.max_failure_rate {
            return Err(HarnessError::FailuresAboveThreshold {
                failures: summary.infra_failures,
                total: summary.written,
                threshold: config.max_failure_rate,
            });
        }
    }
    Ok(())
}

fn score_command(args: &ScoreArgs) -> Result<(), HarnessError> {
    let records = read_records(&args.records)?;
    let wordlist = match &args.wordlist {
        Some(path) => crate::taskgen::Wordlist::from_file(path)?,
        None => crate::taskgen::Wordlist::bundled().clone(),
    };
    let mut writer = RecordWriter::create_new(&args.out)?;
    let mut rescored = 0usize;
    for mut record in records {
        if let Some(response) = record.response.clone() {
            let bundle =
                crate::taskgen::regenerate(record.condition, &record.provenance, &wordlist)?;
            let score = match &bundle.scoring_key {
                ScoringKey::StateSpace { description } => {
                    if args.describe_local {
                        Some(oracle::score_describe_local(&response, description))
                    } else {
                        record.score.clone()
                    }
                }
                _ => oracle::score_with_key(&response, bundle.condition, &bundle.scoring_key),
            };
            if score.is_some() {
                record.score = score;
                rescored += 1;
            }
        }
        writer.append(&record)?;
    }
    eprintln!("re-scored {rescored} records into {}", args.out.display());
    Ok(())
}

fn geometry_command(args: &GeometryArgs) -> Result<(), HarnessError> {
    let topology = parse_topology(&args.topology)?;
    let dump = EmbeddingDump::load(&args.dump)?;
    let layers: Vec<u32> = match &args.layers {
        Some(text) => text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| HarnessError::Usage(format!("bad layer id '{s}'")))
            })
            .collect::<Result<_, _>>()?,
        None => dump.manifest.layer_ids.clone(),
    };

    if let (Some(walk), Some(fewshot)) = (&args.walk_region, &args.fewshot_region) {
        let adjacency = adjacency(&topology);
        for &layer in &layers {
            let rel = geometry::relative_dirichlet(
                &dump,
                &adjacency,
                parse_region(walk)?,
                parse_region(fewshot)?,
                layer,
                args.width,
            )?;
            println!(
                "layer {layer}: walk_de={:.6} fewshot_de={:.6} ratio={:.6} \
                 uncontextualized_de={:.6} baseline_ratio={:.6} shared_states={}",
                rel.walk_energy,
                rel.fewshot_energy,
                rel.ratio,
                rel.uncontextualized_energy,
                rel.baseline_ratio,
                rel.shared_states.len()
            );
        }
        return Ok(());
    }

    let series = geometry::metric_curve(&dump, &topology, &layers, args.stride, args.width)?;
    match &args.out {
        Some(path) => {
            report::write_plot_data_csv(path, &series)?;
            eprintln!("wrote {} samples to {}", series.samples.len(), path.display());
        }
        None => {
            println!("context_position,layer,dirichlet_energy,distance_correlation");
            for s in &series.samples {
                println!(
                    "{},{},{},{}",
                    s.context_position,
                    s.layer_id,
                    s.dirichlet_energy.map(|v| format!("{v:.6}")).unwrap_or_default(),
                    s.distance_correlation.map(|v| format!("{v:.6}")).unwrap_or_default(),
                );
            }
        }
    }
    Ok(())
}

fn baseline_command(args: &BaselineArgs) -> Result<(), HarnessError> {
    let topology = parse_topology(&args.topology)?;
    let rule = parse_rule(&args.rule)?;
    if !rule.applicable_to(topology.kind) {
        return Err(HarnessError::Usage(format!(
            "rule {} is not applicable to {}",
            rule.name(),
            topology.label()
        )));
    }
    let baseline = oracle::naive_baseline(&topology, rule);
    println!("{:.1}%", baseline * 100.0);
    Ok(())
}

fn summary_line(s: &GroupSummary) -> String {
    format!(
        "{} {:?} {} {} ctx={}: accuracy {:.3} [{:.3}, {:.3}] over {} scored ({} records, {} failures)",
        s.model,
        s.condition,
        s.topology.label(),
        s.rule.map(|r| r.name()).unwrap_or("-"),
        s.context_length,
        s.accuracy,
        s.wilson_low,
        s.wilson_high,
        s.scored,
        s.total,
        s.infra_failures
    )
}

fn report_command(args: &ReportArgs) -> Result<(), HarnessError> {
    let records = read_records(&args.records)?;
    let summaries = aggregate_with(&records, args.count_failures_as_incorrect);
    if summaries.is_empty() {
        eprintln!("no records to aggregate");
    }
    for s in &summaries {
        println!("{}", summary_line(s));
    }
    let written = report::emit_report(&summaries, None, &args.out_dir)?;
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
