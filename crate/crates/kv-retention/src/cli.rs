//! Command-line pipelines over the library modules.
//!
//! One subcommand per workflow stage: `select`, `simulate`, `split`,
//! `analyze probe`, `analyze confirm`, `decide`. Every output is written
//! atomically and stamped with the `kvr/v1` schema tag; reruns on the
//! same inputs and seed are byte-identical.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cache::{instrument, simulate_trajectory, Cadence, CadencePolicy};
use crate::error::{Error, Result};
use crate::io;
use crate::select::{select, SelectionConfig};
use crate::signature::{aggregate_signatures, DEFAULT_EPSILON};
use crate::split::build_manifest;
use crate::stats::{
    bonferroni_evaluate, branch_decide, cluster_bootstrap, paired_deltas, phase1_select,
    BranchConfig, CellResult, ProbeTable,
};

#[derive(Debug, Parser)]
#[command(name = "kvr", about = "KV-cache retention selection and matched-memory analysis", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the retention selector on a score vector and value tensor.
    Select(SelectArgs),
    /// Simulate a decode-time cache trajectory under a cadence policy.
    Simulate(SimulateArgs),
    /// Partition a problem-ID list into dev/confirm splits.
    Split(SplitArgs),
    /// Statistical analysis pipelines.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Apply the pre-committed branch rule to cell results.
    Decide(DecideArgs),
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Score vector JSON ({"n":..,"scores":[..]}).
    #[arg(long)]
    pub scores: PathBuf,
    /// Value tensor file (binary KVTB or JSON), used to build signatures.
    #[arg(long)]
    pub values: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub lambda: f64,
    /// Norm floor for signature construction.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub prefill_len: usize,
    #[arg(long)]
    pub decode_steps: usize,
    #[arg(long)]
    pub budget: usize,
    /// Cadence: "never", "every:C", or "at:3,17,40" (1-based decode steps).
    #[arg(long)]
    pub policy: String,
    /// Trajectory CSV output (step, length).
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    /// Stats JSON output.
    #[arg(long)]
    pub out_stats: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// ID list file, one UTF-8 ID per line.
    #[arg(long)]
    pub ids: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Select the winning lambda from a probe table.
    Probe(ProbeArgs),
    /// Paired per-problem deltas with cluster bootstrap per cell.
    Confirm(ConfirmArgs),
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Probe table JSON ({"cells":[{model,budget,lambda,delta_pp,n},..]}).
    #[arg(long)]
    pub table: PathBuf,
    /// Tie tolerance in percentage points for the smaller-lambda tie-break.
    #[arg(long, default_value_t = 0.5)]
    pub tie_tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConfirmArgs {
    /// Outcome records, JSONL, one record per line.
    #[arg(long)]
    pub records: PathBuf,
    /// Method label of the treatment arm.
    #[arg(long)]
    pub treatment: String,
    /// Method label of the baseline arm.
    #[arg(long)]
    pub baseline: String,
    #[arg(long, default_value_t = 10_000)]
    pub n_boot: usize,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub family_alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the forest-plot CSV here.
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecideArgs {
    /// Cell results JSON, as written by `analyze confirm` (or ingested).
    #[arg(long)]
    pub cells: PathBuf,
    /// Report the branch under the symmetric negative guard (both models)
    /// instead of the registered guard-model-only rule.
    #[arg(long)]
    pub symmetric_guard: bool,
    #[arg(long, default_value = "qwen7b")]
    pub qualifying_model: String,
    #[arg(long, default_value = "llama8b")]
    pub guard_model: String,
    /// Alpha for the no-significantly-negative guard.
    #[arg(long, default_value_t = 0.05)]
    pub guard_alpha: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Map an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 2,
        Error::Json(_) | Error::Schema(_) => 3,
        _ => 4,
    }
}

/// One-line machine-parsable error record for stderr.
pub fn error_record(err: &Error) -> String {
    serde_json::json!({"error": err.kind(), "message": err.to_string()}).to_string()
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Select(args) => run_select(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Split(args) => run_split(args),
        Command::Analyze(AnalyzeCommand::Probe(args)) => run_probe(args),
        Command::Analyze(AnalyzeCommand::Confirm(args)) => run_confirm(args),
        Command::Decide(args) => run_decide(args),
    }
}

fn run_select(args: SelectArgs) -> Result<()> {
    let scores = io::read_scores(&args.scores)?;
    let block = io::read_value_tensor(&args.values)?;
    let sig = aggregate_signatures(&block, args.epsilon)?;
    let cfg = SelectionConfig::new(args.k, args.lambda)?;
    let set = select(&scores, &sig, &cfg)?;
    io::write_json(&args.out, &io::SelectionOutput::new(&set, cfg.lambda, cfg.k, scores.n))
}

fn parse_policy(spec: &str, budget: usize) -> Result<CadencePolicy> {
    let cadence = if spec == "never" {
        Cadence::Never
    } else if let Some(c) = spec.strip_prefix("every:") {
        Cadence::EveryCSteps {
            c: c.parse()
                .map_err(|_| Error::InvalidParam(format!("bad cadence interval '{c}'")))?,
        }
    } else if let Some(list) = spec.strip_prefix("at:") {
        let steps = list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::InvalidParam(format!("bad step '{s}' in at: list")))
            })
            .collect::<Result<Vec<usize>>>()?;
        Cadence::AtSteps { steps }
    } else {
        return Err(Error::InvalidParam(format!(
            "unknown policy '{spec}' (expected never, every:C, or at:a,b,c)"
        )));
    };
    CadencePolicy::new(cadence, budget)
}

#[derive(Serialize)]
struct StatsOutput {
    schema: &'static str,
    #[serde(flatten)]
    stats: crate::cache::CacheStats,
    decode_steps: usize,
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let policy = parse_policy(&args.policy, args.budget)?;
    let trace = simulate_trajectory(args.prefill_len, args.decode_steps, &policy)?;
    let stats = instrument(&trace);
    if let Some(csv_path) = &args.out_csv {
        io::write_atomic(csv_path, io::trajectory_csv(&trace).as_bytes())?;
    }
    io::write_json(
        &args.out_stats,
        &StatsOutput {
            schema: io::SCHEMA,
            stats,
            decode_steps: args.decode_steps,
        },
    )
}

#[derive(Serialize)]
struct ManifestOutput {
    schema: &'static str,
    #[serde(flatten)]
    manifest: crate::split::SplitManifest,
    counts: BTreeMap<&'static str, usize>,
}

fn run_split(args: SplitArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.ids)?;
    let ids: Vec<String> = text
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty())
        .map(|l| l.to_string())
        .collect();
    let manifest = build_manifest(&ids)?;
    let counts = BTreeMap::from([
        ("dev", manifest.dev_ids.len()),
        ("confirm", manifest.confirm_ids.len()),
    ]);
    io::write_json(
        &args.out,
        &ManifestOutput {
            schema: io::SCHEMA,
            manifest,
            counts,
        },
    )
}

#[derive(Serialize)]
struct ProbeOutput {
    schema: &'static str,
    #[serde(flatten)]
    selection: crate::stats::ProbeSelection,
}

fn run_probe(args: ProbeArgs) -> Result<()> {
    let table: ProbeTable =
        serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(&args.table)?))?;
    let selection = phase1_select(&table, args.tie_tol)?;
    io::write_json(
        &args.out,
        &ProbeOutput {
            schema: io::SCHEMA,
            selection,
        },
    )
}

#[derive(Serialize)]
struct CellsOutput {
    schema: &'static str,
    treatment: String,
    baseline: String,
    n_boot: usize,
    rng_seed: u64,
    family_alpha: f64,
    cells: Vec<CellResult>,
}

fn run_confirm(args: ConfirmArgs) -> Result<()> {
    let records = io::read_outcomes_jsonl(&args.records)?;
    let mut by_cell: BTreeMap<(String, u64), (Vec<_>, Vec<_>)> = BTreeMap::new();
    for r in records {
        let key = (r.model.clone(), r.budget);
        let entry = by_cell.entry(key).or_default();
        if r.method == args.treatment {
            entry.0.push(r);
        } else if r.method == args.baseline {
            entry.1.push(r);
        }
    }
    if by_cell.is_empty() {
        return Err(Error::EmptyInput("no records for the requested methods".into()));
    }
    let mut cells = Vec::new();
    for ((model, budget), (arm_a, arm_b)) in by_cell {
        if arm_a.is_empty() || arm_b.is_empty() {
            return Err(Error::InvalidParam(format!(
                "cell {model} b={budget} is missing the {} arm",
                if arm_a.is_empty() { "treatment" } else { "baseline" }
            )));
        }
        let deltas: Vec<f64> = paired_deltas(&arm_a, &arm_b)?.into_iter().map(|d| d.delta).collect();
        let summary = cluster_bootstrap(&deltas, args.n_boot, args.rng_seed)?;
        cells.push(CellResult {
            model,
            budget,
            delta_pp: summary.point_pp,
            ci95: summary.ci95_pp,
            p: summary.p_two_sided,
            bonferroni_pass: false,
            n_problems: Some(deltas.len()),
        });
    }
    bonferroni_evaluate(&mut cells, args.family_alpha)?;
    if let Some(csv_path) = &args.emit_plot_data {
        io::write_atomic(csv_path, io::forest_csv(&cells).as_bytes())?;
    }
    io::write_json(
        &args.out,
        &CellsOutput {
            schema: io::SCHEMA,
            treatment: args.treatment,
            baseline: args.baseline,
            n_boot: args.n_boot,
            rng_seed: args.rng_seed,
            family_alpha: args.family_alpha,
            cells,
        },
    )
}

#[derive(serde::Deserialize)]
struct CellsInput {
    cells: Vec<CellResult>,
}

#[derive(Serialize)]
struct DecideOutput {
    schema: &'static str,
    branch: crate::stats::Branch,
    guard: &'static str,
    #[serde(flatten)]
    verdict: crate::stats::BranchVerdict,
}

fn run_decide(args: DecideArgs) -> Result<()> {
    let input: CellsInput =
        serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(&args.cells)?))?;
    let mut cfg = BranchConfig::new(&args.qualifying_model, &args.guard_model);
    cfg.guard_alpha = args.guard_alpha;
    let verdict = branch_decide(&input.cells, &cfg)?;
    let (branch, guard) = if args.symmetric_guard {
        (verdict.symmetric_guard_branch, "symmetric")
    } else {
        (verdict.branch, "registered")
    };
    let output = DecideOutput {
        schema: io::SCHEMA,
        branch,
        guard,
        verdict,
    };
    let text = serde_json::to_string_pretty(&output)?;
    match &args.out {
        Some(path) => io::write_atomic(path, format!("{text}\n").as_bytes())?,
        None => println!("{text}"),
    }
    Ok(())
}
