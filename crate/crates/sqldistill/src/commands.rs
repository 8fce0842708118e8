//! Command-line surface: `distill`, `evaluate`, `neighbors`, `sample-db`.
//!
//! Every command is a pure function of its inputs and the `--seed` flag; no
//! ambient entropy enters anywhere. Exit codes: 0 success, 1 usage, 2 bad
//! input or data, 3 internal invariant violation.

use crate::distiller::{
    distill, evaluate_coverage, DistillConfig, GoldInput, DEFAULT_AUX_BUDGET, DEFAULT_BUDGET,
};
use crate::evaluator::{evaluate_corpus, parse_gold_lines, EvalOptions, DEFAULT_PLUG_CAP};
use crate::mutation::{filter_executable, generate_neighbors, parse_sql};
use crate::random::stream_rng;
use crate::sampler::{
    sample_database, sample_probe, GoldConstants, SamplerConfig, DEFAULT_P_GOLD, ENABLED_NULL_RATE,
};
use crate::schema::{parse_schemas, Schema, SchemaSet};
use crate::{Error, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

#[derive(Parser)]
#[command(
    name = "sqldistill",
    version,
    about = "Distill compact database suites for SQL queries and judge predictions by denotation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distill one database suite per schema from a gold query file
    Distill(DistillArgs),
    /// Judge a prediction file against distilled suites
    Evaluate(EvaluateArgs),
    /// Print every neighbor generated for each gold line, with provenance
    Neighbors(NeighborsArgs),
    /// Sample one database instance for a schema and write it to disk
    SampleDb(SampleDbArgs),
}

#[derive(Args)]
struct DistillArgs {
    /// Schema file: JSON array of schema objects
    #[arg(long)]
    schemas: PathBuf,
    /// Gold file: one `SQL<TAB>db_id[<TAB>difficulty]` per line
    #[arg(long)]
    gold: PathBuf,
    /// Output directory; one suite subdirectory per db_id
    #[arg(long)]
    out: PathBuf,
    /// Candidate databases to sample per schema
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    /// Extra attempts hunting a non-empty witness for uncovered golds
    #[arg(long, default_value_t = DEFAULT_AUX_BUDGET)]
    aux_budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-statement execution budget
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
    /// Worker threads (default: all cores); output is identical either way
    #[arg(long)]
    jobs: Option<usize>,
    /// Rows per table, `MIN,MAX` inclusive
    #[arg(long, value_parser = parse_row_range, default_value = "2,16")]
    row_range: (usize, usize),
    /// Per-cell probability of drawing a gold-constant value
    #[arg(long, default_value_t = DEFAULT_P_GOLD)]
    p_gold: f64,
    /// Sprinkle NULLs into plain columns at a small fixed rate
    #[arg(long)]
    nulls: bool,
    /// Ignore column order when comparing denotations during distillation
    #[arg(long)]
    col_order_insensitive: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory that holds one suite subdirectory per db_id
    #[arg(long)]
    suites: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    /// Prediction file: bare SQL, line-aligned with the gold file
    #[arg(long)]
    pred: PathBuf,
    /// Report JSON path
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
    #[arg(long)]
    jobs: Option<usize>,
    /// Judge on each suite's first member only
    #[arg(long)]
    sped_up: bool,
    /// Disable gold-constant plugging
    #[arg(long)]
    no_plugging: bool,
    /// Cap on plugged candidates per prediction
    #[arg(long, default_value_t = DEFAULT_PLUG_CAP)]
    plug_cap: usize,
    /// Require predictions to match the gold's column order exactly
    #[arg(long)]
    strict_column_order: bool,
}

#[derive(Args)]
struct NeighborsArgs {
    #[arg(long)]
    schemas: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop neighbors the probe database rejects
    #[arg(long)]
    executable_only: bool,
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
}

#[derive(Args)]
struct SampleDbArgs {
    #[arg(long)]
    schemas: PathBuf,
    #[arg(long)]
    db_id: String,
    /// Output SQLite file
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instance index within the seed's stream
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Optional gold file; its constants feed the value pools
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long, value_parser = parse_row_range, default_value = "2,16")]
    row_range: (usize, usize),
    #[arg(long, default_value_t = DEFAULT_P_GOLD)]
    p_gold: f64,
    #[arg(long)]
    nulls: bool,
}

fn parse_row_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected MIN,MAX")?;
    let lo: usize = lo.trim().parse().map_err(|e| format!("bad MIN: {e}"))?;
    let hi: usize = hi.trim().parse().map_err(|e| format!("bad MAX: {e}"))?;
    if lo < 1 || lo > hi {
        return Err(format!("need 1 <= MIN <= MAX, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

/// Parses arguments from the process environment and runs one command.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out = match cli.command {
        Command::Distill(a) => cmd_distill(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Neighbors(a) => cmd_neighbors(a),
        Command::SampleDb(a) => cmd_sample_db(a),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Internal(_) => 3,
                _ => 2,
            })
        }
    }
}

fn init_jobs(jobs: Option<usize>) -> Result<()> {
    let Some(n) = jobs else { return Ok(()) };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))
}

fn load_schemas(path: &Path) -> Result<SchemaSet> {
    let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_schemas(&json)
}

struct GoldGroup {
    db_id: String,
    /// (global line index, SQL) in file order.
    lines: Vec<(usize, String)>,
}

fn read_gold_groups(path: &Path) -> Result<Vec<GoldGroup>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines = parse_gold_lines(&text, path)?;
    let mut groups: Vec<GoldGroup> = Vec::new();
    for (i, line) in lines.into_iter().enumerate() {
        match groups.iter_mut().find(|g| g.db_id == line.db_id) {
            Some(g) => g.lines.push((i, line.sql)),
            None => groups
                .push(GoldGroup { db_id: line.db_id, lines: vec![(i, line.sql)] }),
        }
    }
    Ok(groups)
}

/// Parses each gold line against its schema and generates probe-filtered
/// neighbors. Neighbor RNG streams are scoped `{db_id}/neighbors/q{line}`,
/// so listings and suite provenance agree across commands.
fn prepare_golds(
    group: &GoldGroup,
    schema: &Schema,
    seed: u64,
    sampler: &SamplerConfig,
    timeout: Duration,
    filter: bool,
) -> Result<(Vec<GoldInput>, usize)> {
    let mut inputs = Vec::with_capacity(group.lines.len());
    let mut constants = GoldConstants::default();
    for (line, sql) in &group.lines {
        let ast = parse_sql(sql, schema)
            .map_err(|e| Error::Data(format!("gold line {}: {e}", line + 1)))?;
        constants.merge(&GoldConstants::from_query(&ast));
        let scope = format!("{}/neighbors/q{line}", group.db_id);
        let set = generate_neighbors(&ast, schema, &mut stream_rng(seed, &scope));
        inputs.push(GoldInput { id: format!("q{line}"), ast, neighbors: set.neighbors });
    }

    let mut filtered_total = 0;
    if filter {
        let probe = sample_probe(schema, &constants, sampler, seed)?;
        let conn = probe.open_memory(schema)?;
        for input in &mut inputs {
            let (kept, filtered) =
                filter_executable(std::mem::take(&mut input.neighbors), &conn, timeout)?;
            input.neighbors = kept;
            filtered_total += filtered;
        }
    }
    Ok((inputs, filtered_total))
}

fn cmd_distill(a: DistillArgs) -> Result<()> {
    init_jobs(a.jobs)?;
    let schemas = load_schemas(&a.schemas)?;
    let groups = read_gold_groups(&a.gold)?;
    let timeout = Duration::from_millis(a.timeout_ms);
    let sampler = SamplerConfig {
        row_range: a.row_range,
        p_gold: a.p_gold,
        null_rate: if a.nulls { ENABLED_NULL_RATE } else { 0.0 },
    };
    let config = DistillConfig {
        budget: a.budget,
        aux_budget: a.aux_budget,
        base_seed: a.seed,
        timeout,
        column_order_insensitive: a.col_order_insensitive,
        sampler,
    };

    for group in &groups {
        let schema = schemas
            .get(&group.db_id)
            .ok_or_else(|| Error::Data(format!("no schema for db_id `{}`", group.db_id)))?;
        let (golds, filtered) =
            prepare_golds(group, schema, a.seed, &sampler, timeout, true)?;
        if filtered > 0 {
            eprintln!("{}: {filtered} neighbors not executable, dropped", group.db_id);
        }

        let outcome = distill(golds, schema, &config)?;
        for w in &outcome.warnings {
            eprintln!("{}: warning: {w}", group.db_id);
        }
        let dir = crate::distiller::write_suite(&outcome, schema, &a.out)?;

        let coverage = evaluate_coverage(&outcome.suite);
        println!(
            "{}: {} members, {}/{} neighbors undistinguished ({:.4})",
            group.db_id,
            coverage.suite_size,
            coverage.total_undistinguished,
            coverage.total_neighbors,
            coverage.undistinguished_fraction
        );
        for q in &coverage.per_query {
            println!(
                "  {}: {}/{} undistinguished ({:.4})",
                q.id, q.undistinguished, q.neighbors, q.fraction
            );
        }
        println!("  wrote {}", dir.display());
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    init_jobs(a.jobs)?;
    let options = EvalOptions {
        plug: !a.no_plugging,
        plug_cap: a.plug_cap,
        sped_up: a.sped_up,
        timeout: Duration::from_millis(a.timeout_ms),
        column_order_insensitive: !a.strict_column_order,
    };
    let report = evaluate_corpus(&a.gold, &a.pred, &a.suites, &options)?;
    report.write_json(&a.out)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("accuracy {:.3} over {} examples", report.accuracy, report.n);
    for (name, bucket) in &report.buckets {
        println!("  {name}: {:.3} (n={})", bucket.accuracy, bucket.n);
    }
    println!(
        "baseline exact-match {:.3}, agreement {:.3}, false negatives {}",
        report.baseline.baseline_accuracy,
        report.baseline.agreement_rate,
        report.baseline.baseline_false_negatives.len()
    );
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_neighbors(a: NeighborsArgs) -> Result<()> {
    let schemas = load_schemas(&a.schemas)?;
    let groups = read_gold_groups(&a.gold)?;
    let sampler = SamplerConfig::default();
    let timeout = Duration::from_millis(a.timeout_ms);

    for group in &groups {
        let schema = schemas
            .get(&group.db_id)
            .ok_or_else(|| Error::Data(format!("no schema for db_id `{}`", group.db_id)))?;
        let (golds, filtered) =
            prepare_golds(group, schema, a.seed, &sampler, timeout, a.executable_only)?;
        for input in &golds {
            println!("{} {}: {}", group.db_id, input.id, input.ast.text());
            for span in input.ast.preserved_spans() {
                println!("  keeps {span}");
            }
            for n in &input.neighbors {
                println!("  [{}] {}", n.provenance.label, n.text);
            }
        }
        if filtered > 0 {
            println!("# {}: {filtered} neighbors dropped as non-executable", group.db_id);
        }
    }
    Ok(())
}

fn cmd_sample_db(a: SampleDbArgs) -> Result<()> {
    let schemas = load_schemas(&a.schemas)?;
    let schema = schemas
        .get(&a.db_id)
        .ok_or_else(|| Error::Data(format!("no schema for db_id `{}`", a.db_id)))?;

    let mut constants = GoldConstants::default();
    if let Some(gold_path) = &a.gold {
        let text = std::fs::read_to_string(gold_path).map_err(|e| Error::io(gold_path, e))?;
        for line in parse_gold_lines(&text, gold_path)? {
            if line.db_id == a.db_id {
                let ast = parse_sql(&line.sql, schema)?;
                constants.merge(&GoldConstants::from_query(&ast));
            }
        }
    }

    let config = SamplerConfig {
        row_range: a.row_range,
        p_gold: a.p_gold,
        null_rate: if a.nulls { ENABLED_NULL_RATE } else { 0.0 },
    };
    let instance = sample_database(schema, &constants, &config, a.seed, a.index)?;
    instance.check_integrity(schema)?;
    instance.write_file(schema, &a.out)?;
    let rows: usize = instance.tables.iter().map(|t| t.rows.len()).sum();
    println!(
        "wrote {} ({} tables, {rows} rows, seed {}, index {})",
        a.out.display(),
        instance.tables.len(),
        a.seed,
        a.index
    );
    Ok(())
}
