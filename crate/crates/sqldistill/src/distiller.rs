//! Greedy distillation of compact test suites.
//!
//! The loop samples candidate databases `w_1..w_budget` and retains a
//! candidate exactly when it distinguishes some still-undistinguished
//! neighbor of some gold query in the schema group. All gold queries of a
//! group share the same instances, so execution cost amortizes across the
//! group. A candidate on which *any* gold query errors or times out is
//! discarded outright (it would poison every later comparison) but still
//! consumes budget.
//!
//! Two refinements follow the loop. First, any gold query whose denotation
//! is empty on every retained member gets an auxiliary sampling phase until
//! one non-empty-denotation member is retained — all-empty suites judge
//! trivially-empty predictions correct. Second, a pruning pass recomputes
//! the full member × neighbor distinguishing matrix and removes members in
//! reverse retention order whenever removal shrinks neither coverage nor
//! the non-empty witnesses, so every surviving member is genuinely load-
//! bearing, not merely first-past-the-post.
//!
//! Candidates are evaluated in parallel batches. Retention is committed
//! serially in `t` order against each candidate's hits, and a hit is a pure
//! function of (candidate, gold, neighbor), so the outcome is byte-identical
//! to the sequential loop for any batch size or thread count.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::execution::{self, CompareFlags, Denotation, DEFAULT_TIMEOUT};
use crate::mutation::{Neighbor, QueryAst};
use crate::sampler::{
    self, DatabaseInstance, GoldConstants, SamplerConfig,
};
use crate::schema::Schema;

pub const DEFAULT_BUDGET: usize = 1000;
/// Extra candidates allowed while hunting non-empty gold denotations.
pub const DEFAULT_AUX_BUDGET: usize = 200;

#[derive(Debug, Clone)]
pub struct DistillConfig {
    pub budget: usize,
    pub aux_budget: usize,
    pub base_seed: u64,
    pub timeout: Duration,
    pub column_order_insensitive: bool,
    pub sampler: SamplerConfig,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            budget: DEFAULT_BUDGET,
            aux_budget: DEFAULT_AUX_BUDGET,
            base_seed: 0,
            timeout: DEFAULT_TIMEOUT,
            column_order_insensitive: false,
            sampler: SamplerConfig::default(),
        }
    }
}

/// One gold query entering distillation. Neighbors must already be
/// executability-filtered against a probe instance.
pub struct GoldInput {
    pub id: String,
    pub ast: QueryAst,
    pub neighbors: Vec<Neighbor>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteMember {
    /// Attempt index the member was sampled at; also names its file.
    pub t: usize,
    pub seed: u64,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeighborRecord {
    pub text: String,
    pub provenance: crate::mutation::Provenance,
    /// `t` of the first suite member distinguishing this neighbor from
    /// gold; `None` means the suite never distinguishes it.
    pub distinguished_by: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub gold: String,
    pub order_sensitive: bool,
    /// Some member yields a non-empty gold denotation.
    pub has_nonempty_witness: bool,
    pub neighbors: Vec<NeighborRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestSuite {
    pub db_id: String,
    pub base_seed: u64,
    pub budget: usize,
    pub budget_used: usize,
    pub timeout_ms: u64,
    pub column_order_insensitive: bool,
    pub row_range: (usize, usize),
    pub p_gold: f64,
    pub null_rate: f64,
    pub members: Vec<SuiteMember>,
    pub queries: Vec<QueryRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: usize,
    pub undistinguished_fraction: f64,
}

#[derive(Debug)]
pub struct DistillOutcome {
    pub suite: TestSuite,
    /// Aligned with `suite.members`.
    pub instances: Vec<DatabaseInstance>,
    pub trace: Vec<TracePoint>,
    pub warnings: Vec<String>,
}

/// Per-query coverage aggregates, computed from suite bookkeeping alone.
#[derive(Debug, Clone, Serialize)]
pub struct CoverageSummary {
    pub db_id: String,
    pub suite_size: usize,
    pub total_neighbors: usize,
    pub total_undistinguished: usize,
    pub undistinguished_fraction: f64,
    pub per_query: Vec<QueryCoverage>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryCoverage {
    pub id: String,
    pub neighbors: usize,
    pub undistinguished: usize,
    pub fraction: f64,
}

// ---------------------------------------------------------------------------
// Candidate evaluation
// ---------------------------------------------------------------------------

enum GoldOutcome {
    /// Gold executed; flag records a non-empty denotation.
    Ok { nonempty: bool },
    Bottom,
    ExecError,
    NotAttempted,
}

struct Candidate {
    t: usize,
    instance: DatabaseInstance,
    gold_outcomes: Vec<GoldOutcome>,
    /// Per gold query, neighbor indices (into the snapshot subsets) this
    /// candidate distinguishes. Empty when the candidate was discarded.
    hits: Vec<Vec<usize>>,
    discarded: bool,
}

fn flags_for(gold: &QueryAst, config: &DistillConfig) -> CompareFlags {
    CompareFlags {
        order_sensitive: gold.has_top_level_order_by(),
        column_order_insensitive: config.column_order_insensitive,
    }
}

/// True when the database tells the two texts apart, given gold's already-
/// computed denotation. A neighbor that errors is distinguished by fiat.
fn distinguishes_cached(
    conn: &rusqlite::Connection,
    gold_denotation: &Denotation,
    neighbor_text: &str,
    timeout: Duration,
    flags: CompareFlags,
) -> Result<bool> {
    match execution::execute(conn, neighbor_text, timeout) {
        Ok(d) => Ok(!execution::denotations_equal(gold_denotation, &d, flags).equal),
        Err(Error::Exec(_)) => Ok(true),
        Err(other) => Err(other),
    }
}

/// Samples candidate `t` and evaluates it against every gold query and the
/// given still-undistinguished neighbor subsets. Pure given its inputs.
fn evaluate_candidate(
    t: usize,
    schema: &Schema,
    pool: &GoldConstants,
    golds: &[GoldInput],
    undistinguished: &[BTreeSet<usize>],
    config: &DistillConfig,
) -> Result<Candidate> {
    let instance = sampler::sample_database(schema, pool, &config.sampler, config.base_seed, t)?;
    let conn = instance.open_memory(schema)?;

    let mut gold_outcomes: Vec<GoldOutcome> = Vec::with_capacity(golds.len());
    let mut denotations: Vec<Option<Denotation>> = Vec::with_capacity(golds.len());
    let mut discarded = false;
    for gold in golds {
        if discarded {
            gold_outcomes.push(GoldOutcome::NotAttempted);
            denotations.push(None);
            continue;
        }
        match execution::execute(&conn, &gold.ast.text(), config.timeout) {
            Ok(Denotation::Bottom) => {
                gold_outcomes.push(GoldOutcome::Bottom);
                denotations.push(None);
                discarded = true;
            }
            Ok(d) => {
                gold_outcomes.push(GoldOutcome::Ok { nonempty: !d.is_empty_rows() });
                denotations.push(Some(d));
            }
            Err(Error::Exec(_)) => {
                gold_outcomes.push(GoldOutcome::ExecError);
                denotations.push(None);
                discarded = true;
            }
            Err(other) => return Err(other),
        }
    }

    let mut hits: Vec<Vec<usize>> = vec![Vec::new(); golds.len()];
    if !discarded {
        for (qi, gold) in golds.iter().enumerate() {
            let denotation = denotations[qi].as_ref().expect("gold executed");
            let flags = flags_for(&gold.ast, config);
            for &ni in &undistinguished[qi] {
                if distinguishes_cached(
                    &conn,
                    denotation,
                    &gold.neighbors[ni].text,
                    config.timeout,
                    flags,
                )? {
                    hits[qi].push(ni);
                }
            }
        }
    }

    Ok(Candidate { t, instance, gold_outcomes, hits, discarded })
}

// ---------------------------------------------------------------------------
// Distillation
// ---------------------------------------------------------------------------

struct Retained {
    t: usize,
    instance: DatabaseInstance,
}

/// Distills a suite for one schema group.
///
/// `golds` are all gold queries sharing `schema`; their constants merge into
/// one sampling pool and their neighbors are covered jointly by the same
/// members.
pub fn distill(
    golds: Vec<GoldInput>,
    schema: &Schema,
    config: &DistillConfig,
) -> Result<DistillOutcome> {
    {
        let mut ids = BTreeSet::new();
        for g in &golds {
            if !ids.insert(g.id.as_str()) {
                return Err(Error::Data(format!("duplicate gold query id '{}'", g.id)));
            }
        }
    }

    let mut pool = GoldConstants::default();
    for g in &golds {
        pool.merge(&GoldConstants::from_query(&g.ast));
    }

    let total_neighbors: usize = golds.iter().map(|g| g.neighbors.len()).sum();
    let fraction = |undist: &[BTreeSet<usize>]| -> f64 {
        if total_neighbors == 0 {
            0.0
        } else {
            undist.iter().map(BTreeSet::len).sum::<usize>() as f64 / total_neighbors as f64
        }
    };

    let mut undistinguished: Vec<BTreeSet<usize>> =
        golds.iter().map(|g| (0..g.neighbors.len()).collect()).collect();
    let mut trace = vec![TracePoint { t: 0, undistinguished_fraction: fraction(&undistinguished) }];
    let mut retained: Vec<Retained> = Vec::new();
    let mut gold_attempts = vec![0usize; golds.len()];
    let mut gold_exec_errors = vec![0usize; golds.len()];
    let mut witnessed = vec![false; golds.len()];
    let mut warnings: Vec<String> = Vec::new();
    let mut main_attempts = 0usize;
    let mut aux_attempts = 0usize;

    // Main greedy loop, in parallel batches. Hits are computed against the
    // batch-start snapshot and re-intersected with the live sets at commit
    // time; since a hit is a pure per-(candidate, neighbor) fact, this is
    // exactly the sequential algorithm's outcome.
    let batch_size = rayon::current_num_threads().max(1) * 2;
    let mut next_t = 1usize;
    let mut coverage_done = total_neighbors == 0;
    while !coverage_done && next_t <= config.budget {
        let end = (next_t + batch_size - 1).min(config.budget);
        let batch: Vec<usize> = (next_t..=end).collect();
        next_t = end + 1;

        let snapshot = undistinguished.clone();
        let candidates: Vec<Candidate> = batch
            .into_par_iter()
            .map(|t| evaluate_candidate(t, schema, &pool, &golds, &snapshot, config))
            .collect::<Result<Vec<_>>>()?;

        for cand in candidates {
            main_attempts = cand.t;
            for (qi, outcome) in cand.gold_outcomes.iter().enumerate() {
                match outcome {
                    GoldOutcome::NotAttempted => {}
                    GoldOutcome::ExecError => {
                        gold_attempts[qi] += 1;
                        gold_exec_errors[qi] += 1;
                    }
                    _ => gold_attempts[qi] += 1,
                }
            }
            if !cand.discarded {
                let mut any_new = false;
                let mut effective: Vec<Vec<usize>> = Vec::with_capacity(golds.len());
                for (qi, hit) in cand.hits.iter().enumerate() {
                    let live: Vec<usize> = hit
                        .iter()
                        .copied()
                        .filter(|ni| undistinguished[qi].contains(ni))
                        .collect();
                    any_new |= !live.is_empty();
                    effective.push(live);
                }
                if any_new {
                    for (qi, live) in effective.iter().enumerate() {
                        for ni in live {
                            undistinguished[qi].remove(ni);
                        }
                    }
                    for (qi, outcome) in cand.gold_outcomes.iter().enumerate() {
                        if let GoldOutcome::Ok { nonempty: true } = outcome {
                            witnessed[qi] = true;
                        }
                    }
                    retained.push(Retained { t: cand.t, instance: cand.instance });
                }
            }
            trace.push(TracePoint {
                t: cand.t,
                undistinguished_fraction: fraction(&undistinguished),
            });
            if undistinguished.iter().all(BTreeSet::is_empty) {
                coverage_done = true;
                break;
            }
        }
    }

    let check_gold_errors = |attempts: &[usize], errors: &[usize]| -> Result<()> {
        for (qi, gold) in golds.iter().enumerate() {
            if attempts[qi] > 0 && errors[qi] == attempts[qi] {
                return Err(Error::Data(format!(
                    "gold query '{}' failed to execute on all {} sampled instances",
                    gold.id, attempts[qi]
                )));
            }
        }
        Ok(())
    };
    check_gold_errors(&gold_attempts, &gold_exec_errors)?;

    // Auxiliary phase: hunt a non-empty gold denotation for each query that
    // lacks one among the retained members. Skipped entirely at budget 0 —
    // a zero budget means "no sampling at all". Attempt indices continue
    // past the main budget so the streams never collide with main-loop
    // candidates.
    if config.budget > 0 {
        while witnessed.iter().any(|w| !w) && aux_attempts < config.aux_budget {
            aux_attempts += 1;
            let aux_t = config.budget + aux_attempts;
            let instance =
                sampler::sample_database(schema, &pool, &config.sampler, config.base_seed, aux_t)?;
            let conn = instance.open_memory(schema)?;
            let mut outcomes: Vec<Option<bool>> = Vec::with_capacity(golds.len());
            let mut usable = true;
            for (qi, gold) in golds.iter().enumerate() {
                gold_attempts[qi] += 1;
                match execution::execute(&conn, &gold.ast.text(), config.timeout) {
                    Ok(Denotation::Bottom) => {
                        usable = false;
                        break;
                    }
                    Err(Error::Exec(_)) => {
                        gold_exec_errors[qi] += 1;
                        usable = false;
                        break;
                    }
                    Ok(d) => outcomes.push(Some(!d.is_empty_rows())),
                    Err(other) => return Err(other),
                }
            }
            if !usable {
                continue;
            }
            let helps = outcomes
                .iter()
                .zip(&witnessed)
                .any(|(o, w)| !w && o.unwrap_or(false));
            if helps {
                for (qi, o) in outcomes.iter().enumerate() {
                    if o.unwrap_or(false) {
                        witnessed[qi] = true;
                    }
                }
                retained.push(Retained { t: aux_t, instance });
            }
        }
        check_gold_errors(&gold_attempts, &gold_exec_errors)?;
    }
    // Reported unconditionally: a zero-budget run leaves every gold
    // unwitnessed, and that absence must still be visible to callers.
    for (qi, gold) in golds.iter().enumerate() {
        if !witnessed[qi] {
            warnings.push(format!(
                "query '{}': no sampled instance produced a non-empty gold denotation",
                gold.id
            ));
        }
    }

    // Recompute the full distinguishing matrix over retained members, then
    // prune. The greedy loop's first-past-the-post retention can leave a
    // member whose every contribution is also covered by later members;
    // removal is allowed when it preserves both coverage and witnesses.
    let matrix = full_matrix(&retained, schema, &golds, config)?;
    let keep = prune(&matrix, golds.len());

    let mut members = Vec::new();
    let mut instances = Vec::new();
    let mut kept_rows: Vec<&MatrixRow> = Vec::new();
    for (row, retained_member) in matrix.iter().zip(retained) {
        if keep[row.index] {
            members.push(SuiteMember {
                t: retained_member.t,
                seed: retained_member.instance.origin_seed,
                file: format!("db_{}.sqlite3", retained_member.t),
            });
            instances.push(retained_member.instance);
            kept_rows.push(row);
        }
    }

    let queries = golds
        .iter()
        .enumerate()
        .map(|(qi, gold)| {
            let neighbors = gold
                .neighbors
                .iter()
                .enumerate()
                .map(|(ni, n)| {
                    let first = kept_rows
                        .iter()
                        .zip(&members)
                        .find(|(row, _)| row.distinguishes[qi].contains(&ni))
                        .map(|(_, m)| m.t);
                    NeighborRecord {
                        text: n.text.clone(),
                        provenance: n.provenance.clone(),
                        distinguished_by: first,
                    }
                })
                .collect();
            QueryRecord {
                id: gold.id.clone(),
                gold: gold.ast.text(),
                order_sensitive: gold.ast.has_top_level_order_by(),
                has_nonempty_witness: kept_rows.iter().any(|row| row.nonempty[qi]),
                neighbors,
            }
        })
        .collect();

    let suite = TestSuite {
        db_id: schema.db_id.clone(),
        base_seed: config.base_seed,
        budget: config.budget,
        budget_used: main_attempts + aux_attempts,
        timeout_ms: config.timeout.as_millis() as u64,
        column_order_insensitive: config.column_order_insensitive,
        row_range: config.sampler.row_range,
        p_gold: config.sampler.p_gold,
        null_rate: config.sampler.null_rate,
        members,
        queries,
    };
    Ok(DistillOutcome { suite, instances, trace, warnings })
}

struct MatrixRow {
    index: usize,
    /// Per gold query, the full set of neighbor indices this member
    /// distinguishes.
    distinguishes: Vec<BTreeSet<usize>>,
    /// Per gold query, whether the gold denotation is non-empty here.
    nonempty: Vec<bool>,
}

fn full_matrix(
    retained: &[Retained],
    schema: &Schema,
    golds: &[GoldInput],
    config: &DistillConfig,
) -> Result<Vec<MatrixRow>> {
    retained
        .par_iter()
        .enumerate()
        .map(|(index, member)| {
            let conn = member.instance.open_memory(schema)?;
            let mut distinguishes = Vec::with_capacity(golds.len());
            let mut nonempty = Vec::with_capacity(golds.len());
            for gold in golds {
                // Retention already established that every gold executes.
                let denotation = execution::execute(&conn, &gold.ast.text(), config.timeout)?;
                if denotation.is_bottom() {
                    return Err(Error::Internal(format!(
                        "retained member t={} timed out on gold '{}' during replay",
                        member.t, gold.id
                    )));
                }
                nonempty.push(!denotation.is_empty_rows());
                let flags = flags_for(&gold.ast, config);
                let mut set = BTreeSet::new();
                for (ni, n) in gold.neighbors.iter().enumerate() {
                    if distinguishes_cached(&conn, &denotation, &n.text, config.timeout, flags)? {
                        set.insert(ni);
                    }
                }
                distinguishes.push(set);
            }
            Ok(MatrixRow { index, distinguishes, nonempty })
        })
        .collect()
}

/// Reverse-order redundancy pruning: drop a member iff coverage and
/// non-empty witnesses are both unchanged without it.
fn prune(matrix: &[MatrixRow], n_golds: usize) -> Vec<bool> {
    let mut keep = vec![true; matrix.len()];
    let covered: Vec<BTreeSet<usize>> = (0..n_golds)
        .map(|qi| {
            matrix
                .iter()
                .flat_map(|row| row.distinguishes[qi].iter().copied())
                .collect()
        })
        .collect();
    let witnessed: Vec<bool> =
        (0..n_golds).map(|qi| matrix.iter().any(|row| row.nonempty[qi])).collect();

    for mi in (0..matrix.len()).rev() {
        let removable = (0..n_golds).all(|qi| {
            let still_covered = covered[qi].iter().all(|ni| {
                matrix
                    .iter()
                    .any(|row| keep[row.index] && row.index != mi && row.distinguishes[qi].contains(ni))
            });
            let still_witnessed = !witnessed[qi]
                || matrix
                    .iter()
                    .any(|row| keep[row.index] && row.index != mi && row.nonempty[qi]);
            still_covered && still_witnessed
        });
        if removable {
            keep[mi] = false;
        }
    }
    keep
}

/// Aggregates coverage from suite bookkeeping; never re-executes.
pub fn evaluate_coverage(suite: &TestSuite) -> CoverageSummary {
    let per_query: Vec<QueryCoverage> = suite
        .queries
        .iter()
        .map(|q| {
            let undistinguished =
                q.neighbors.iter().filter(|n| n.distinguished_by.is_none()).count();
            let neighbors = q.neighbors.len();
            QueryCoverage {
                id: q.id.clone(),
                neighbors,
                undistinguished,
                fraction: if neighbors == 0 {
                    0.0
                } else {
                    undistinguished as f64 / neighbors as f64
                },
            }
        })
        .collect();
    let total_neighbors: usize = per_query.iter().map(|q| q.neighbors).sum();
    let total_undistinguished: usize = per_query.iter().map(|q| q.undistinguished).sum();
    CoverageSummary {
        db_id: suite.db_id.clone(),
        suite_size: suite.members.len(),
        total_neighbors,
        total_undistinguished,
        undistinguished_fraction: if total_neighbors == 0 {
            0.0
        } else {
            total_undistinguished as f64 / total_neighbors as f64
        },
        per_query,
    }
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// Writes `{out}/{db_id}/db_{t}.sqlite3` per member plus `suite.json` and
/// `progress.csv`. Returns the suite directory.
pub fn write_suite(
    outcome: &DistillOutcome,
    schema: &Schema,
    out_root: &Path,
) -> Result<PathBuf> {
    let dir = out_root.join(&outcome.suite.db_id);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (member, instance) in outcome.suite.members.iter().zip(&outcome.instances) {
        instance.write_file(schema, &dir.join(&member.file))?;
    }
    let json = serde_json::to_string_pretty(&outcome.suite)
        .map_err(|e| Error::Internal(format!("serializing suite: {e}")))?;
    let suite_path = dir.join("suite.json");
    std::fs::write(&suite_path, json).map_err(|e| Error::io(&suite_path, e))?;

    let mut csv = String::from("t,undistinguished_fraction\n");
    for p in &outcome.trace {
        csv.push_str(&format!("{},{}\n", p.t, p.undistinguished_fraction));
    }
    let csv_path = dir.join("progress.csv");
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    Ok(dir)
}

pub struct LoadedSuite {
    pub suite: TestSuite,
    /// Absolute member file paths, aligned with `suite.members`.
    pub member_paths: Vec<PathBuf>,
}

/// Loads `suite.json` from a suite directory and checks the member files
/// exist.
pub fn load_suite(dir: &Path) -> Result<LoadedSuite> {
    let suite_path = dir.join("suite.json");
    let json = std::fs::read_to_string(&suite_path).map_err(|e| Error::io(&suite_path, e))?;
    let suite: TestSuite = serde_json::from_str(&json)
        .map_err(|e| Error::Data(format!("{}: {e}", suite_path.display())))?;
    let member_paths: Vec<PathBuf> = suite.members.iter().map(|m| dir.join(&m.file)).collect();
    for p in &member_paths {
        if !p.exists() {
            return Err(Error::Data(format!(
                "suite member file missing: {}",
                p.display()
            )));
        }
    }
    Ok(LoadedSuite { suite, member_paths })
}
