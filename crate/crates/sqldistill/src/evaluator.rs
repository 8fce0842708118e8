//! Judging predicted queries against a distilled suite.
//!
//! A prediction is correct when no suite member distinguishes it from the
//! gold query: its denotation must equal the gold's on every member
//! database. Before judging, the prediction's literal constants can be
//! *plugged*: every type-matched substitution of the gold's constants is
//! tried, and the prediction passes if any variant passes. The unmodified
//! prediction is always the first candidate, so plugging never penalizes.
//!
//! Corpus evaluation maps the verdict over line-aligned gold/prediction
//! files and reports aggregate accuracy, per-difficulty buckets, and an
//! agreement matrix against a normalized exact-string-match baseline.

use crate::distiller::{load_suite, LoadedSuite};
use crate::execution::{
    denotations_equal, execute, open_readonly, CompareFlags, Denotation, EqWarning,
    DEFAULT_TIMEOUT,
};
use crate::mutation::{QueryAst, Replacement, SiteKind};
use crate::sampler::GoldConstants;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Duration;

/// Cap on plugged candidates per prediction. The Cartesian product over
/// constant sites is unbounded in principle; real predictions have a
/// handful of sites.
pub const DEFAULT_PLUG_CAP: usize = 10_000;

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Try gold-constant substitutions in addition to the raw prediction.
    pub plug: bool,
    pub plug_cap: usize,
    /// Check only the first suite member (cheap screening mode).
    pub sped_up: bool,
    pub timeout: Duration,
    /// Accept one column permutation when comparing denotations. On by
    /// default: SELECT-list order is presentation, not meaning.
    pub column_order_insensitive: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            plug: true,
            plug_cap: DEFAULT_PLUG_CAP,
            sped_up: false,
            timeout: DEFAULT_TIMEOUT,
            column_order_insensitive: true,
        }
    }
}

/// Every way to substitute the gold's constants into the prediction's
/// constant sites. Pools are type-matched: int sites draw from the gold's
/// ints, float sites from its floats, string sites from its strings; a
/// site with an empty pool keeps its original value. Returns the candidate
/// texts — the unmodified prediction first, duplicates removed — and
/// whether enumeration was cut off at `cap`.
pub fn plug_constants(pred: &QueryAst, gold: &GoldConstants, cap: usize) -> (Vec<String>, bool) {
    let mut out = vec![pred.text()];
    let mut seen: BTreeSet<String> = out.iter().cloned().collect();

    let mut axes: Vec<(usize, Vec<Replacement>)> = Vec::new();
    for site in pred.sites() {
        let pool: Vec<Replacement> = match site.kind {
            SiteKind::IntConst => gold.ints.iter().map(|&v| Replacement::Int(v)).collect(),
            SiteKind::FloatConst => gold.floats.iter().map(|&v| Replacement::Float(v)).collect(),
            SiteKind::StringConst => {
                gold.strings.iter().map(|s| Replacement::Str(s.clone())).collect()
            }
            _ => Vec::new(),
        };
        if !pool.is_empty() {
            axes.push((site.index, pool));
        }
    }
    if axes.is_empty() {
        return (out, false);
    }

    let mut odometer = vec![0usize; axes.len()];
    loop {
        let assignment: Vec<(usize, Replacement)> = axes
            .iter()
            .zip(&odometer)
            .map(|((site, pool), &k)| (*site, pool[k].clone()))
            .collect();
        if let Some(text) = pred.apply_many(&assignment) {
            if seen.insert(text.clone()) {
                if out.len() >= cap.max(1) {
                    return (out, true);
                }
                out.push(text);
            }
        }
        let mut pos = 0;
        loop {
            odometer[pos] += 1;
            if odometer[pos] < axes[pos].1.len() {
                break;
            }
            odometer[pos] = 0;
            pos += 1;
            if pos == axes.len() {
                return (out, false);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberOutcome {
    Equal,
    NotEqual,
    /// The engine rejected the candidate on this member.
    ExecError,
    /// Skipped: an earlier member already failed this candidate.
    NotAttempted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberCheck {
    pub t: usize,
    pub outcome: MemberOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    /// Line index within the corpus; 0 for standalone calls.
    pub id: usize,
    pub correct: bool,
    /// `t` of the first member that failed the best candidate.
    pub failing_member: Option<usize>,
    /// The passing candidate's text, when it differs from the prediction.
    pub plugged_variant: Option<String>,
    /// Per-member outcomes for the passing candidate (when correct) or for
    /// the candidate that passed the most members.
    pub diagnostics: Vec<MemberCheck>,
    pub candidates: usize,
    pub plug_truncated: bool,
    pub warnings: Vec<String>,
}

/// Judges one prediction against one suite.
///
/// Correct iff some plugged candidate's denotation equals the gold's on
/// every member. An engine rejection eliminates the candidate, not the
/// prediction; a rejection of the gold is a data error. An empty suite
/// accepts everything vacuously.
pub fn suite_verdict(
    gold_text: &str,
    pred_text: &str,
    loaded: &LoadedSuite,
    gold_constants: &GoldConstants,
    options: &EvalOptions,
) -> Result<Verdict> {
    let n_members =
        if options.sped_up { loaded.member_paths.len().min(1) } else { loaded.member_paths.len() };
    let paths = &loaded.member_paths[..n_members];
    let ts: Vec<usize> = loaded.suite.members[..n_members].iter().map(|m| m.t).collect();

    let gold_ast = QueryAst::parse_unchecked(gold_text)?;
    let flags = CompareFlags {
        order_sensitive: gold_ast.has_top_level_order_by(),
        column_order_insensitive: options.column_order_insensitive,
    };

    let mut warnings: Vec<String> = Vec::new();

    let (candidates, plug_truncated) = if options.plug {
        match QueryAst::parse_unchecked(pred_text) {
            Ok(pred) => plug_constants(&pred, gold_constants, options.plug_cap),
            // Unparseable predictions are still judged: the raw text goes to
            // the engine and fails as ExecError.
            Err(_) => (vec![pred_text.to_string()], false),
        }
    } else {
        (vec![pred_text.to_string()], false)
    };
    if plug_truncated {
        warnings.push(format!("constant plugging truncated at {} candidates", options.plug_cap));
    }

    let mut conns = Vec::with_capacity(paths.len());
    let mut golds: Vec<Denotation> = Vec::with_capacity(paths.len());
    for (j, path) in paths.iter().enumerate() {
        let conn = open_readonly(path)?;
        let d = match execute(&conn, gold_text, options.timeout) {
            Ok(d) => d,
            Err(Error::Exec(e)) => {
                return Err(Error::Data(format!("gold rejected on member t={}: {e}", ts[j])));
            }
            Err(e) => return Err(e),
        };
        if d.is_bottom() {
            warnings
                .push(format!("gold timed out on member t={}; comparisons there are vacuous", ts[j]));
        }
        conns.push(conn);
        golds.push(d);
    }

    // (members passed, diagnostics, first failing t); best seen so far.
    let mut best: Option<(usize, Vec<MemberCheck>, Option<usize>)> = None;

    for (ci, cand) in candidates.iter().enumerate() {
        let blank = cand.trim().is_empty();
        let mut checks: Vec<MemberCheck> = Vec::with_capacity(conns.len());
        let mut cand_warnings: Vec<String> = Vec::new();
        let mut passed = 0usize;
        let mut fail: Option<usize> = None;

        for j in 0..conns.len() {
            let outcome = if blank {
                MemberOutcome::ExecError
            } else {
                match execute(&conns[j], cand, options.timeout) {
                    Ok(d) => {
                        let eq = denotations_equal(&golds[j], &d, flags);
                        if let Some(w) = eq.warning {
                            let what = match w {
                                EqWarning::BothBottom => "both denotations timed out",
                                EqWarning::PermutationBudget => "column permutation search capped",
                            };
                            cand_warnings.push(format!("member t={}: {what}", ts[j]));
                        }
                        if eq.equal { MemberOutcome::Equal } else { MemberOutcome::NotEqual }
                    }
                    Err(Error::Exec(_)) => MemberOutcome::ExecError,
                    Err(e) => return Err(e),
                }
            };
            checks.push(MemberCheck { t: ts[j], outcome });
            if outcome == MemberOutcome::Equal {
                passed += 1;
            } else {
                fail = Some(ts[j]);
                break;
            }
        }
        for &t in &ts[checks.len()..conns.len()] {
            checks.push(MemberCheck { t, outcome: MemberOutcome::NotAttempted });
        }

        if passed == conns.len() {
            warnings.extend(cand_warnings);
            return Ok(Verdict {
                id: 0,
                correct: true,
                failing_member: None,
                plugged_variant: (ci > 0).then(|| cand.clone()),
                diagnostics: checks,
                candidates: candidates.len(),
                plug_truncated,
                warnings,
            });
        }
        if best.as_ref().is_none_or(|(bp, _, _)| passed > *bp) {
            best = Some((passed, checks, fail));
        }
    }

    let (_, diagnostics, failing_member) = best.unwrap_or((0, Vec::new(), None));
    Ok(Verdict {
        id: 0,
        correct: false,
        failing_member,
        plugged_variant: None,
        diagnostics,
        candidates: candidates.len(),
        plug_truncated,
        warnings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BucketStat {
    pub n: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleReport {
    pub id: usize,
    pub db_id: String,
    pub correct: bool,
    pub failing_member: Option<usize>,
    pub plugged_variant: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineComparison {
    /// Fraction of examples where the baseline and the suite agree.
    pub agreement_rate: f64,
    pub baseline_accuracy: f64,
    /// Examples the baseline rejects but the suite accepts: equivalent
    /// rewrites the exact-match metric cannot see.
    pub baseline_false_negatives: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportOptions {
    pub plug_constants: bool,
    pub plug_cap: usize,
    pub sped_up: bool,
    pub timeout_ms: u64,
    pub column_order_insensitive: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub n: usize,
    pub accuracy: f64,
    /// Per-difficulty accuracy, present when the gold file labels lines.
    pub buckets: BTreeMap<String, BucketStat>,
    pub examples: Vec<ExampleReport>,
    pub baseline: BaselineComparison,
    pub options: ReportOptions,
    pub warnings: Vec<String>,
    /// Full verdicts, for programmatic use; the JSON report carries the
    /// slimmer `examples` entries.
    #[serde(skip)]
    pub verdicts: Vec<Verdict>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

pub(crate) struct GoldLine {
    pub(crate) sql: String,
    pub(crate) db_id: String,
    pub(crate) difficulty: Option<String>,
}

pub(crate) fn parse_gold_lines(text: &str, path: &Path) -> Result<Vec<GoldLine>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        let mut parts = line.split('\t');
        let sql = parts.next().unwrap_or("").trim();
        let db_id = parts.next().map(str::trim).unwrap_or("");
        if sql.is_empty() || db_id.is_empty() {
            return Err(Error::Data(format!(
                "{}:{}: expected `SQL<TAB>db_id[<TAB>difficulty]`",
                path.display(),
                i + 1
            )));
        }
        let difficulty = parts.next().map(|s| s.trim().to_string()).filter(|s| !s.is_empty());
        out.push(GoldLine { sql: sql.to_string(), db_id: db_id.to_string(), difficulty });
    }
    Ok(out)
}

fn read_pred_lines(text: &str) -> Vec<String> {
    text.lines().map(|l| l.trim_end_matches('\r').trim().to_string()).collect()
}

/// Evaluates a line-aligned corpus: `SQL<TAB>db_id[<TAB>difficulty]` per
/// gold line, bare SQL per prediction line. Suites are looked up under
/// `suites_root/{db_id}`. Examples are judged in parallel; the report is
/// ordered by line number.
pub fn evaluate_corpus(
    gold_path: &Path,
    pred_path: &Path,
    suites_root: &Path,
    options: &EvalOptions,
) -> Result<Report> {
    let gold_text = std::fs::read_to_string(gold_path).map_err(|e| Error::io(gold_path, e))?;
    let pred_text = std::fs::read_to_string(pred_path).map_err(|e| Error::io(pred_path, e))?;
    let golds = parse_gold_lines(&gold_text, gold_path)?;
    let preds = read_pred_lines(&pred_text);
    if golds.len() != preds.len() {
        return Err(Error::Data(format!(
            "line count mismatch: {} gold lines vs {} predictions",
            golds.len(),
            preds.len()
        )));
    }

    let mut suites: BTreeMap<String, LoadedSuite> = BTreeMap::new();
    for g in &golds {
        if !suites.contains_key(&g.db_id) {
            let loaded = load_suite(&suites_root.join(&g.db_id))
                .map_err(|e| Error::Data(format!("suite for db_id `{}`: {e}", g.db_id)))?;
            suites.insert(g.db_id.clone(), loaded);
        }
    }

    let verdicts: Vec<Verdict> = golds
        .par_iter()
        .zip(preds.par_iter())
        .enumerate()
        .map(|(i, (g, p))| {
            let at_line = |e: Error| match e {
                Error::Internal(m) => Error::Internal(format!("line {}: {m}", i + 1)),
                other => Error::Data(format!("line {}: {other}", i + 1)),
            };
            let gold_ast = QueryAst::parse_unchecked(&g.sql).map_err(at_line)?;
            let constants = GoldConstants::from_query(&gold_ast);
            let mut v =
                suite_verdict(&g.sql, p, &suites[&g.db_id], &constants, options).map_err(at_line)?;
            v.id = i;
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = verdicts.len();
    let n_correct = verdicts.iter().filter(|v| v.correct).count();
    let accuracy = if n == 0 { 0.0 } else { n_correct as f64 / n as f64 };

    let mut tallies: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (g, v) in golds.iter().zip(&verdicts) {
        if let Some(d) = &g.difficulty {
            let e = tallies.entry(d.clone()).or_default();
            e.0 += 1;
            e.1 += v.correct as usize;
        }
    }
    let buckets = tallies
        .into_iter()
        .map(|(k, (bn, bc))| (k, BucketStat { n: bn, accuracy: bc as f64 / bn as f64 }))
        .collect();

    let examples: Vec<ExampleReport> = golds
        .iter()
        .zip(&verdicts)
        .enumerate()
        .map(|(i, (g, v))| ExampleReport {
            id: i,
            db_id: g.db_id.clone(),
            correct: v.correct,
            failing_member: v.failing_member,
            plugged_variant: v.plugged_variant.clone(),
        })
        .collect();

    let suite_correct: Vec<bool> = verdicts.iter().map(|v| v.correct).collect();
    let baseline = baseline_comparison(&golds, &preds, &suite_correct);

    let mut warnings: Vec<String> = Vec::new();
    if n == 0 {
        warnings.push("empty corpus".to_string());
    }
    for v in &verdicts {
        for w in &v.warnings {
            warnings.push(format!("example {}: {w}", v.id));
        }
    }

    Ok(Report {
        n,
        accuracy,
        buckets,
        examples,
        baseline,
        options: ReportOptions {
            plug_constants: options.plug,
            plug_cap: options.plug_cap,
            sped_up: options.sped_up,
            timeout_ms: options.timeout.as_millis() as u64,
            column_order_insensitive: options.column_order_insensitive,
        },
        warnings,
        verdicts,
    })
}

/// Re-derives the baseline comparison for a report from the files it was
/// produced from. The baseline judges by normalized exact string match, so
/// it can only under-accept: its false negatives are listed, and a
/// baseline "pass" on a suite-rejected prediction is impossible by
/// construction (textually equal queries share denotations).
pub fn compare_with_baseline(
    report: &Report,
    gold_path: &Path,
    pred_path: &Path,
) -> Result<BaselineComparison> {
    let gold_text = std::fs::read_to_string(gold_path).map_err(|e| Error::io(gold_path, e))?;
    let pred_text = std::fs::read_to_string(pred_path).map_err(|e| Error::io(pred_path, e))?;
    let golds = parse_gold_lines(&gold_text, gold_path)?;
    let preds = read_pred_lines(&pred_text);
    if golds.len() != report.examples.len() || preds.len() != report.examples.len() {
        return Err(Error::Data(format!(
            "report covers {} examples but the files have {} gold / {} prediction lines",
            report.examples.len(),
            golds.len(),
            preds.len()
        )));
    }
    let suite_correct: Vec<bool> = report.examples.iter().map(|e| e.correct).collect();
    Ok(baseline_comparison(&golds, &preds, &suite_correct))
}

fn baseline_comparison(
    golds: &[GoldLine],
    preds: &[String],
    suite_correct: &[bool],
) -> BaselineComparison {
    let n = preds.len();
    let mut agree = 0usize;
    let mut base_correct = 0usize;
    let mut false_negatives: Vec<usize> = Vec::new();
    for i in 0..n {
        let b = normalize_sql(&golds[i].sql) == normalize_sql(&preds[i]);
        base_correct += b as usize;
        if b == suite_correct[i] {
            agree += 1;
        } else if !b && suite_correct[i] {
            false_negatives.push(i);
        }
    }
    BaselineComparison {
        agreement_rate: if n == 0 { 1.0 } else { agree as f64 / n as f64 },
        baseline_accuracy: if n == 0 { 0.0 } else { base_correct as f64 / n as f64 },
        baseline_false_negatives: false_negatives,
    }
}

/// Token stream for the exact-match baseline: case-folds everything
/// outside single-quoted strings, collapses whitespace, keeps multi-char
/// operators as single tokens, drops trailing semicolons, and strips
/// parentheses wrapping the whole statement.
pub fn normalize_sql(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks: Vec<String> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '\'' {
            let mut lit = String::from("'");
            i += 1;
            while i < chars.len() {
                if chars[i] == '\'' {
                    if chars.get(i + 1) == Some(&'\'') {
                        lit.push_str("''");
                        i += 2;
                        continue;
                    }
                    i += 1;
                    break;
                }
                lit.push(chars[i]);
                i += 1;
            }
            lit.push('\'');
            toks.push(lit);
            continue;
        }
        if c == '"' {
            let mut id = String::from("\"");
            i += 1;
            while i < chars.len() && chars[i] != '"' {
                id.extend(chars[i].to_lowercase());
                i += 1;
            }
            i = (i + 1).min(chars.len());
            id.push('"');
            toks.push(id);
            continue;
        }
        if c.is_alphanumeric() || c == '_' {
            let mut word = String::new();
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                word.extend(chars[i].to_lowercase());
                i += 1;
            }
            toks.push(word);
            continue;
        }
        if i + 1 < chars.len() {
            let two: String = chars[i..=i + 1].iter().collect();
            if matches!(two.as_str(), "<=" | ">=" | "<>" | "!=" | "||" | "==") {
                toks.push(two);
                i += 2;
                continue;
            }
        }
        toks.push(c.to_string());
        i += 1;
    }
    while toks.last().is_some_and(|t| t == ";") {
        toks.pop();
    }
    strip_wrapping_parens(&mut toks);
    toks
}

fn strip_wrapping_parens(toks: &mut Vec<String>) {
    loop {
        if toks.len() < 2 || toks[0] != "(" || toks[toks.len() - 1] != ")" {
            return;
        }
        let mut depth = 0i64;
        for (i, t) in toks.iter().enumerate() {
            if t == "(" {
                depth += 1;
            } else if t == ")" {
                depth -= 1;
                // The opener must pair with the final closer.
                if depth == 0 && i != toks.len() - 1 {
                    return;
                }
            }
        }
        if depth != 0 {
            return;
        }
        toks.pop();
        toks.remove(0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distiller::{distill, write_suite, DistillConfig, GoldInput};
    use crate::mutation::{generate_neighbors, parse_sql};
    use crate::random::stream_rng;
    use crate::schema::{parse_schemas, Schema};
    use std::sync::OnceLock;

    fn one_int_schema() -> Schema {
        parse_schemas(r#"[{"db_id": "d1", "table_names": ["t"], "columns": [[0, "a", "integer"]]}]"#)
            .unwrap()
            .get("d1")
            .unwrap()
            .clone()
    }

    const FIXTURE_GOLD: &str = "SELECT a FROM t WHERE a > 0";

    /// One distilled suite for `FIXTURE_GOLD`, shared across tests. The
    /// tempdir rides along so the member files outlive the suite.
    fn fixture() -> &'static (tempfile::TempDir, LoadedSuite) {
        static FIX: OnceLock<(tempfile::TempDir, LoadedSuite)> = OnceLock::new();
        FIX.get_or_init(|| {
            let schema = one_int_schema();
            let ast = parse_sql(FIXTURE_GOLD, &schema).unwrap();
            let neighbors =
                generate_neighbors(&ast, &schema, &mut stream_rng(11, "d1/neighbors/q0")).neighbors;
            let golds = vec![GoldInput { id: "q0".to_string(), ast, neighbors }];
            let config = DistillConfig { budget: 150, base_seed: 11, ..DistillConfig::default() };
            let outcome = distill(golds, &schema, &config).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let suite_dir = write_suite(&outcome, &schema, dir.path()).unwrap();
            let loaded = load_suite(&suite_dir).unwrap();
            (dir, loaded)
        })
    }

    fn fixture_constants() -> GoldConstants {
        GoldConstants::from_query(&QueryAst::parse_unchecked(FIXTURE_GOLD).unwrap())
    }

    #[test]
    fn plug_with_zero_constant_sites_returns_pred_only() {
        let pred = QueryAst::parse_unchecked("SELECT a FROM t").unwrap();
        let gold = GoldConstants { ints: vec![1, 2], ..GoldConstants::default() };
        let (cands, truncated) = plug_constants(&pred, &gold, DEFAULT_PLUG_CAP);
        assert_eq!(cands, vec!["SELECT a FROM t".to_string()]);
        assert!(!truncated);
    }

    #[test]
    fn plug_two_int_sites_yields_original_plus_four() {
        let pred = QueryAst::parse_unchecked("SELECT a FROM t WHERE a > 3 AND a < 7").unwrap();
        let gold = GoldConstants { ints: vec![1, 2], ..GoldConstants::default() };
        let (cands, truncated) = plug_constants(&pred, &gold, DEFAULT_PLUG_CAP);
        assert!(!truncated);
        assert_eq!(cands.len(), 5);
        assert_eq!(cands[0], "SELECT a FROM t WHERE a > 3 AND a < 7");
        for (lo, hi) in [(1, 1), (2, 1), (1, 2), (2, 2)] {
            let want = format!("SELECT a FROM t WHERE a > {lo} AND a < {hi}");
            assert!(cands.contains(&want), "missing {want:?} in {cands:?}");
        }
    }

    #[test]
    fn plug_replaces_like_pattern_with_gold_string() {
        let pred = QueryAst::parse_unchecked("SELECT a FROM t WHERE name LIKE '%X%'").unwrap();
        let gold = GoldConstants { strings: vec!["X".to_string()], ..GoldConstants::default() };
        let (cands, _) = plug_constants(&pred, &gold, DEFAULT_PLUG_CAP);
        assert!(cands.contains(&"SELECT a FROM t WHERE name LIKE 'X'".to_string()), "{cands:?}");
    }

    #[test]
    fn plug_dedups_assignments_matching_the_original() {
        let pred = QueryAst::parse_unchecked("SELECT a FROM t WHERE a > 1").unwrap();
        let gold = GoldConstants { ints: vec![1, 2], ..GoldConstants::default() };
        let (cands, _) = plug_constants(&pred, &gold, DEFAULT_PLUG_CAP);
        assert_eq!(
            cands,
            vec![
                "SELECT a FROM t WHERE a > 1".to_string(),
                "SELECT a FROM t WHERE a > 2".to_string()
            ]
        );
    }

    #[test]
    fn plug_cap_truncates_and_flags() {
        let pred = QueryAst::parse_unchecked("SELECT a FROM t WHERE a > 9 AND a < 9").unwrap();
        let gold = GoldConstants { ints: vec![0, 1, 2, 3], ..GoldConstants::default() };
        let (cands, truncated) = plug_constants(&pred, &gold, 5);
        assert!(truncated);
        assert_eq!(cands.len(), 5);
        assert_eq!(cands[0], "SELECT a FROM t WHERE a > 9 AND a < 9");
    }

    #[test]
    fn textual_equality_is_correct() {
        let (_, loaded) = fixture();
        let v = suite_verdict(
            FIXTURE_GOLD,
            FIXTURE_GOLD,
            loaded,
            &fixture_constants(),
            &EvalOptions::default(),
        )
        .unwrap();
        assert!(v.correct);
        assert_eq!(v.failing_member, None);
        assert_eq!(v.plugged_variant, None);
        assert_eq!(v.diagnostics.len(), loaded.suite.members.len());
        assert!(v.diagnostics.iter().all(|c| c.outcome == MemberOutcome::Equal));
    }

    #[test]
    fn distinguished_neighbor_is_incorrect_with_failing_member() {
        let (_, loaded) = fixture();
        let pred = "SELECT a FROM t WHERE a >= 0";
        let covered = loaded.suite.queries[0]
            .neighbors
            .iter()
            .any(|n| n.text == pred && n.distinguished_by.is_some());
        assert!(covered, "fixture suite must cover the >= flip");
        let v =
            suite_verdict(FIXTURE_GOLD, pred, loaded, &fixture_constants(), &EvalOptions::default())
                .unwrap();
        assert!(!v.correct);
        assert!(v.failing_member.is_some());
        assert!(v.diagnostics.iter().any(|c| c.outcome == MemberOutcome::NotEqual));
    }

    #[test]
    fn idempotent_conjunct_is_correct() {
        let (_, loaded) = fixture();
        let v = suite_verdict(
            FIXTURE_GOLD,
            "SELECT a FROM t WHERE a > 0 AND a > 0",
            loaded,
            &fixture_constants(),
            &EvalOptions::default(),
        )
        .unwrap();
        assert!(v.correct);
        assert_eq!(v.plugged_variant, None, "the unplugged prediction itself passes");
    }

    #[test]
    fn plugging_rescues_a_wrong_constant() {
        let (_, loaded) = fixture();
        // Full coverage of the +1 variant means some member holds a row with
        // a = 1, which also separates `a > 5` from the gold.
        let one_covered = loaded.suite.queries[0]
            .neighbors
            .iter()
            .any(|n| n.text == "SELECT a FROM t WHERE a > 1" && n.distinguished_by.is_some());
        assert!(one_covered);

        let pred = "SELECT a FROM t WHERE a > 5";
        let constants = fixture_constants();
        let plugged =
            suite_verdict(FIXTURE_GOLD, pred, loaded, &constants, &EvalOptions::default()).unwrap();
        assert!(plugged.correct);
        assert_eq!(plugged.plugged_variant.as_deref(), Some(FIXTURE_GOLD));

        let raw = suite_verdict(
            FIXTURE_GOLD,
            pred,
            loaded,
            &constants,
            &EvalOptions { plug: false, ..EvalOptions::default() },
        )
        .unwrap();
        assert!(!raw.correct);
    }

    #[test]
    fn engine_rejection_eliminates_the_candidate_only() {
        let (_, loaded) = fixture();
        let constants = fixture_constants();
        for pred in ["SELECT nosuch FROM t", "SELEC a FROM t", ""] {
            let v = suite_verdict(FIXTURE_GOLD, pred, loaded, &constants, &EvalOptions::default())
                .unwrap();
            assert!(!v.correct, "{pred:?}");
            assert_eq!(v.diagnostics[0].outcome, MemberOutcome::ExecError, "{pred:?}");
        }
    }

    #[test]
    fn empty_suite_accepts_vacuously() {
        let schema = one_int_schema();
        let ast = parse_sql(FIXTURE_GOLD, &schema).unwrap();
        let neighbors =
            generate_neighbors(&ast, &schema, &mut stream_rng(3, "d1/neighbors/q0")).neighbors;
        let golds = vec![GoldInput { id: "q0".to_string(), ast, neighbors }];
        let config = DistillConfig { budget: 0, base_seed: 3, ..DistillConfig::default() };
        let outcome = distill(golds, &schema, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let loaded = load_suite(&write_suite(&outcome, &schema, dir.path()).unwrap()).unwrap();
        assert!(loaded.suite.members.is_empty());

        let v = suite_verdict(
            FIXTURE_GOLD,
            "SELECT a FROM t WHERE a >= 0",
            &loaded,
            &fixture_constants(),
            &EvalOptions::default(),
        )
        .unwrap();
        assert!(v.correct);
        assert!(v.diagnostics.is_empty());
    }

    #[test]
    fn sped_up_checks_only_the_first_member() {
        let (_, loaded) = fixture();
        let constants = fixture_constants();
        let sped = EvalOptions { sped_up: true, ..EvalOptions::default() };

        let v = suite_verdict(FIXTURE_GOLD, FIXTURE_GOLD, loaded, &constants, &sped).unwrap();
        assert!(v.correct);
        assert!(v.diagnostics.len() <= 1);

        // A neighbor first distinguished by a later member sails past the
        // first one: sped-up accepts what the full suite rejects.
        let first_t = loaded.suite.members[0].t;
        let late = loaded.suite.queries[0]
            .neighbors
            .iter()
            .find(|n| n.distinguished_by.is_some_and(|t| t != first_t));
        if let Some(n) = late {
            let full = suite_verdict(
                FIXTURE_GOLD,
                &n.text,
                loaded,
                &constants,
                &EvalOptions { plug: false, ..EvalOptions::default() },
            )
            .unwrap();
            let quick = suite_verdict(
                FIXTURE_GOLD,
                &n.text,
                loaded,
                &constants,
                &EvalOptions { plug: false, sped_up: true, ..EvalOptions::default() },
            )
            .unwrap();
            assert!(!full.correct);
            assert!(quick.correct, "{}", n.text);
        }
    }

    #[test]
    fn verdicts_are_deterministic() {
        let (_, loaded) = fixture();
        let constants = fixture_constants();
        for pred in [FIXTURE_GOLD, "SELECT a FROM t WHERE a > 5", "SELECT a FROM t WHERE a >= 0"] {
            let a = suite_verdict(FIXTURE_GOLD, pred, loaded, &constants, &EvalOptions::default())
                .unwrap();
            let b = suite_verdict(FIXTURE_GOLD, pred, loaded, &constants, &EvalOptions::default())
                .unwrap();
            assert_eq!(a, b);
        }
    }

    fn write_corpus(dir: &Path, gold: &str, pred: &str) -> (std::path::PathBuf, std::path::PathBuf) {
        let g = dir.join("gold.txt");
        let p = dir.join("pred.txt");
        std::fs::write(&g, gold).unwrap();
        std::fs::write(&p, pred).unwrap();
        (g, p)
    }

    #[test]
    fn corpus_report_covers_accuracy_buckets_and_baseline() {
        let (root, _) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let gold = "SELECT a FROM t WHERE a > 0\td1\teasy\n\
                    SELECT a FROM t WHERE a > 0\td1\teasy\n\
                    SELECT a FROM t WHERE a > 0 AND a < 10\td1\thard\n\
                    SELECT a FROM t WHERE a > 0\td1\thard\n\
                    SELECT a FROM t WHERE a > 0\td1\teasy\n";
        let pred = "SELECT a FROM t WHERE a > 0\n\
                    select a  from t where a > 0;\n\
                    SELECT a FROM t WHERE a < 10 AND a > 0\n\
                    SELECT a FROM t WHERE a >= 0\n\
                    \n";
        let (g, p) = write_corpus(dir.path(), gold, pred);

        let report = evaluate_corpus(&g, &p, root.path(), &EvalOptions::default()).unwrap();
        assert_eq!(report.n, 5);
        assert!((report.accuracy - 0.6).abs() < 1e-12);
        assert_eq!(report.buckets["easy"].n, 3);
        assert!((report.buckets["easy"].accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.buckets["hard"].n, 2);
        assert!((report.buckets["hard"].accuracy - 0.5).abs() < 1e-12);

        let correct: Vec<bool> = report.examples.iter().map(|e| e.correct).collect();
        assert_eq!(correct, vec![true, true, true, false, false]);
        assert_eq!(report.examples[2].plugged_variant, None);
        assert!(report.examples[3].failing_member.is_some());

        assert!((report.baseline.agreement_rate - 0.8).abs() < 1e-12);
        assert!((report.baseline.baseline_accuracy - 0.4).abs() < 1e-12);
        assert_eq!(report.baseline.baseline_false_negatives, vec![2]);

        // The standalone comparison reproduces the embedded one.
        let again = compare_with_baseline(&report, &g, &p).unwrap();
        assert_eq!(again.baseline_false_negatives, report.baseline.baseline_false_negatives);
        assert_eq!(again.agreement_rate, report.baseline.agreement_rate);

        let out = dir.path().join("report.json");
        report.write_json(&out).unwrap();
        let parsed: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        for key in ["n", "accuracy", "buckets", "examples", "baseline", "options"] {
            assert!(parsed.get(key).is_some(), "report JSON missing {key}");
        }
        assert_eq!(parsed["examples"][0]["id"], 0);
        assert_eq!(parsed["baseline"]["baseline_false_negatives"][0], 2);
        assert_eq!(parsed["options"]["plug_constants"], true);
    }

    #[test]
    fn corpus_identity_predictions_score_one() {
        let (root, _) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let gold = "SELECT a FROM t WHERE a > 0\td1\nSELECT a FROM t\td1\n";
        let pred = "SELECT a FROM t WHERE a > 0\nSELECT a FROM t\n";
        let (g, p) = write_corpus(dir.path(), gold, pred);
        let report = evaluate_corpus(&g, &p, root.path(), &EvalOptions::default()).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert!(report.buckets.is_empty());
        assert_eq!(report.baseline.agreement_rate, 1.0);
    }

    #[test]
    fn corpus_line_mismatch_and_missing_suite_are_data_errors() {
        let (root, _) = fixture();
        let dir = tempfile::tempdir().unwrap();

        let (g, p) = write_corpus(dir.path(), "SELECT a FROM t\td1\n", "SELECT a FROM t\nextra\n");
        let err = evaluate_corpus(&g, &p, root.path(), &EvalOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Data(ref m) if m.contains("mismatch")), "{err}");

        let (g, p) = write_corpus(dir.path(), "SELECT a FROM t\tnosuchdb\n", "SELECT a FROM t\n");
        let err = evaluate_corpus(&g, &p, root.path(), &EvalOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Data(ref m) if m.contains("nosuchdb")), "{err}");
    }

    #[test]
    fn normalization_folds_case_space_semicolon_and_wrapping_parens() {
        assert_eq!(normalize_sql("SELECT  A FROM T"), normalize_sql("select a from t"));
        assert_eq!(normalize_sql("select 1;"), normalize_sql("select 1"));
        assert_eq!(normalize_sql("(select 1)"), normalize_sql("select 1"));
        assert_eq!(normalize_sql("((select 1))"), normalize_sql("select 1"));
        assert_eq!(
            normalize_sql("WHERE s = 'CA'").last(),
            normalize_sql("where s = 'CA'").last()
        );
        assert_ne!(normalize_sql("s = 'CA'"), normalize_sql("s = 'ca'"));
        assert_ne!(normalize_sql("a <= b"), normalize_sql("a < = b"));
        assert_ne!(normalize_sql("a != b"), normalize_sql("a <> b"));
        // Interior parens that merely touch both ends are not wrapping.
        let u = normalize_sql("(select 1) union (select 2)");
        assert_eq!(u[0], "(");
    }
}
