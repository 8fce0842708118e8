//! Query execution against SQLite instances and denotation comparison.
//!
//! A query's *denotation* on an instance is its full result relation; a query
//! that exceeds its time budget denotes `Bottom`. Engine rejections (unknown
//! column, malformed aggregate, ...) are a third, distinct outcome surfaced
//! as [`Error::Exec`] so callers can treat "crashes" differently from "runs
//! forever" and from ordinary results.
//!
//! Comparison semantics:
//! * `Bottom` equals only `Bottom` (and such vacuous comparisons carry a
//!   warning so reports can flag them).
//! * Arity must match; otherwise rows compare as multisets, or as sequences
//!   when the caller marks the comparison order-sensitive (done automatically
//!   for gold queries with a top-level ORDER BY).
//! * Values are normalized: an integer-valued REAL equals the INTEGER of the
//!   same magnitude; text compares byte-wise.
//! * Optionally a single column permutation may be searched so `SELECT a, b`
//!   can match `SELECT b, a`; the search is capped and reports exhaustion.

use std::path::Path;
use std::time::{Duration, Instant};

use rusqlite::types::{ToSqlOutput, ValueRef};
use rusqlite::{Connection, OpenFlags, ToSql};

use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_millis(30_000);

/// How many permutation-search steps `denotations_equal` may spend before
/// giving up and reporting `NotEqual` with a budget warning.
pub const PERMUTATION_PROBE_CAP: usize = 10_000;

/// VM instructions between timeout checks. Small enough that even a tight
/// loop notices an expired deadline within microseconds.
const PROGRESS_STEP: std::os::raw::c_int = 200;

/// A single cell value, normalized for comparison.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl Value {
    /// Normalizes a raw SQLite value: REALs that are exactly representable
    /// as 64-bit integers collapse to `Int`, so `3.0 == 3`.
    pub fn from_sqlite(v: ValueRef<'_>) -> Value {
        match v {
            ValueRef::Null => Value::Null,
            ValueRef::Integer(i) => Value::Int(i),
            ValueRef::Real(r) => {
                if r.fract() == 0.0
                    && (-9_223_372_036_854_775_808.0..9_223_372_036_854_775_808.0).contains(&r)
                    && (r as i64) as f64 == r
                {
                    Value::Int(r as i64)
                } else {
                    Value::Real(r)
                }
            }
            ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into_owned()),
            ValueRef::Blob(b) => Value::Blob(b.to_vec()),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Int(_) => 1,
            Value::Real(_) => 2,
            Value::Text(_) => 3,
            Value::Blob(_) => 4,
        }
    }
}

// SQLite never yields NaN (it becomes NULL), so Real comparison is total.
impl Eq for Value {}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use Value::*;
        match (self, other) {
            (Int(a), Int(b)) => a.cmp(b),
            (Real(a), Real(b)) => a.total_cmp(b),
            (Text(a), Text(b)) => a.cmp(b),
            (Blob(a), Blob(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl ToSql for Value {
    fn to_sql(&self) -> rusqlite::Result<ToSqlOutput<'_>> {
        Ok(match self {
            Value::Null => ToSqlOutput::from(rusqlite::types::Null),
            Value::Int(i) => ToSqlOutput::from(*i),
            Value::Real(r) => ToSqlOutput::from(*r),
            Value::Text(t) => ToSqlOutput::from(t.as_str()),
            Value::Blob(b) => ToSqlOutput::from(b.as_slice()),
        })
    }
}

pub type Row = Vec<Value>;

/// Result of executing a query: its relation, or `Bottom` for a timeout.
#[derive(Debug, Clone, PartialEq)]
pub enum Denotation {
    Rows { width: usize, rows: Vec<Row> },
    Bottom,
}

impl Denotation {
    pub fn is_bottom(&self) -> bool {
        matches!(self, Denotation::Bottom)
    }

    /// True for a zero-row relation. `Bottom` is not empty — it is absent.
    pub fn is_empty_rows(&self) -> bool {
        matches!(self, Denotation::Rows { rows, .. } if rows.is_empty())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompareFlags {
    /// Compare rows as sequences instead of multisets.
    pub order_sensitive: bool,
    /// Allow one column permutation to align the two relations.
    pub column_order_insensitive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqWarning {
    /// Both sides timed out; equality is vacuous.
    BothBottom,
    /// The permutation search hit [`PERMUTATION_PROBE_CAP`]; `equal` is a
    /// conservative `false`.
    PermutationBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Equality {
    pub equal: bool,
    pub warning: Option<EqWarning>,
}

impl Equality {
    fn yes() -> Self {
        Equality { equal: true, warning: None }
    }
    fn no() -> Self {
        Equality { equal: false, warning: None }
    }
}

/// Opens an instance file for querying only.
pub fn open_readonly(path: &Path) -> Result<Connection> {
    let flags = OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX;
    Connection::open_with_flags(path, flags)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Executes `sql` with a wall-clock budget.
///
/// Returns the relation, `Bottom` on timeout, or [`Error::Exec`] when the
/// engine rejects the statement. The connection must be read-only (file
/// connections from [`open_readonly`], in-memory instances behind
/// `PRAGMA query_only`), so a hostile statement cannot mutate the instance.
pub fn execute(conn: &Connection, sql: &str, timeout: Duration) -> Result<Denotation> {
    let deadline = Instant::now() + timeout;
    conn.progress_handler(PROGRESS_STEP, Some(move || Instant::now() >= deadline))
        .map_err(|e| Error::Internal(format!("arming timeout handler: {e}")))?;
    let out = run_query(conn, sql);
    let _ = conn.progress_handler(0, None::<fn() -> bool>);
    match out {
        Ok(d) => Ok(d),
        Err(e) if is_interrupt(&e) => Ok(Denotation::Bottom),
        Err(e) => Err(Error::Exec(e.to_string())),
    }
}

fn run_query(conn: &Connection, sql: &str) -> rusqlite::Result<Denotation> {
    let mut stmt = conn.prepare(sql)?;
    let width = stmt.column_count();
    let mut rows = stmt.query([])?;
    let mut out: Vec<Row> = Vec::new();
    while let Some(row) = rows.next()? {
        let mut vals = Vec::with_capacity(width);
        for i in 0..width {
            vals.push(Value::from_sqlite(row.get_ref(i)?));
        }
        out.push(vals);
    }
    Ok(Denotation::Rows { width, rows: out })
}

fn is_interrupt(e: &rusqlite::Error) -> bool {
    matches!(
        e,
        rusqlite::Error::SqliteFailure(f, _) if f.code == rusqlite::ErrorCode::OperationInterrupted
    )
}

/// Does `candidate` behave differently from `gold` on this instance?
///
/// An engine rejection of the candidate counts as distinguished (the gold is
/// known to execute); a rejection of the gold propagates as an error.
pub fn distinguishes(
    conn: &Connection,
    gold: &str,
    candidate: &str,
    timeout: Duration,
    flags: CompareFlags,
) -> Result<bool> {
    let g = execute(conn, gold, timeout)?;
    let c = match execute(conn, candidate, timeout) {
        Ok(d) => d,
        Err(Error::Exec(_)) => return Ok(true),
        Err(e) => return Err(e),
    };
    Ok(!denotations_equal(&g, &c, flags).equal)
}

pub fn denotations_equal(a: &Denotation, b: &Denotation, flags: CompareFlags) -> Equality {
    use Denotation::*;
    match (a, b) {
        (Bottom, Bottom) => Equality { equal: true, warning: Some(EqWarning::BothBottom) },
        (Bottom, _) | (_, Bottom) => Equality::no(),
        (Rows { width: wa, rows: ra }, Rows { width: wb, rows: rb }) => {
            if wa != wb || ra.len() != rb.len() {
                return Equality::no();
            }
            if !flags.column_order_insensitive {
                let equal = if flags.order_sensitive {
                    ra == rb
                } else {
                    sorted(ra) == sorted(rb)
                };
                return if equal { Equality::yes() } else { Equality::no() };
            }
            columns_permutable(*wa, ra, rb, flags.order_sensitive)
        }
    }
}

fn sorted(rows: &[Row]) -> Vec<Row> {
    let mut v = rows.to_vec();
    v.sort_unstable();
    v
}

fn column(rows: &[Row], i: usize) -> Vec<&Value> {
    rows.iter().map(|r| &r[i]).collect()
}

/// Is there a column permutation under which the two relations agree?
fn columns_permutable(width: usize, ra: &[Row], rb: &[Row], order_sensitive: bool) -> Equality {
    if width <= 1 {
        let equal = if order_sensitive { ra == rb } else { sorted(ra) == sorted(rb) };
        return if equal { Equality::yes() } else { Equality::no() };
    }
    if order_sensitive {
        // With row order fixed, a permutation works iff columns match
        // pairwise as sequences, i.e. the multisets of column sequences agree.
        let mut ca: Vec<Vec<&Value>> = (0..width).map(|i| column(ra, i)).collect();
        let mut cb: Vec<Vec<&Value>> = (0..width).map(|i| column(rb, i)).collect();
        ca.sort_unstable();
        cb.sort_unstable();
        return if ca == cb { Equality::yes() } else { Equality::no() };
    }
    // Multiset case: group columns by value-multiset signature, then try
    // bijections between signature-equal columns, verifying the joint row
    // multiset at each complete assignment.
    let signature = |rows: &[Row], i: usize| -> Vec<Value> {
        let mut s: Vec<Value> = rows.iter().map(|r| r[i].clone()).collect();
        s.sort_unstable();
        s
    };
    let sig_a: Vec<Vec<Value>> = (0..width).map(|i| signature(ra, i)).collect();
    let sig_b: Vec<Vec<Value>> = (0..width).map(|i| signature(rb, i)).collect();
    {
        let mut xs = sig_a.clone();
        let mut ys = sig_b.clone();
        xs.sort_unstable();
        ys.sort_unstable();
        if xs != ys {
            return Equality::no();
        }
    }
    let sorted_b = sorted(rb);
    // perm[j] = source column of `a` feeding output position j.
    let mut perm: Vec<usize> = vec![usize::MAX; width];
    let mut used = vec![false; width];
    let mut probes = 0usize;
    let mut exhausted = false;

    #[allow(clippy::too_many_arguments)]
    fn assign(
        j: usize,
        width: usize,
        sig_a: &[Vec<Value>],
        sig_b: &[Vec<Value>],
        ra: &[Row],
        sorted_b: &[Row],
        perm: &mut [usize],
        used: &mut [bool],
        probes: &mut usize,
        exhausted: &mut bool,
    ) -> bool {
        if *probes >= PERMUTATION_PROBE_CAP {
            *exhausted = true;
            return false;
        }
        *probes += 1;
        if j == width {
            let mut permuted: Vec<Row> = ra
                .iter()
                .map(|r| perm.iter().map(|&i| r[i].clone()).collect())
                .collect();
            permuted.sort_unstable();
            return permuted == sorted_b;
        }
        for i in 0..width {
            if !used[i] && sig_a[i] == sig_b[j] {
                used[i] = true;
                perm[j] = i;
                if assign(j + 1, width, sig_a, sig_b, ra, sorted_b, perm, used, probes, exhausted) {
                    return true;
                }
                used[i] = false;
                if *exhausted {
                    return false;
                }
            }
        }
        false
    }

    let found = assign(
        0, width, &sig_a, &sig_b, ra, &sorted_b, &mut perm, &mut used, &mut probes,
        &mut exhausted,
    );
    if found {
        Equality::yes()
    } else if exhausted {
        Equality { equal: false, warning: Some(EqWarning::PermutationBudget) }
    } else {
        Equality::no()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mem() -> Connection {
        Connection::open_in_memory().unwrap()
    }

    fn rows(width: usize, rows: Vec<Row>) -> Denotation {
        Denotation::Rows { width, rows }
    }

    fn i(v: i64) -> Value {
        Value::Int(v)
    }

    fn t(v: &str) -> Value {
        Value::Text(v.to_string())
    }

    #[test]
    fn executes_simple_select() {
        let conn = mem();
        let d = execute(&conn, "SELECT 1, 'x'", DEFAULT_TIMEOUT).unwrap();
        assert_eq!(d, rows(2, vec![vec![i(1), t("x")]]));
    }

    #[test]
    fn empty_result_keeps_width() {
        let conn = mem();
        conn.execute_batch("CREATE TABLE t (a INTEGER, b INTEGER)").unwrap();
        let d = execute(&conn, "SELECT a, b FROM t", DEFAULT_TIMEOUT).unwrap();
        assert_eq!(d, rows(2, vec![]));
        assert!(d.is_empty_rows());
    }

    #[test]
    fn engine_rejection_is_exec_error_not_bottom() {
        let conn = mem();
        conn.execute_batch("CREATE TABLE t (a INTEGER)").unwrap();
        let err = execute(&conn, "SELECT nosuch FROM t", DEFAULT_TIMEOUT).unwrap_err();
        assert!(matches!(err, Error::Exec(_)));
    }

    #[test]
    fn timeout_yields_bottom() {
        let conn = mem();
        // Unbounded recursive CTE: must hit the deadline, not an error.
        let d = execute(
            &conn,
            "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) \
             SELECT count(*) FROM c",
            Duration::from_millis(30),
        )
        .unwrap();
        assert!(d.is_bottom());
        // The connection stays usable afterwards.
        let d = execute(&conn, "SELECT 2", DEFAULT_TIMEOUT).unwrap();
        assert_eq!(d, rows(1, vec![vec![i(2)]]));
    }

    #[test]
    fn integer_valued_real_normalizes() {
        let conn = mem();
        let a = execute(&conn, "SELECT 3.0", DEFAULT_TIMEOUT).unwrap();
        let b = execute(&conn, "SELECT 3", DEFAULT_TIMEOUT).unwrap();
        assert!(denotations_equal(&a, &b, CompareFlags::default()).equal);
        let c = execute(&conn, "SELECT 3.5", DEFAULT_TIMEOUT).unwrap();
        assert!(!denotations_equal(&a, &c, CompareFlags::default()).equal);
    }

    #[test]
    fn bottom_equals_only_bottom() {
        let flags = CompareFlags::default();
        let eq = denotations_equal(&Denotation::Bottom, &Denotation::Bottom, flags);
        assert!(eq.equal);
        assert_eq!(eq.warning, Some(EqWarning::BothBottom));
        assert!(!denotations_equal(&Denotation::Bottom, &rows(1, vec![]), flags).equal);
        assert!(!denotations_equal(&rows(1, vec![]), &Denotation::Bottom, flags).equal);
    }

    #[test]
    fn arity_mismatch_is_not_equal() {
        let flags = CompareFlags::default();
        assert!(!denotations_equal(&rows(1, vec![]), &rows(2, vec![]), flags).equal);
    }

    #[test]
    fn multiset_vs_sequence_comparison() {
        let a = rows(1, vec![vec![i(1)], vec![i(2)]]);
        let b = rows(1, vec![vec![i(2)], vec![i(1)]]);
        assert!(denotations_equal(&a, &b, CompareFlags::default()).equal);
        let ordered = CompareFlags { order_sensitive: true, ..Default::default() };
        assert!(!denotations_equal(&a, &b, ordered).equal);
    }

    #[test]
    fn multiset_multiplicities_matter() {
        let a = rows(1, vec![vec![i(1)], vec![i(1)], vec![i(2)]]);
        let b = rows(1, vec![vec![i(1)], vec![i(2)], vec![i(2)]]);
        assert!(!denotations_equal(&a, &b, CompareFlags::default()).equal);
    }

    #[test]
    fn column_permutation_is_found() {
        let a = rows(2, vec![vec![i(1), t("x")]]);
        let b = rows(2, vec![vec![t("x"), i(1)]]);
        let strict = CompareFlags::default();
        assert!(!denotations_equal(&a, &b, strict).equal);
        let loose = CompareFlags { column_order_insensitive: true, ..Default::default() };
        assert!(denotations_equal(&a, &b, loose).equal);
    }

    #[test]
    fn column_permutation_respects_row_order() {
        let loose = CompareFlags { order_sensitive: true, column_order_insensitive: true };
        let a = rows(2, vec![vec![i(1), t("x")], vec![i(2), t("y")]]);
        let b = rows(2, vec![vec![t("x"), i(1)], vec![t("y"), i(2)]]);
        assert!(denotations_equal(&a, &b, loose).equal);
        let c = rows(2, vec![vec![t("y"), i(2)], vec![t("x"), i(1)]]);
        assert!(!denotations_equal(&a, &c, loose).equal);
    }

    #[test]
    fn permutation_must_align_joint_rows_not_just_signatures() {
        // Column signatures all match, but no permutation maps one relation
        // onto the other.
        let a = rows(
            2,
            vec![vec![i(0), i(1)], vec![i(1), i(0)], vec![i(0), i(0)]],
        );
        let b = rows(
            2,
            vec![vec![i(0), i(0)], vec![i(1), i(1)], vec![i(0), i(0)]],
        );
        let loose = CompareFlags { column_order_insensitive: true, ..Default::default() };
        // Different column signatures here, so make a sharper case below.
        let _ = denotations_equal(&a, &b, loose);

        // a rows: constant columns -> each column is (0,1,2).
        let a = rows(
            3,
            vec![
                vec![i(0), i(0), i(0)],
                vec![i(1), i(1), i(1)],
                vec![i(2), i(2), i(2)],
            ],
        );
        // b columns are rotations of (0,1,2): same signatures, different rows.
        let b = rows(
            3,
            vec![
                vec![i(0), i(1), i(2)],
                vec![i(1), i(2), i(0)],
                vec![i(2), i(0), i(1)],
            ],
        );
        let eq = denotations_equal(&a, &b, loose);
        assert!(!eq.equal);
    }

    #[test]
    fn permutation_budget_exhaustion_warns() {
        // Nine columns, all with signature {0,1,2}, arranged so no
        // permutation works: 9! orderings exceed the probe cap.
        let width = 9;
        let a = rows(
            width,
            (0..3).map(|r| vec![i(r); width]).collect(),
        );
        let b = rows(
            width,
            (0..3)
                .map(|r| (0..width).map(|c| i((r + c as i64) % 3)).collect())
                .collect(),
        );
        let loose = CompareFlags { column_order_insensitive: true, ..Default::default() };
        let eq = denotations_equal(&a, &b, loose);
        assert!(!eq.equal);
        assert_eq!(eq.warning, Some(EqWarning::PermutationBudget));
    }

    #[test]
    fn distinguishes_on_value_sensitive_instance() {
        // Gold keeps positives only; dropping the filter is visible on an
        // instance holding 0 but invisible on one holding 5.
        let gold = "SELECT a FROM t WHERE a > 0";
        let cand = "SELECT a FROM t";
        let flags = CompareFlags::default();

        let conn = mem();
        conn.execute_batch("CREATE TABLE t (a INTEGER); INSERT INTO t VALUES (0)").unwrap();
        assert!(distinguishes(&conn, gold, cand, DEFAULT_TIMEOUT, flags).unwrap());

        let conn = mem();
        conn.execute_batch("CREATE TABLE t (a INTEGER); INSERT INTO t VALUES (5)").unwrap();
        assert!(!distinguishes(&conn, gold, cand, DEFAULT_TIMEOUT, flags).unwrap());
    }

    #[test]
    fn candidate_rejection_counts_as_distinguished() {
        let conn = mem();
        conn.execute_batch("CREATE TABLE t (a INTEGER)").unwrap();
        let flags = CompareFlags::default();
        assert!(distinguishes(&conn, "SELECT a FROM t", "SELECT z FROM t", DEFAULT_TIMEOUT, flags)
            .unwrap());
        // Gold rejection is an error, not "distinguished".
        assert!(
            distinguishes(&conn, "SELECT z FROM t", "SELECT a FROM t", DEFAULT_TIMEOUT, flags)
                .is_err()
        );
    }
}
