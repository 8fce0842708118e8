//! Random database instances biased toward a gold query's constants.
//!
//! Tables fill in foreign-key topological order so child columns can draw
//! uniformly from already-materialized parent values, which guarantees
//! referential integrity by construction. Every other cell flips a coin:
//! with probability `p_gold` it comes from the pool of gold-query constants
//! and their close variants (so WHERE predicates are satisfiable *and*
//! falsifiable with similar frequency), otherwise from a type-appropriate
//! base generator.
//!
//! Instances are pure values until persisted; [`DatabaseInstance::open_memory`]
//! and [`DatabaseInstance::write_file`] materialize them for execution.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use rusqlite::Connection;

use crate::error::{Error, Result};
use crate::execution::Value;
use crate::mutation::{QueryAst, SitePayload};
use crate::random::{derive_seed, random_string, random_timestamp, stream_rng};
use crate::schema::{Column, ColumnType, Schema};

pub const DEFAULT_P_GOLD: f64 = 0.5;
pub const DEFAULT_ROW_RANGE: (usize, usize) = (2, 16);
/// Null rate applied to non-key, non-FK cells when nulls are enabled.
pub const ENABLED_NULL_RATE: f64 = 0.05;
/// Redraw attempts per primary-key cell before giving up.
const PK_ATTEMPTS: usize = 1000;

/// Literal constants of one or more gold queries, by type.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldConstants {
    pub ints: Vec<i64>,
    pub floats: Vec<f64>,
    pub strings: Vec<String>,
}

impl GoldConstants {
    /// Extracts the constants of a parsed query, one per constant site.
    pub fn from_query(ast: &QueryAst) -> GoldConstants {
        let mut g = GoldConstants::default();
        for site in ast.sites() {
            match &site.payload {
                SitePayload::Int(v) => g.ints.push(*v),
                SitePayload::Float(v) => g.floats.push(*v),
                SitePayload::Str(s) => g.strings.push(s.clone()),
                _ => {}
            }
        }
        g
    }

    /// Folds in another query's constants, skipping exact duplicates.
    /// Queries sharing a schema share instances, so their pools merge.
    pub fn merge(&mut self, other: &GoldConstants) {
        for v in &other.ints {
            if !self.ints.contains(v) {
                self.ints.push(*v);
            }
        }
        for v in &other.floats {
            if !self.floats.iter().any(|x| x.to_bits() == v.to_bits()) {
                self.floats.push(*v);
            }
        }
        for s in &other.strings {
            if !self.strings.contains(s) {
                self.strings.push(s.clone());
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.ints.is_empty() && self.floats.is_empty() && self.strings.is_empty()
    }
}

/// `c` and its off-by-one neighbors.
pub fn constant_variants_int(c: i64) -> Vec<i64> {
    let mut v = vec![c];
    v.extend(c.checked_sub(1));
    v.extend(c.checked_add(1));
    v
}

/// `c` and the values one-thousandth away.
pub fn constant_variants_float(c: f64) -> Vec<f64> {
    vec![c, c - 0.001, c + 0.001]
}

/// `c`, `c` decorated with a random prefix and suffix (e.g. `Alice` →
/// `aAlicegg`), and a random proper substring when `c` has one.
pub fn constant_variants_string(c: &str, rng: &mut impl Rng) -> Vec<String> {
    let mut v = vec![c.to_string()];
    v.push(format!("{}{}{}", random_string(rng), c, random_string(rng)));
    let chars: Vec<char> = c.chars().collect();
    if chars.len() >= 2 {
        let sub_len = rng.random_range(1..chars.len());
        let start = rng.random_range(0..=chars.len() - sub_len);
        v.push(chars[start..start + sub_len].iter().collect());
    }
    v
}

#[derive(Debug, Clone, Copy)]
pub struct SamplerConfig {
    /// Inclusive bounds on per-table row counts.
    pub row_range: (usize, usize),
    /// Per-cell probability of drawing from the gold-constant pool.
    pub p_gold: f64,
    /// Per-cell probability of NULL in non-key, non-FK columns.
    pub null_rate: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            row_range: DEFAULT_ROW_RANGE,
            p_gold: DEFAULT_P_GOLD,
            null_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableData {
    pub name: String,
    pub rows: Vec<Vec<Value>>,
}

/// One sampled database. Tables are stored in schema declaration order,
/// regardless of the fill order used during generation.
#[derive(Debug, Clone, PartialEq)]
pub struct DatabaseInstance {
    pub db_id: String,
    pub instance_id: usize,
    pub origin_seed: u64,
    pub tables: Vec<TableData>,
}

/// The typed pool a non-FK cell draws from with probability `p_gold`.
///
/// Numeric pools cross over: a gold integer also seeds the real pool (as its
/// float value) and a gold float seeds the integer pool (via floor/ceil), so
/// a predicate like `height > 2` written against a REAL column still meets
/// boundary values. Boolean columns have no pool — both values are already
/// frequent.
fn gold_pool(col_type: ColumnType, gold: &GoldConstants, rng: &mut impl Rng) -> Vec<Value> {
    match col_type {
        ColumnType::Integer => {
            let mut pool: Vec<i64> = Vec::new();
            for c in &gold.ints {
                for v in constant_variants_int(*c) {
                    if !pool.contains(&v) {
                        pool.push(v);
                    }
                }
            }
            for c in &gold.floats {
                for v in [c.floor(), c.ceil()] {
                    if v >= i64::MIN as f64 && v <= i64::MAX as f64 {
                        let v = v as i64;
                        if !pool.contains(&v) {
                            pool.push(v);
                        }
                    }
                }
            }
            pool.into_iter().map(Value::Int).collect()
        }
        ColumnType::Real => {
            let mut pool: Vec<f64> = Vec::new();
            let mut push = |v: f64| {
                if !pool.iter().any(|x| x.to_bits() == v.to_bits()) {
                    pool.push(v);
                }
            };
            for c in &gold.floats {
                for v in constant_variants_float(*c) {
                    push(v);
                }
            }
            for c in &gold.ints {
                push(*c as f64);
            }
            pool.into_iter().map(Value::Real).collect()
        }
        ColumnType::Text | ColumnType::TimeText => {
            let mut pool: Vec<String> = Vec::new();
            for c in &gold.strings {
                for v in constant_variants_string(c, rng) {
                    if !pool.contains(&v) {
                        pool.push(v);
                    }
                }
            }
            pool.into_iter().map(Value::Text).collect()
        }
        ColumnType::Boolean => Vec::new(),
    }
}

fn base_value(col_type: ColumnType, rng: &mut impl Rng) -> Value {
    match col_type {
        ColumnType::Integer => Value::Int(rng.random::<i64>()),
        ColumnType::Real => Value::Real(rng.random_range(-1e6..=1e6)),
        ColumnType::Text => Value::Text(random_string(rng)),
        ColumnType::Boolean => Value::Int(rng.random_range(0..=1)),
        ColumnType::TimeText => Value::Text(random_timestamp(rng)),
    }
}

/// Samples `n_rows` values for one column.
///
/// `parent_values` marks a foreign-key child: every value is then drawn
/// uniformly from the parent column and nothing else applies. Otherwise each
/// cell independently rolls for NULL (non-key columns only), then for the
/// gold pool, then falls back to the base generator. Primary-key columns
/// redraw until values are distinct.
pub fn sample_column(
    col: &Column,
    parent_values: Option<&[Value]>,
    gold: &GoldConstants,
    n_rows: usize,
    config: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<Vec<Value>> {
    let pool = match parent_values {
        Some(_) => Vec::new(),
        None => gold_pool(col.decl_type, gold, rng),
    };
    let mut used: BTreeSet<Value> = BTreeSet::new();
    let mut out = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let mut attempts = 0;
        let value = loop {
            let v = match parent_values {
                Some(parents) => parents[rng.random_range(0..parents.len())].clone(),
                None => {
                    if !col.is_primary_key
                        && config.null_rate > 0.0
                        && rng.random_bool(config.null_rate)
                    {
                        Value::Null
                    } else if !pool.is_empty() && rng.random_bool(config.p_gold) {
                        pool[rng.random_range(0..pool.len())].clone()
                    } else {
                        base_value(col.decl_type, rng)
                    }
                }
            };
            if !col.is_primary_key {
                break v;
            }
            if !used.contains(&v) {
                used.insert(v.clone());
                break v;
            }
            attempts += 1;
            if attempts >= PK_ATTEMPTS {
                return Err(Error::Data(format!(
                    "cannot sample {n_rows} distinct values for primary key column '{}'",
                    col.name
                )));
            }
        };
        out.push(value);
    }
    Ok(out)
}

/// Samples one full instance. The stream is derived from
/// `(base_seed, "{db_id}/db/{instance_id}")`, so instances for distinct
/// indices can be generated in parallel with results identical to a serial
/// run.
pub fn sample_database(
    schema: &Schema,
    gold: &GoldConstants,
    config: &SamplerConfig,
    base_seed: u64,
    instance_id: usize,
) -> Result<DatabaseInstance> {
    let scope = format!("{}/db/{}", schema.db_id, instance_id);
    sample_with_scope(schema, gold, config, base_seed, &scope, instance_id)
}

/// Samples the probe instance used to pre-filter neighbors. Its stream is
/// disjoint from every suite member's.
pub fn sample_probe(
    schema: &Schema,
    gold: &GoldConstants,
    config: &SamplerConfig,
    base_seed: u64,
) -> Result<DatabaseInstance> {
    let scope = format!("{}/probe", schema.db_id);
    sample_with_scope(schema, gold, config, base_seed, &scope, 0)
}

fn sample_with_scope(
    schema: &Schema,
    gold: &GoldConstants,
    config: &SamplerConfig,
    base_seed: u64,
    scope: &str,
    instance_id: usize,
) -> Result<DatabaseInstance> {
    let (min_rows, max_rows) = config.row_range;
    if min_rows == 0 || min_rows > max_rows {
        return Err(Error::Data(format!(
            "invalid row range [{min_rows}, {max_rows}]"
        )));
    }
    let order = schema
        .topo_indices()
        .ok_or_else(|| Error::schema(&schema.db_id, "foreign-key graph has a cycle"))?;
    let mut rng = stream_rng(base_seed, scope);

    // Column-major per table, in topological fill order.
    let mut columns: Vec<Vec<Vec<Value>>> = vec![Vec::new(); schema.tables.len()];
    for &ti in &order {
        let table = &schema.tables[ti];
        let n_rows = rng.random_range(min_rows..=max_rows);
        let mut cols: Vec<Vec<Value>> = Vec::with_capacity(table.columns.len());
        for (ci, col) in table.columns.iter().enumerate() {
            let parent_owned;
            let parent_values =
                match schema.fk_parent(crate::schema::ColumnRef { table: ti, column: ci }) {
                    Some(parent) => {
                        parent_owned = columns[parent.table][parent.column].clone();
                        Some(parent_owned.as_slice())
                    }
                    None => None,
                };
            let values = sample_column(col, parent_values, gold, n_rows, config, &mut rng)
                .map_err(|e| match e {
                    Error::Data(msg) => Error::Data(format!("{}: {msg}", table.name)),
                    other => other,
                })?;
            cols.push(values);
        }
        columns[ti] = cols;
    }

    let tables = schema
        .tables
        .iter()
        .enumerate()
        .map(|(ti, table)| {
            let cols = &columns[ti];
            let n_rows = cols.first().map(|c| c.len()).unwrap_or(0);
            let rows = (0..n_rows)
                .map(|r| cols.iter().map(|c| c[r].clone()).collect())
                .collect();
            TableData { name: table.name.clone(), rows }
        })
        .collect();

    Ok(DatabaseInstance {
        db_id: schema.db_id.clone(),
        instance_id,
        origin_seed: derive_seed(base_seed, scope),
        tables,
    })
}

fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

fn create_table_sql(schema: &Schema, ti: usize) -> String {
    let table = &schema.tables[ti];
    let mut parts: Vec<String> = table
        .columns
        .iter()
        .map(|c| format!("{} {}", quote_ident(&c.name), c.decl_type.sql_decl()))
        .collect();
    let pk: Vec<String> = table
        .columns
        .iter()
        .filter(|c| c.is_primary_key)
        .map(|c| quote_ident(&c.name))
        .collect();
    if !pk.is_empty() {
        parts.push(format!("PRIMARY KEY ({})", pk.join(", ")));
    }
    format!(
        "CREATE TABLE {} ({})",
        quote_ident(&table.name),
        parts.join(", ")
    )
}

impl DatabaseInstance {
    fn materialize(&self, schema: &Schema, conn: &Connection) -> Result<()> {
        let wrap = |e: rusqlite::Error| Error::Internal(format!("materializing instance: {e}"));
        for (ti, data) in self.tables.iter().enumerate() {
            conn.execute_batch(&create_table_sql(schema, ti)).map_err(wrap)?;
            if data.rows.is_empty() {
                continue;
            }
            let placeholders = vec!["?"; data.rows[0].len()].join(", ");
            let sql = format!(
                "INSERT INTO {} VALUES ({placeholders})",
                quote_ident(&data.name)
            );
            let mut stmt = conn.prepare(&sql).map_err(wrap)?;
            for row in &data.rows {
                stmt.execute(rusqlite::params_from_iter(row.iter())).map_err(wrap)?;
            }
        }
        Ok(())
    }

    /// In-memory connection holding this instance, locked to queries.
    pub fn open_memory(&self, schema: &Schema) -> Result<Connection> {
        let conn = Connection::open_in_memory()
            .map_err(|e| Error::Internal(format!("opening in-memory database: {e}")))?;
        self.materialize(schema, &conn)?;
        conn.execute_batch("PRAGMA query_only = ON")
            .map_err(|e| Error::Internal(format!("setting query_only: {e}")))?;
        Ok(conn)
    }

    /// Persists the instance as a database file, replacing any existing file.
    pub fn write_file(&self, schema: &Schema, path: &Path) -> Result<()> {
        if path.exists() {
            std::fs::remove_file(path).map_err(|e| Error::io(path, e))?;
        }
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let conn = Connection::open(path)
            .map_err(|e| Error::Internal(format!("creating {}: {e}", path.display())))?;
        self.materialize(schema, &conn)?;
        conn.close()
            .map_err(|(_, e)| Error::Internal(format!("closing {}: {e}", path.display())))?;
        Ok(())
    }

    /// Verifies the instance invariants directly on the in-memory data:
    /// referential integrity, primary-key distinctness, and value/type
    /// agreement. Used by tests and the acceptance gate.
    pub fn check_integrity(&self, schema: &Schema) -> Result<()> {
        let fail = |msg: String| Err(Error::schema(&self.db_id, msg));
        for (ti, table) in schema.tables.iter().enumerate() {
            let data = &self.tables[ti];
            for (ci, col) in table.columns.iter().enumerate() {
                let values: Vec<&Value> = data.rows.iter().map(|r| &r[ci]).collect();
                if col.is_primary_key {
                    let distinct: BTreeSet<&Value> = values.iter().copied().collect();
                    if distinct.len() != values.len() {
                        return fail(format!(
                            "duplicate primary key values in {}.{}",
                            table.name, col.name
                        ));
                    }
                }
                for v in &values {
                    let ok = match (col.decl_type, v) {
                        (_, Value::Null) => !col.is_primary_key,
                        (ColumnType::Integer | ColumnType::Boolean, Value::Int(_)) => true,
                        (ColumnType::Real, Value::Real(_)) => true,
                        (ColumnType::Text | ColumnType::TimeText, Value::Text(_)) => true,
                        _ => false,
                    };
                    if !ok {
                        return fail(format!(
                            "value {v:?} does not fit {}.{} ({})",
                            table.name, col.name, col.decl_type
                        ));
                    }
                }
            }
        }
        for (child, parent) in &schema.foreign_keys {
            let parents: BTreeSet<&Value> = self.tables[parent.table]
                .rows
                .iter()
                .map(|r| &r[parent.column])
                .collect();
            for row in &self.tables[child.table].rows {
                let v = &row[child.column];
                if !matches!(v, Value::Null) && !parents.contains(v) {
                    return fail(format!(
                        "foreign key violation: {v:?} in {} not present in {}",
                        schema.qualified_name(*child),
                        schema.qualified_name(*parent)
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::execution;
    use crate::random::stream_rng;
    use crate::schema::parse_schemas;
    use std::time::Duration;

    fn fig_schema() -> Schema {
        parse_schemas(
            r#"[{"db_id": "people_state",
                 "table_names": ["state", "people"],
                 "columns": [[0, "state", "text"],
                             [1, "name", "text"], [1, "age", "integer"], [1, "born_state", "text"]],
                 "primary_keys": [0],
                 "foreign_keys": [[3, 0]]}]"#,
        )
        .unwrap()
        .get("people_state")
        .unwrap()
        .clone()
    }

    #[test]
    fn int_variant_examples() {
        assert_eq!(constant_variants_int(34), vec![34, 33, 35]);
        assert_eq!(constant_variants_int(0), vec![0, -1, 1]);
        assert_eq!(constant_variants_int(i64::MAX), vec![i64::MAX, i64::MAX - 1]);
    }

    #[test]
    fn float_variant_examples() {
        assert_eq!(constant_variants_float(2.5), vec![2.5, 2.499, 2.501]);
    }

    #[test]
    fn string_variants_decorate_and_shrink() {
        let mut rng = stream_rng(11, "variants");
        let v = constant_variants_string("Alice", &mut rng);
        assert_eq!(v[0], "Alice");
        assert!(v[1].contains("Alice") && v[1].len() > 5, "decorated: {}", v[1]);
        assert!(v[2].len() < 5 && !v[2].is_empty() && "Alice".contains(&v[2]));
        // Single-character strings have no proper substring.
        let v = constant_variants_string("x", &mut rng);
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn fk_child_draws_only_parent_values() {
        let schema = fig_schema();
        let gold = GoldConstants::default();
        let config = SamplerConfig { row_range: (1, 1), ..Default::default() };
        let inst = sample_database(&schema, &gold, &config, 7, 0).unwrap();
        let state = &inst.tables[0];
        assert_eq!(state.rows.len(), 1);
        let parent = state.rows[0][0].clone();
        let people = &inst.tables[1];
        assert_eq!(people.rows.len(), 1);
        assert_eq!(people.rows[0][2], parent);
        inst.check_integrity(&schema).unwrap();
    }

    #[test]
    fn referential_integrity_holds_across_instances() {
        let schema = fig_schema();
        let mut gold = GoldConstants::default();
        gold.strings.push("CA".into());
        gold.ints.push(34);
        let config = SamplerConfig::default();
        for t in 0..25 {
            let inst = sample_database(&schema, &gold, &config, 99, t).unwrap();
            inst.check_integrity(&schema).unwrap();
        }
    }

    #[test]
    fn gold_pool_values_appear_in_int_columns() {
        let schema = parse_schemas(
            r#"[{"db_id": "t", "table_names": ["t"], "columns": [[0, "age", "integer"]]}]"#,
        )
        .unwrap()
        .get("t")
        .unwrap()
        .clone();
        let gold = GoldConstants { ints: vec![34], ..Default::default() };
        let config = SamplerConfig { row_range: (40, 40), ..Default::default() };
        let inst = sample_database(&schema, &gold, &config, 3, 0).unwrap();
        let pool_hits = inst.tables[0]
            .rows
            .iter()
            .filter(|r| matches!(r[0], Value::Int(33..=35)))
            .count();
        assert!(pool_hits > 0, "no pool values in 40 rows");
        // Roughly half the cells should be pool draws.
        assert!((8..=32).contains(&pool_hits), "pool hits: {pool_hits}");
    }

    #[test]
    fn numeric_pools_cross_over() {
        let schema = parse_schemas(
            r#"[{"db_id": "t", "table_names": ["t"],
                 "columns": [[0, "height", "real"], [0, "age", "integer"]]}]"#,
        )
        .unwrap()
        .get("t")
        .unwrap()
        .clone();
        let gold = GoldConstants { ints: vec![2], floats: vec![7.5], ..Default::default() };
        let config = SamplerConfig { row_range: (60, 60), ..Default::default() };
        let inst = sample_database(&schema, &gold, &config, 5, 0).unwrap();
        // An integer constant seeds the real column...
        assert!(inst.tables[0].rows.iter().any(|r| r[0] == Value::Real(2.0)));
        // ...and a float constant seeds the integer column via floor/ceil.
        assert!(inst.tables[0]
            .rows
            .iter()
            .any(|r| matches!(r[1], Value::Int(7) | Value::Int(8))));
    }

    #[test]
    fn primary_keys_are_distinct_or_error() {
        let pk_int = Column {
            name: "id".into(),
            decl_type: ColumnType::Integer,
            is_primary_key: true,
        };
        let gold = GoldConstants::default();
        let config = SamplerConfig::default();
        let mut rng = stream_rng(1, "pk");
        let values = sample_column(&pk_int, None, &gold, 16, &config, &mut rng).unwrap();
        let distinct: BTreeSet<&Value> = values.iter().collect();
        assert_eq!(distinct.len(), 16);

        // A boolean primary key has only two possible values.
        let pk_bool = Column {
            name: "flag".into(),
            decl_type: ColumnType::Boolean,
            is_primary_key: true,
        };
        let err = sample_column(&pk_bool, None, &gold, 3, &config, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn same_seed_same_instance_different_index_different() {
        let schema = fig_schema();
        let mut gold = GoldConstants::default();
        gold.strings.push("iowa".into());
        let config = SamplerConfig::default();
        let a = sample_database(&schema, &gold, &config, 42, 3).unwrap();
        let b = sample_database(&schema, &gold, &config, 42, 3).unwrap();
        assert_eq!(a, b);
        let c = sample_database(&schema, &gold, &config, 42, 4).unwrap();
        assert_ne!(a, c);
        let probe = sample_probe(&schema, &gold, &config, 42).unwrap();
        assert_ne!(a.origin_seed, probe.origin_seed);
    }

    #[test]
    fn persisted_file_roundtrips_and_is_readonly() {
        let schema = fig_schema();
        let gold = GoldConstants::default();
        let config = SamplerConfig::default();
        let inst = sample_database(&schema, &gold, &config, 1, 0).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("db_0.sqlite3");
        inst.write_file(&schema, &path).unwrap();

        let conn = execution::open_readonly(&path).unwrap();
        let d = execution::execute(&conn, "SELECT COUNT(*) FROM people", Duration::from_secs(5))
            .unwrap();
        match d {
            execution::Denotation::Rows { rows, .. } => {
                assert_eq!(rows[0][0], Value::Int(inst.tables[1].rows.len() as i64));
            }
            _ => panic!("expected rows"),
        }
        assert!(conn.execute("INSERT INTO state VALUES ('zz')", []).is_err());

        let mem = inst.open_memory(&schema).unwrap();
        assert!(mem.execute("DELETE FROM people", []).is_err());
    }

    #[test]
    fn nulls_only_in_plain_columns_when_enabled() {
        let schema = parse_schemas(
            r#"[{"db_id": "n", "table_names": ["p", "c"],
                 "columns": [[0, "id", "integer"], [0, "note", "text"],
                             [1, "pid", "integer"], [1, "memo", "text"]],
                 "primary_keys": [0],
                 "foreign_keys": [[2, 0]]}]"#,
        )
        .unwrap()
        .get("n")
        .unwrap()
        .clone();
        let gold = GoldConstants::default();
        let config = SamplerConfig {
            row_range: (16, 16),
            null_rate: ENABLED_NULL_RATE,
            ..Default::default()
        };
        let mut saw_null = false;
        for t in 0..20 {
            let inst = sample_database(&schema, &gold, &config, 13, t).unwrap();
            inst.check_integrity(&schema).unwrap();
            for row in &inst.tables[0].rows {
                assert_ne!(row[0], Value::Null, "null primary key");
            }
            for row in &inst.tables[1].rows {
                assert_ne!(row[0], Value::Null, "null foreign key");
                saw_null |= row[1] == Value::Null;
            }
            for row in &inst.tables[0].rows {
                saw_null |= row[1] == Value::Null;
            }
        }
        assert!(saw_null, "no nulls generated at 5% over 640 cells");
    }

    #[test]
    fn boolean_and_timestamp_shapes() {
        let schema = parse_schemas(
            r#"[{"db_id": "b", "table_names": ["b"],
                 "columns": [[0, "flag", "boolean"], [0, "at", "time-like-text"]]}]"#,
        )
        .unwrap()
        .get("b")
        .unwrap()
        .clone();
        let gold = GoldConstants::default();
        let config = SamplerConfig { row_range: (30, 30), ..Default::default() };
        let inst = sample_database(&schema, &gold, &config, 21, 0).unwrap();
        for row in &inst.tables[0].rows {
            assert!(matches!(row[0], Value::Int(0) | Value::Int(1)));
            match &row[1] {
                Value::Text(s) => {
                    let b = s.as_bytes();
                    assert_eq!(b.len(), 19, "timestamp shape: {s}");
                    assert_eq!(b[4], b'-');
                    assert_eq!(b[10], b' ');
                    assert_eq!(b[13], b':');
                }
                other => panic!("expected text timestamp, got {other:?}"),
            }
        }
    }

    #[test]
    fn forced_row_count() {
        let schema = parse_schemas(
            r#"[{"db_id": "one", "table_names": ["solo"], "columns": [[0, "x", "integer"]]}]"#,
        )
        .unwrap()
        .get("one")
        .unwrap()
        .clone();
        let config = SamplerConfig { row_range: (1, 1), ..Default::default() };
        let inst =
            sample_database(&schema, &GoldConstants::default(), &config, 2, 0).unwrap();
        assert_eq!(inst.tables[0].rows.len(), 1);

        let bad = SamplerConfig { row_range: (3, 2), ..Default::default() };
        assert!(sample_database(&schema, &GoldConstants::default(), &bad, 2, 0).is_err());
    }

    #[test]
    fn gold_constants_extraction_and_merge() {
        let schema = fig_schema();
        let ast = crate::mutation::parse_sql(
            "SELECT name FROM people WHERE age > 34 AND born_state = 'CA'",
            &schema,
        )
        .unwrap();
        let g = GoldConstants::from_query(&ast);
        assert_eq!(g.ints, vec![34]);
        assert_eq!(g.strings, vec!["CA".to_string()]);

        let mut merged = g.clone();
        let other = GoldConstants {
            ints: vec![34, 7],
            floats: vec![1.5],
            strings: vec!["CA".into(), "NY".into()],
        };
        merged.merge(&other);
        assert_eq!(merged.ints, vec![34, 7]);
        assert_eq!(merged.floats, vec![1.5]);
        assert_eq!(merged.strings, vec!["CA".to_string(), "NY".to_string()]);
    }
}
