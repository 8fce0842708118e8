//! Relational schema loading, validation, and foreign-key ordering.
//!
//! Schemas arrive as a JSON array of flat column lists (the layout used by
//! text-to-SQL corpora): each entry names its tables, lists every column as
//! `[table_index, column_name, type_string]`, and points primary/foreign keys
//! at flat column indices. Loading normalizes declared types onto the closed
//! set understood by the sampler and rejects anything the rest of the
//! pipeline cannot honor (dangling indices, type-mismatched foreign keys,
//! cyclic foreign-key graphs).

use std::collections::{btree_map, BTreeMap};
use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Normalized column type. Unknown declared types map to `Text` (with a
/// warning recorded on the [`SchemaSet`]); `Boolean` is stored as INTEGER 0/1
/// and `TimeText` as "YYYY-MM-DD HH:MM:SS" strings, matching SQLite affinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnType {
    Integer,
    Real,
    Text,
    Boolean,
    TimeText,
}

impl ColumnType {
    /// Maps a declared type string onto the closed set. Returns the type and
    /// whether the string was recognized.
    pub fn from_decl(decl: &str) -> (ColumnType, bool) {
        match decl.trim().to_ascii_lowercase().as_str() {
            "integer" | "int" | "number" => (ColumnType::Integer, true),
            "real" | "float" | "double" => (ColumnType::Real, true),
            "text" | "varchar" | "string" => (ColumnType::Text, true),
            "boolean" | "bool" => (ColumnType::Boolean, true),
            "time-like-text" | "time" | "datetime" | "date" | "timestamp" => {
                (ColumnType::TimeText, true)
            }
            _ => (ColumnType::Text, false),
        }
    }

    /// SQL column declaration used when materializing instances.
    pub fn sql_decl(self) -> &'static str {
        match self {
            ColumnType::Integer | ColumnType::Boolean => "INTEGER",
            ColumnType::Real => "REAL",
            ColumnType::Text | ColumnType::TimeText => "TEXT",
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ColumnType::Integer => "integer",
            ColumnType::Real => "real",
            ColumnType::Text => "text",
            ColumnType::Boolean => "boolean",
            ColumnType::TimeText => "time-like-text",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub decl_type: ColumnType,
    pub is_primary_key: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name.eq_ignore_ascii_case(name))
    }
}

/// Position of a column: indices into `Schema::tables` and `Table::columns`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnRef {
    pub table: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub db_id: String,
    pub tables: Vec<Table>,
    /// `(child, parent)` single-column foreign keys.
    pub foreign_keys: Vec<(ColumnRef, ColumnRef)>,
}

impl Schema {
    pub fn table_index(&self, name: &str) -> Option<usize> {
        self.tables.iter().position(|t| t.name.eq_ignore_ascii_case(name))
    }

    pub fn column(&self, r: ColumnRef) -> &Column {
        &self.tables[r.table].columns[r.column]
    }

    pub fn qualified_name(&self, r: ColumnRef) -> String {
        format!("{}.{}", self.tables[r.table].name, self.column(r).name)
    }

    /// Foreign-key parent of a column, if any. The loader rejects columns
    /// with more than one parent, so at most one edge matches.
    pub fn fk_parent(&self, child: ColumnRef) -> Option<ColumnRef> {
        self.foreign_keys.iter().find(|(c, _)| *c == child).map(|(_, p)| *p)
    }

    /// Table generation order: every foreign-key parent table precedes its
    /// children; ties broken by declaration order.
    ///
    /// Kahn's algorithm, but each round appends the first (by declaration
    /// index) table whose parents are all placed, which makes the order
    /// deterministic and gives the declaration-order tie-break directly.
    pub fn fk_table_order(&self) -> Vec<String> {
        self.topo_indices()
            .expect("validated schema has an acyclic foreign-key graph")
            .into_iter()
            .map(|i| self.tables[i].name.clone())
            .collect()
    }

    pub(crate) fn topo_indices(&self) -> Option<Vec<usize>> {
        let n = self.tables.len();
        // parents[c] = set of tables that must precede table c.
        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (child, parent) in &self.foreign_keys {
            if child.table != parent.table && !parents[child.table].contains(&parent.table) {
                parents[child.table].push(parent.table);
            }
            if child.table == parent.table {
                // Self-referential tables cannot be ordered parents-first.
                return None;
            }
        }
        let mut placed = vec![false; n];
        let mut order = Vec::with_capacity(n);
        for _ in 0..n {
            let next = (0..n)
                .find(|&i| !placed[i] && parents[i].iter().all(|&p| placed[p]))?;
            placed[next] = true;
            order.push(next);
        }
        Some(order)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Error::schema(&self.db_id, msg);
        let mut seen_tables: Vec<&str> = Vec::new();
        for t in &self.tables {
            if seen_tables.iter().any(|s| s.eq_ignore_ascii_case(&t.name)) {
                return Err(err(format!("duplicate table name '{}'", t.name)));
            }
            seen_tables.push(&t.name);
            if t.columns.is_empty() {
                return Err(err(format!("table '{}' has no columns", t.name)));
            }
            let mut seen_cols: Vec<&str> = Vec::new();
            for c in &t.columns {
                if seen_cols.iter().any(|s| s.eq_ignore_ascii_case(&c.name)) {
                    return Err(err(format!(
                        "duplicate column name '{}.{}'",
                        t.name, c.name
                    )));
                }
                seen_cols.push(&c.name);
            }
        }
        let mut fk_children: Vec<ColumnRef> = Vec::new();
        for (child, parent) in &self.foreign_keys {
            for r in [child, parent] {
                if r.table >= self.tables.len()
                    || r.column >= self.tables[r.table].columns.len()
                {
                    return Err(err("foreign key references a missing column".into()));
                }
            }
            let (ct, pt) = (self.column(*child).decl_type, self.column(*parent).decl_type);
            if ct != pt {
                return Err(err(format!(
                    "foreign key type mismatch: {} is {} but {} is {}",
                    self.qualified_name(*child),
                    ct,
                    self.qualified_name(*parent),
                    pt
                )));
            }
            if fk_children.contains(child) {
                return Err(err(format!(
                    "column {} is the child of more than one foreign key",
                    self.qualified_name(*child)
                )));
            }
            fk_children.push(*child);
        }
        if self.topo_indices().is_none() {
            return Err(err("foreign-key graph is cyclic".into()));
        }
        Ok(())
    }
}

/// A set of validated schemas keyed by `db_id`. Iteration order is sorted by
/// id so downstream artifacts are deterministic.
#[derive(Debug, Default)]
pub struct SchemaSet {
    schemas: BTreeMap<String, Schema>,
    /// Non-fatal findings from loading (e.g. unknown declared types).
    pub warnings: Vec<String>,
}

impl SchemaSet {
    pub fn get(&self, db_id: &str) -> Option<&Schema> {
        self.schemas.get(db_id)
    }

    pub fn iter(&self) -> btree_map::Values<'_, String, Schema> {
        self.schemas.values()
    }

    pub fn len(&self) -> usize {
        self.schemas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemas.is_empty()
    }
}

#[derive(Deserialize)]
struct RawSchema {
    db_id: String,
    table_names: Vec<String>,
    /// `[table_index, column_name, type_string]` in declaration order.
    columns: Vec<(usize, String, String)>,
    #[serde(default)]
    primary_keys: Vec<usize>,
    #[serde(default)]
    foreign_keys: Vec<(usize, usize)>,
}

/// Parses and validates a schema list from its JSON text.
pub fn parse_schemas(json: &str) -> Result<SchemaSet> {
    let raws: Vec<RawSchema> =
        serde_json::from_str(json).map_err(|e| Error::Data(format!("schema JSON: {e}")))?;
    let mut set = SchemaSet::default();
    for raw in raws {
        let (schema, mut warnings) = convert(raw)?;
        schema.validate()?;
        set.warnings.append(&mut warnings);
        if set.schemas.insert(schema.db_id.clone(), schema.clone()).is_some() {
            return Err(Error::schema(&schema.db_id, "duplicate db_id"));
        }
    }
    Ok(set)
}

/// Loads schemas from a JSON file. Loading is idempotent: the same file
/// always yields structurally equal schemas.
pub fn load_schemas(path: &Path) -> Result<SchemaSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_schemas(&text)
}

fn convert(raw: RawSchema) -> Result<(Schema, Vec<String>)> {
    let err = |msg: String| Error::schema(&raw.db_id, msg);
    let mut warnings = Vec::new();
    let mut tables: Vec<Table> = raw
        .table_names
        .iter()
        .map(|name| Table { name: name.clone(), columns: Vec::new() })
        .collect();
    // Flat column index -> ColumnRef, for resolving key references.
    let mut flat: Vec<ColumnRef> = Vec::with_capacity(raw.columns.len());
    for (ti, name, decl) in &raw.columns {
        let Some(table) = tables.get_mut(*ti) else {
            return Err(err(format!("column '{name}' references missing table {ti}")));
        };
        let (decl_type, known) = ColumnType::from_decl(decl);
        if !known {
            warnings.push(format!(
                "schema {}: column {}.{} has unknown type '{}', treating as text",
                raw.db_id, table.name, name, decl
            ));
        }
        flat.push(ColumnRef { table: *ti, column: table.columns.len() });
        table.columns.push(Column { name: name.clone(), decl_type, is_primary_key: false });
    }
    for pk in &raw.primary_keys {
        let Some(r) = flat.get(*pk) else {
            return Err(err(format!("primary key references missing column {pk}")));
        };
        tables[r.table].columns[r.column].is_primary_key = true;
    }
    let mut foreign_keys = Vec::with_capacity(raw.foreign_keys.len());
    for (child, parent) in &raw.foreign_keys {
        let (Some(c), Some(p)) = (flat.get(*child), flat.get(*parent)) else {
            return Err(err(format!("foreign key ({child}, {parent}) references a missing column")));
        };
        foreign_keys.push((*c, *p));
    }
    Ok((Schema { db_id: raw.db_id, tables, foreign_keys }, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema_json(body: &str) -> SchemaSet {
        parse_schemas(body).expect("schema should load")
    }

    #[test]
    fn minimal_single_table() {
        let set = schema_json(
            r#"[{"db_id": "d", "table_names": ["t"],
                 "columns": [[0, "a", "integer"]]}]"#,
        );
        let s = set.get("d").unwrap();
        assert_eq!(s.tables.len(), 1);
        assert_eq!(s.tables[0].columns[0].decl_type, ColumnType::Integer);
        assert!(!s.tables[0].columns[0].is_primary_key);
        assert_eq!(s.fk_table_order(), vec!["t".to_string()]);
    }

    #[test]
    fn loading_is_idempotent() {
        let json = r#"[{"db_id": "d", "table_names": ["t", "u"],
            "columns": [[0, "a", "integer"], [1, "b", "integer"]],
            "primary_keys": [0], "foreign_keys": [[1, 0]]}]"#;
        let a = schema_json(json);
        let b = schema_json(json);
        assert_eq!(a.get("d"), b.get("d"));
    }

    #[test]
    fn unknown_type_maps_to_text_with_warning() {
        let set = schema_json(
            r#"[{"db_id": "d", "table_names": ["t"],
                 "columns": [[0, "a", "blob"]]}]"#,
        );
        assert_eq!(set.get("d").unwrap().tables[0].columns[0].decl_type, ColumnType::Text);
        assert_eq!(set.warnings.len(), 1);
        assert!(set.warnings[0].contains("blob"));
    }

    #[test]
    fn fk_type_mismatch_names_both_columns() {
        let err = parse_schemas(
            r#"[{"db_id": "d", "table_names": ["t", "u"],
                 "columns": [[0, "a", "integer"], [1, "b", "text"]],
                 "foreign_keys": [[0, 1]]}]"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("t.a") && msg.contains("u.b"), "got: {msg}");
    }

    #[test]
    fn fk_cycle_is_rejected() {
        let err = parse_schemas(
            r#"[{"db_id": "d", "table_names": ["t", "u"],
                 "columns": [[0, "a", "integer"], [1, "b", "integer"]],
                 "foreign_keys": [[0, 1], [1, 0]]}]"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("cyclic"));
    }

    #[test]
    fn self_referential_table_is_rejected() {
        let err = parse_schemas(
            r#"[{"db_id": "d", "table_names": ["t"],
                 "columns": [[0, "a", "integer"], [0, "b", "integer"]],
                 "foreign_keys": [[1, 0]]}]"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("cyclic"));
    }

    #[test]
    fn duplicate_db_id_is_rejected() {
        let err = parse_schemas(
            r#"[{"db_id": "d", "table_names": ["t"], "columns": [[0, "a", "integer"]]},
                {"db_id": "d", "table_names": ["u"], "columns": [[0, "b", "integer"]]}]"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate db_id"));
    }

    #[test]
    fn parent_before_child_with_declaration_tie_break() {
        // People declared first but born-state points at State, so State
        // must be generated first.
        let set = schema_json(
            r#"[{"db_id": "ps", "table_names": ["People", "State"],
                 "columns": [[0, "name", "text"], [0, "age", "integer"], [0, "born_state", "text"],
                             [1, "state_name", "text"], [1, "population", "integer"]],
                 "foreign_keys": [[2, 3]]}]"#,
        );
        assert_eq!(set.get("ps").unwrap().fk_table_order(), vec!["State".to_string(), "People".to_string()]);
    }

    #[test]
    fn no_fk_keeps_declaration_order() {
        let set = schema_json(
            r#"[{"db_id": "d", "table_names": ["b", "a", "c"],
                 "columns": [[0, "x", "integer"], [1, "y", "integer"], [2, "z", "integer"]]}]"#,
        );
        assert_eq!(set.get("d").unwrap().fk_table_order(), vec!["b", "a", "c"]);
    }

    /// Chain C -> B -> A must order [A, B, C]. The expectation is frozen from
    /// a brute-force check over all 3! orderings: exactly one places every
    /// parent before its child.
    #[test]
    fn chain_order_matches_brute_force() {
        let set = schema_json(
            r#"[{"db_id": "d", "table_names": ["C", "B", "A"],
                 "columns": [[0, "c1", "integer"], [0, "to_b", "integer"],
                             [1, "b1", "integer"], [1, "to_a", "integer"],
                             [2, "a1", "integer"]],
                 "primary_keys": [2, 4],
                 "foreign_keys": [[1, 2], [3, 4]]}]"#,
        );
        let s = set.get("d").unwrap();

        // Oracle: enumerate all permutations of the three tables and keep
        // those where each FK parent table precedes its child table.
        let names = ["C", "B", "A"];
        let mut valid: Vec<Vec<&str>> = Vec::new();
        for p in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let order: Vec<&str> = p.iter().map(|&i| names[i]).collect();
            let pos = |n: &str| order.iter().position(|x| *x == n).unwrap();
            if pos("A") < pos("B") && pos("B") < pos("C") {
                valid.push(order);
            }
        }
        assert_eq!(valid, vec![vec!["A", "B", "C"]]);
        assert_eq!(s.fk_table_order(), vec!["A", "B", "C"]);
    }

    #[test]
    fn fk_parent_lookup() {
        let set = schema_json(
            r#"[{"db_id": "d", "table_names": ["t", "u"],
                 "columns": [[0, "a", "integer"], [1, "b", "integer"]],
                 "primary_keys": [0], "foreign_keys": [[1, 0]]}]"#,
        );
        let s = set.get("d").unwrap();
        assert_eq!(
            s.fk_parent(ColumnRef { table: 1, column: 0 }),
            Some(ColumnRef { table: 0, column: 0 })
        );
        assert_eq!(s.fk_parent(ColumnRef { table: 0, column: 0 }), None);
    }

    #[test]
    fn type_normalization() {
        assert_eq!(ColumnType::from_decl("INT"), (ColumnType::Integer, true));
        assert_eq!(ColumnType::from_decl("number"), (ColumnType::Integer, true));
        assert_eq!(ColumnType::from_decl("double"), (ColumnType::Real, true));
        assert_eq!(ColumnType::from_decl("varchar"), (ColumnType::Text, true));
        assert_eq!(ColumnType::from_decl("bool"), (ColumnType::Boolean, true));
        assert_eq!(ColumnType::from_decl("datetime"), (ColumnType::TimeText, true));
        assert_eq!(ColumnType::from_decl("geometry"), (ColumnType::Text, false));
    }
}
