//! Parsing SQL into a mutation-site-addressable form.
//!
//! A [`QueryAst`] wraps a parsed SELECT statement together with the flat list
//! of its *mutation sites*: constant literals, comparison operators, column
//! references, and droppable spans (clauses or clause parts whose removal
//! still parses). Sites are enumerated by one frozen pre-order traversal, so
//! a `(site index, replacement)` pair replays to the identical mutant text —
//! that pair is the provenance stored with every generated neighbor.
//!
//! Spans whose removal provably cannot change semantics are not sites: the
//! default `ASC` on an ORDER BY key, the `INNER` keyword of an inner join,
//! and redundant parentheses in predicates. They are surfaced in
//! [`QueryAst::preserved_spans`] instead; extending that policy means
//! teaching the drop walk (`visit_drops_*`) about further spans.

use std::collections::BTreeMap;

use sqlparser::ast as sql;
use sqlparser::ast::Value as SqlValue;
use sqlparser::dialect::SQLiteDialect;
use sqlparser::parser::Parser;

use crate::error::{Error, Result};
use crate::schema::Schema;

/// The comparison operators subject to operator mutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] =
        [CmpOp::Eq, CmpOp::NotEq, CmpOp::Lt, CmpOp::LtEq, CmpOp::Gt, CmpOp::GtEq];

    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::NotEq => "!=",
            CmpOp::Lt => "<",
            CmpOp::LtEq => "<=",
            CmpOp::Gt => ">",
            CmpOp::GtEq => ">=",
        }
    }

    fn from_binop(op: &sql::BinaryOperator) -> Option<CmpOp> {
        use sql::BinaryOperator::*;
        Some(match op {
            Eq => CmpOp::Eq,
            NotEq => CmpOp::NotEq,
            Lt => CmpOp::Lt,
            LtEq => CmpOp::LtEq,
            Gt => CmpOp::Gt,
            GtEq => CmpOp::GtEq,
            _ => return None,
        })
    }

    fn to_binop(self) -> sql::BinaryOperator {
        use sql::BinaryOperator::*;
        match self {
            CmpOp::Eq => Eq,
            CmpOp::NotEq => NotEq,
            CmpOp::Lt => Lt,
            CmpOp::LtEq => LtEq,
            CmpOp::Gt => Gt,
            CmpOp::GtEq => GtEq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteKind {
    IntConst,
    FloatConst,
    StringConst,
    ComparisonOp,
    ColumnRef,
    DroppableSpan,
}

/// What currently occupies a site.
#[derive(Debug, Clone, PartialEq)]
pub enum SitePayload {
    Int(i64),
    Float(f64),
    Str(String),
    Cmp(CmpOp),
    /// `table` is the schema table index when the reference resolves
    /// unambiguously; unresolved references admit no column mutation.
    Column { table: Option<usize>, name: String },
    Drop { label: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutationSite {
    pub index: usize,
    pub kind: SiteKind,
    pub payload: SitePayload,
}

/// A value to install at a site. `Drop` removes the span at a
/// `DroppableSpan` site; the other variants overwrite like-kinded sites.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Replacement {
    Int(i64),
    Float(f64),
    Str(String),
    Cmp(CmpOp),
    Column(String),
    Drop,
}

pub struct QueryAst {
    original_text: String,
    query: Box<sql::Query>,
    sites: Vec<MutationSite>,
    n_expr_sites: usize,
    preserved_spans: Vec<String>,
}

impl std::fmt::Debug for QueryAst {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QueryAst")
            .field("text", &self.text())
            .field("sites", &self.sites.len())
            .finish()
    }
}

/// Parses one SELECT statement and enumerates its mutation sites against
/// `schema`. Rejects non-queries, multi-statement input, and references to
/// tables the schema does not declare (CTE names are allowed).
pub fn parse_sql(text: &str, schema: &Schema) -> Result<QueryAst> {
    QueryAst::parse(text, schema)
}

impl QueryAst {
    pub fn parse(text: &str, schema: &Schema) -> Result<QueryAst> {
        Self::parse_impl(text, Some(schema))
    }

    /// Parses without a schema: table names go unvalidated and every column
    /// reference stays unresolved. Constant, operator, and span sites are
    /// enumerated as usual — enough for constant plugging, where no schema
    /// is available.
    pub fn parse_unchecked(text: &str) -> Result<QueryAst> {
        Self::parse_impl(text, None)
    }

    fn parse_impl(text: &str, schema: Option<&Schema>) -> Result<QueryAst> {
        let query = parse_query(text)?;
        let fallback = Schema {
            db_id: String::new(),
            tables: Vec::new(),
            foreign_keys: Vec::new(),
        };
        let resolver = match schema {
            Some(s) => Resolver::build(&query, s)?,
            None => Resolver { aliases: BTreeMap::new() },
        };
        let schema = schema.unwrap_or(&fallback);

        let mut sites: Vec<MutationSite> = Vec::new();
        let mut enumerate = |visit: Visit<'_>| {
            let payload = match visit {
                Visit::Const(e) => const_payload(e),
                Visit::Cmp(op) => CmpOp::from_binop(op).map(SitePayload::Cmp),
                Visit::Col(e) => Some(resolver.resolve(e, schema)),
            };
            if let Some(payload) = payload {
                let kind = match &payload {
                    SitePayload::Int(_) => SiteKind::IntConst,
                    SitePayload::Float(_) => SiteKind::FloatConst,
                    SitePayload::Str(_) => SiteKind::StringConst,
                    SitePayload::Cmp(_) => SiteKind::ComparisonOp,
                    SitePayload::Column { .. } => SiteKind::ColumnRef,
                    SitePayload::Drop { .. } => unreachable!(),
                };
                sites.push(MutationSite { index: sites.len(), kind, payload });
            }
        };
        {
            let mut q = query.clone();
            walk_query(&mut q, &mut enumerate);
        }
        let n_expr_sites = sites.len();

        let mut walk = DropWalk::enumerate();
        {
            let mut q = query.clone();
            visit_drops_query(&mut q, &mut walk);
        }
        for label in walk.labels {
            sites.push(MutationSite {
                index: sites.len(),
                kind: SiteKind::DroppableSpan,
                payload: SitePayload::Drop { label },
            });
        }

        Ok(QueryAst {
            original_text: text.to_string(),
            query,
            sites,
            n_expr_sites,
            preserved_spans: walk.preserved,
        })
    }

    /// The text as given to [`parse_sql`].
    pub fn original_text(&self) -> &str {
        &self.original_text
    }

    /// Canonical serialized form. Semantically identical to the original
    /// text; neighbor texts are compared against this form.
    pub fn text(&self) -> String {
        self.query.to_string()
    }

    pub fn sites(&self) -> &[MutationSite] {
        &self.sites
    }

    /// Spans present in the query that are exempt from span dropping because
    /// their removal cannot change semantics.
    pub fn preserved_spans(&self) -> &[String] {
        &self.preserved_spans
    }

    /// True when the outermost query carries an ORDER BY, which makes its
    /// denotation order-sensitive.
    pub fn has_top_level_order_by(&self) -> bool {
        self.query.order_by.is_some()
    }

    /// Applies one replacement, returning the mutant text. `None` when the
    /// replacement does not fit the site or the mutant no longer parses.
    pub fn apply(&self, site: usize, replacement: &Replacement) -> Option<String> {
        self.apply_many(std::slice::from_ref(&(site, replacement.clone())))
    }

    /// Applies several replacements at distinct sites in one pass.
    pub fn apply_many(&self, subs: &[(usize, Replacement)]) -> Option<String> {
        let by_site: BTreeMap<usize, &Replacement> =
            subs.iter().map(|(i, r)| (*i, r)).collect();
        if by_site.len() != subs.len() {
            return None; // duplicate target sites
        }
        for (&site, replacement) in &by_site {
            let s = self.sites.get(site)?;
            if !compatible(s.kind, replacement) {
                return None;
            }
        }
        let mut q = self.query.clone();

        // Expression sites first, by shared walk position.
        let expr_subs: BTreeMap<usize, &Replacement> = by_site
            .iter()
            .filter(|(i, _)| **i < self.n_expr_sites)
            .map(|(i, r)| (*i, *r))
            .collect();
        if !expr_subs.is_empty() {
            let mut idx = 0usize;
            walk_query(&mut q, &mut |visit: Visit<'_>| {
                let is_site = match &visit {
                    Visit::Const(e) => const_payload(e).is_some(),
                    Visit::Cmp(op) => CmpOp::from_binop(op).is_some(),
                    Visit::Col(_) => true,
                };
                if !is_site {
                    return;
                }
                if let Some(replacement) = expr_subs.get(&idx) {
                    install(visit, replacement);
                }
                idx += 1;
            });
        }

        // Drop sites, one walk per drop (each walk applies a single removal).
        for (&site, replacement) in &by_site {
            if site < self.n_expr_sites {
                continue;
            }
            debug_assert!(matches!(replacement, Replacement::Drop));
            let mut walk = DropWalk::apply(site - self.n_expr_sites);
            visit_drops_query(&mut q, &mut walk);
            if !walk.applied {
                return None;
            }
        }

        let text = q.to_string();
        // Span removal can in principle leave text the parser no longer
        // accepts; such mutants are discarded rather than repaired.
        parse_query(&text).ok()?;
        Some(text)
    }
}

fn parse_query(text: &str) -> Result<Box<sql::Query>> {
    let mut statements = Parser::parse_sql(&SQLiteDialect {}, text)
        .map_err(|e| Error::Parse(e.to_string()))?;
    if statements.len() != 1 {
        return Err(Error::Parse(format!(
            "expected exactly one statement, found {}",
            statements.len()
        )));
    }
    match statements.pop().unwrap() {
        sql::Statement::Query(q) => Ok(q),
        other => Err(Error::Parse(format!(
            "only SELECT statements are supported, found: {other}"
        ))),
    }
}

fn compatible(kind: SiteKind, r: &Replacement) -> bool {
    matches!(
        (kind, r),
        (SiteKind::IntConst, Replacement::Int(_))
            | (SiteKind::IntConst, Replacement::Float(_))
            | (SiteKind::FloatConst, Replacement::Float(_))
            | (SiteKind::FloatConst, Replacement::Int(_))
            | (SiteKind::StringConst, Replacement::Str(_))
            | (SiteKind::ComparisonOp, Replacement::Cmp(_))
            | (SiteKind::ColumnRef, Replacement::Column(_))
            | (SiteKind::DroppableSpan, Replacement::Drop)
    )
}

// ---------------------------------------------------------------------------
// Alias resolution
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq)]
enum AliasTarget {
    /// Schema table index.
    Table(usize),
    /// Derived table, CTE, or colliding alias: columns resolve to no table.
    Opaque,
}

/// Statement-wide alias map. Scoping is deliberately flat: an alias that
/// names different relations in different subqueries becomes opaque, and an
/// unqualified column resolves only when exactly one referenced table
/// declares it. Unresolved references simply admit no column mutation.
struct Resolver {
    aliases: BTreeMap<String, AliasTarget>,
}

impl Resolver {
    fn build(query: &sql::Query, schema: &Schema) -> Result<Resolver> {
        let mut r = Resolver { aliases: BTreeMap::new() };
        let mut ctes: Vec<String> = Vec::new();
        r.scan_query(query, schema, &mut ctes)?;
        Ok(r)
    }

    fn insert(&mut self, key: String, target: AliasTarget) {
        match self.aliases.get(&key) {
            None => {
                self.aliases.insert(key, target);
            }
            Some(existing) if *existing == target => {}
            Some(_) => {
                self.aliases.insert(key, AliasTarget::Opaque);
            }
        }
    }

    fn scan_query(&mut self, q: &sql::Query, schema: &Schema, ctes: &mut Vec<String>) -> Result<()> {
        if let Some(with) = &q.with {
            // Register names first: recursive CTEs reference themselves.
            for cte in &with.cte_tables {
                ctes.push(cte.alias.name.value.to_ascii_lowercase());
            }
            for cte in &with.cte_tables {
                self.scan_query(&cte.query, schema, ctes)?;
            }
        }
        self.scan_set_expr(&q.body, schema, ctes)?;
        let mut res: Result<()> = Ok(());
        let mut scan = |sub: &sql::Query| {
            if res.is_ok() {
                res = self.scan_query(sub, schema, ctes);
            }
        };
        if let Some(order_by) = &q.order_by {
            if let sql::OrderByKind::Expressions(exprs) = &order_by.kind {
                for e in exprs {
                    for_each_subquery(&e.expr, &mut scan);
                }
            }
        }
        res
    }

    fn scan_set_expr(
        &mut self,
        body: &sql::SetExpr,
        schema: &Schema,
        ctes: &mut Vec<String>,
    ) -> Result<()> {
        match body {
            sql::SetExpr::Select(s) => {
                for twj in &s.from {
                    self.scan_factor(&twj.relation, schema, ctes)?;
                    for join in &twj.joins {
                        self.scan_factor(&join.relation, schema, ctes)?;
                    }
                }
                // Subqueries in expressions get scanned too so their tables
                // are validated and aliased.
                let mut res: Result<()> = Ok(());
                for_each_subquery_in_select(s, &mut |sub| {
                    if res.is_ok() {
                        res = self.scan_query(sub, schema, ctes);
                    }
                });
                res
            }
            sql::SetExpr::Query(q) => self.scan_query(q, schema, ctes),
            sql::SetExpr::SetOperation { left, right, .. } => {
                self.scan_set_expr(left, schema, ctes)?;
                self.scan_set_expr(right, schema, ctes)
            }
            _ => Ok(()),
        }
    }

    fn scan_factor(
        &mut self,
        factor: &sql::TableFactor,
        schema: &Schema,
        ctes: &mut Vec<String>,
    ) -> Result<()> {
        match factor {
            sql::TableFactor::Table { name, alias, .. } => {
                let table_name = object_name_tail(name)
                    .ok_or_else(|| Error::Parse(format!("unsupported table name: {name}")))?;
                let lowered = table_name.to_ascii_lowercase();
                let target = if ctes.contains(&lowered) {
                    AliasTarget::Opaque
                } else {
                    match schema.table_index(&table_name) {
                        Some(i) => AliasTarget::Table(i),
                        None => {
                            return Err(Error::Parse(format!(
                                "unknown table '{}' for schema '{}'",
                                table_name, schema.db_id
                            )))
                        }
                    }
                };
                let key = alias
                    .as_ref()
                    .map(|a| a.name.value.to_ascii_lowercase())
                    .unwrap_or(lowered);
                self.insert(key, target);
                Ok(())
            }
            sql::TableFactor::Derived { subquery, alias, .. } => {
                self.scan_query(subquery, schema, ctes)?;
                if let Some(a) = alias {
                    self.insert(a.name.value.to_ascii_lowercase(), AliasTarget::Opaque);
                }
                Ok(())
            }
            sql::TableFactor::NestedJoin { table_with_joins, .. } => {
                self.scan_factor(&table_with_joins.relation, schema, ctes)?;
                for join in &table_with_joins.joins {
                    self.scan_factor(&join.relation, schema, ctes)?;
                }
                Ok(())
            }
            other => Err(Error::Parse(format!("unsupported table reference: {other}"))),
        }
    }

    fn resolve(&self, e: &sql::Expr, schema: &Schema) -> SitePayload {
        match e {
            sql::Expr::Identifier(ident) => {
                let name = ident.value.clone();
                let mut owners: Vec<usize> = Vec::new();
                for target in self.aliases.values() {
                    if let AliasTarget::Table(ti) = target {
                        if schema.tables[*ti].column_index(&name).is_some()
                            && !owners.contains(ti)
                        {
                            owners.push(*ti);
                        }
                    }
                }
                let table = if owners.len() == 1 { Some(owners[0]) } else { None };
                SitePayload::Column { table, name }
            }
            sql::Expr::CompoundIdentifier(parts) => {
                let name = parts.last().map(|i| i.value.clone()).unwrap_or_default();
                let table = if parts.len() >= 2 {
                    let qualifier = parts[parts.len() - 2].value.to_ascii_lowercase();
                    match self.aliases.get(&qualifier) {
                        Some(AliasTarget::Table(ti))
                            if schema.tables[*ti].column_index(&name).is_some() =>
                        {
                            Some(*ti)
                        }
                        _ => None,
                    }
                } else {
                    None
                };
                SitePayload::Column { table, name }
            }
            _ => SitePayload::Column { table: None, name: String::new() },
        }
    }
}

fn object_name_tail(name: &sql::ObjectName) -> Option<String> {
    name.0.last().and_then(|p| p.as_ident()).map(|i| i.value.clone())
}

// ---------------------------------------------------------------------------
// Expression-site walk
// ---------------------------------------------------------------------------

enum Visit<'a> {
    Const(&'a mut sql::Expr),
    Cmp(&'a mut sql::BinaryOperator),
    Col(&'a mut sql::Expr),
}

fn const_payload(e: &sql::Expr) -> Option<SitePayload> {
    match e {
        sql::Expr::Value(v) => match &v.value {
            SqlValue::Number(s, _) => number_payload(s, false),
            SqlValue::SingleQuotedString(s) => Some(SitePayload::Str(s.clone())),
            _ => None,
        },
        sql::Expr::UnaryOp { op: sql::UnaryOperator::Minus, expr } => match expr.as_ref() {
            sql::Expr::Value(v) => match &v.value {
                SqlValue::Number(s, _) => number_payload(s, true),
                _ => None,
            },
            _ => None,
        },
        _ => None,
    }
}

fn number_payload(digits: &str, negative: bool) -> Option<SitePayload> {
    if !digits.contains('.') && !digits.contains(['e', 'E']) {
        let text = if negative { format!("-{digits}") } else { digits.to_string() };
        if let Ok(v) = text.parse::<i64>() {
            return Some(SitePayload::Int(v));
        }
    }
    let v: f64 = digits.parse().ok()?;
    Some(SitePayload::Float(if negative { -v } else { v }))
}

fn install(visit: Visit<'_>, replacement: &Replacement) {
    match (visit, replacement) {
        (Visit::Const(e), Replacement::Int(v)) => *e = int_literal(*v),
        (Visit::Const(e), Replacement::Float(v)) => *e = float_literal(*v),
        (Visit::Const(e), Replacement::Str(s)) => {
            *e = sql::Expr::Value(SqlValue::SingleQuotedString(s.clone()).with_empty_span());
        }
        (Visit::Cmp(op), Replacement::Cmp(c)) => *op = c.to_binop(),
        (Visit::Col(e), Replacement::Column(name)) => match e {
            sql::Expr::Identifier(ident) => ident.value = name.clone(),
            sql::Expr::CompoundIdentifier(parts) => {
                if let Some(last) = parts.last_mut() {
                    last.value = name.clone();
                }
            }
            _ => {}
        },
        _ => {}
    }
}

fn int_literal(v: i64) -> sql::Expr {
    if v < 0 {
        // i64::MIN magnitude overflows i64; format via i128.
        let magnitude = (-(v as i128)).to_string();
        sql::Expr::UnaryOp {
            op: sql::UnaryOperator::Minus,
            expr: Box::new(sql::Expr::Value(
                SqlValue::Number(magnitude, false).with_empty_span(),
            )),
        }
    } else {
        sql::Expr::Value(SqlValue::Number(v.to_string(), false).with_empty_span())
    }
}

/// Formats a float so it stays a float literal: integer-valued floats get a
/// trailing `.0` rather than collapsing into integer syntax.
pub(crate) fn format_float(v: f64) -> String {
    let mut s = format!("{}", v.abs());
    if !s.contains('.') && !s.contains(['e', 'E']) {
        s.push_str(".0");
    }
    s
}

fn float_literal(v: f64) -> sql::Expr {
    let body = sql::Expr::Value(SqlValue::Number(format_float(v), false).with_empty_span());
    if v.is_sign_negative() && v != 0.0 {
        sql::Expr::UnaryOp { op: sql::UnaryOperator::Minus, expr: Box::new(body) }
    } else {
        body
    }
}

/// Pre-order walk over every expression position that can host a mutation
/// site. The order is part of the provenance contract: CTEs, then the body
/// (projection, FROM factors, WHERE, GROUP BY, HAVING), then ORDER BY, then
/// LIMIT/OFFSET. Join ON conditions are deliberately not entered: join
/// predicates are only mutated by span dropping.
fn walk_query(q: &mut sql::Query, f: &mut impl FnMut(Visit<'_>)) {
    if let Some(with) = &mut q.with {
        for cte in &mut with.cte_tables {
            walk_query(&mut cte.query, f);
        }
    }
    walk_set_expr(&mut q.body, f);
    if let Some(order_by) = &mut q.order_by {
        if let sql::OrderByKind::Expressions(exprs) = &mut order_by.kind {
            for e in exprs {
                walk_expr(&mut e.expr, f);
            }
        }
    }
    if let Some(sql::LimitClause::LimitOffset { limit, offset, .. }) = &mut q.limit_clause {
        if let Some(e) = limit {
            walk_expr(e, f);
        }
        if let Some(o) = offset {
            walk_expr(&mut o.value, f);
        }
    }
}

fn walk_set_expr(body: &mut sql::SetExpr, f: &mut impl FnMut(Visit<'_>)) {
    match body {
        sql::SetExpr::Select(s) => walk_select(s, f),
        sql::SetExpr::Query(q) => walk_query(q, f),
        sql::SetExpr::SetOperation { left, right, .. } => {
            walk_set_expr(left, f);
            walk_set_expr(right, f);
        }
        _ => {}
    }
}

fn walk_select(s: &mut sql::Select, f: &mut impl FnMut(Visit<'_>)) {
    for item in &mut s.projection {
        match item {
            sql::SelectItem::UnnamedExpr(e) | sql::SelectItem::ExprWithAlias { expr: e, .. } => {
                walk_expr(e, f);
            }
            _ => {}
        }
    }
    for twj in &mut s.from {
        walk_table_factor(&mut twj.relation, f);
        for join in &mut twj.joins {
            walk_table_factor(&mut join.relation, f);
        }
    }
    if let Some(selection) = &mut s.selection {
        walk_expr(selection, f);
    }
    if let sql::GroupByExpr::Expressions(exprs, _) = &mut s.group_by {
        for e in exprs {
            walk_expr(e, f);
        }
    }
    if let Some(having) = &mut s.having {
        walk_expr(having, f);
    }
}

fn walk_table_factor(factor: &mut sql::TableFactor, f: &mut impl FnMut(Visit<'_>)) {
    match factor {
        sql::TableFactor::Derived { subquery, .. } => walk_query(subquery, f),
        sql::TableFactor::NestedJoin { table_with_joins, .. } => {
            walk_table_factor(&mut table_with_joins.relation, f);
            for join in &mut table_with_joins.joins {
                walk_table_factor(&mut join.relation, f);
            }
        }
        _ => {}
    }
}

fn walk_expr(e: &mut sql::Expr, f: &mut impl FnMut(Visit<'_>)) {
    use sql::Expr;
    // Negative literals are one site covering the whole `-N` node.
    if const_payload(e).is_some() {
        f(Visit::Const(e));
        return;
    }
    match e {
        Expr::Identifier(_) | Expr::CompoundIdentifier(_) => f(Visit::Col(e)),
        Expr::BinaryOp { left, op, right } => {
            if CmpOp::from_binop(op).is_some() {
                f(Visit::Cmp(op));
            }
            walk_expr(left, f);
            walk_expr(right, f);
        }
        Expr::UnaryOp { expr, .. } => walk_expr(expr, f),
        Expr::Nested(inner) => walk_expr(inner, f),
        Expr::IsNull(x) | Expr::IsNotNull(x) => walk_expr(x, f),
        Expr::IsTrue(x) | Expr::IsNotTrue(x) | Expr::IsFalse(x) | Expr::IsNotFalse(x) => {
            walk_expr(x, f)
        }
        Expr::InList { expr, list, .. } => {
            walk_expr(expr, f);
            for item in list {
                walk_expr(item, f);
            }
        }
        Expr::InSubquery { expr, subquery, .. } => {
            walk_expr(expr, f);
            walk_query(subquery, f);
        }
        Expr::Between { expr, low, high, .. } => {
            walk_expr(expr, f);
            walk_expr(low, f);
            walk_expr(high, f);
        }
        Expr::Like { expr, pattern, .. } | Expr::ILike { expr, pattern, .. } => {
            walk_expr(expr, f);
            walk_expr(pattern, f);
        }
        Expr::Function(func) => {
            if let sql::FunctionArguments::List(list) = &mut func.args {
                for arg in &mut list.args {
                    match arg {
                        sql::FunctionArg::Unnamed(sql::FunctionArgExpr::Expr(e))
                        | sql::FunctionArg::Named {
                            arg: sql::FunctionArgExpr::Expr(e), ..
                        } => walk_expr(e, f),
                        _ => {}
                    }
                }
            }
            if let sql::FunctionArguments::Subquery(q) = &mut func.args {
                walk_query(q, f);
            }
            if let Some(filter) = &mut func.filter {
                walk_expr(filter, f);
            }
        }
        Expr::Subquery(q) => walk_query(q, f),
        Expr::Exists { subquery, .. } => walk_query(subquery, f),
        Expr::Case { operand, conditions, else_result, .. } => {
            if let Some(op) = operand {
                walk_expr(op, f);
            }
            for when in conditions {
                walk_expr(&mut when.condition, f);
                walk_expr(&mut when.result, f);
            }
            if let Some(el) = else_result {
                walk_expr(el, f);
            }
        }
        Expr::Cast { expr, .. } => walk_expr(expr, f),
        Expr::Tuple(items) => {
            for item in items {
                walk_expr(item, f);
            }
        }
        _ => {}
    }
}

// ---------------------------------------------------------------------------
// Droppable-span walk
// ---------------------------------------------------------------------------

struct DropWalk {
    counter: usize,
    target: Option<usize>,
    labels: Vec<String>,
    preserved: Vec<String>,
    applied: bool,
}

impl DropWalk {
    fn enumerate() -> DropWalk {
        DropWalk { counter: 0, target: None, labels: Vec::new(), preserved: Vec::new(), applied: false }
    }

    fn apply(target: usize) -> DropWalk {
        DropWalk { counter: 0, target: Some(target), labels: Vec::new(), preserved: Vec::new(), applied: false }
    }

    /// Visits one droppable span; in apply mode runs `remove` when this is
    /// the targeted span.
    fn site(&mut self, label: String, remove: impl FnOnce()) {
        let idx = self.counter;
        self.counter += 1;
        match self.target {
            None => self.labels.push(label),
            Some(t) if t == idx => {
                remove();
                self.applied = true;
            }
            _ => {}
        }
    }

    fn note_preserved(&mut self, text: String) {
        if self.target.is_none() {
            self.preserved.push(text);
        }
    }

    fn finished(&self) -> bool {
        self.applied
    }
}

/// Same shape as [`walk_query`], but visiting droppable spans: CTE bodies,
/// the body's selects, then the query-level ORDER BY and LIMIT.
fn visit_drops_query(q: &mut sql::Query, w: &mut DropWalk) {
    if let Some(with) = &mut q.with {
        for cte in &mut with.cte_tables {
            visit_drops_query(&mut cte.query, w);
            if w.finished() {
                return;
            }
        }
    }
    visit_drops_set_expr(&mut q.body, w);
    if w.finished() {
        return;
    }
    if q.order_by.is_some() {
        if let Some(order_by) = &q.order_by {
            if let sql::OrderByKind::Expressions(exprs) = &order_by.kind {
                for e in exprs {
                    if e.options.asc == Some(true) {
                        w.note_preserved(format!("ASC on ORDER BY {}", e.expr));
                    }
                }
            }
        }
        w.site("drop order by".to_string(), || q.order_by = None);
        if w.finished() {
            return;
        }
    }
    if q.limit_clause.is_some() {
        w.site("drop limit".to_string(), || q.limit_clause = None);
    }
}

fn visit_drops_set_expr(body: &mut sql::SetExpr, w: &mut DropWalk) {
    match body {
        sql::SetExpr::Select(s) => visit_drops_select(s, w),
        sql::SetExpr::Query(q) => visit_drops_query(q, w),
        sql::SetExpr::SetOperation { left, right, .. } => {
            visit_drops_set_expr(left, w);
            if !w.finished() {
                visit_drops_set_expr(right, w);
            }
        }
        _ => {}
    }
}

fn visit_drops_select(s: &mut sql::Select, w: &mut DropWalk) {
    if matches!(s.distinct, Some(sql::Distinct::Distinct)) {
        w.site("drop distinct".to_string(), || s.distinct = None);
        if w.finished() {
            return;
        }
    }
    if s.from.len() >= 2 {
        for i in 0..s.from.len() {
            let label = format!("drop from item ({})", s.from[i].relation);
            w.site(label, || {
                s.from.remove(i);
            });
            if w.finished() {
                return;
            }
        }
    }
    for ti in 0..s.from.len() {
        for ji in 0..s.from[ti].joins.len() {
            if matches!(s.from[ti].joins[ji].join_operator, sql::JoinOperator::Inner(_)) {
                w.note_preserved(format!(
                    "INNER keyword on join ({})",
                    s.from[ti].joins[ji].relation
                ));
            }
            let label = format!("drop join ({})", s.from[ti].joins[ji].relation);
            w.site(label, || {
                s.from[ti].joins.remove(ji);
            });
            if w.finished() {
                return;
            }
        }
    }
    if s.selection.is_some() {
        w.site("drop where".to_string(), || s.selection = None);
        if w.finished() {
            return;
        }
        let leaves = s.selection.as_ref().map(predicate_leaves).unwrap_or_default();
        if leaves.len() >= 2 {
            for (li, leaf_text) in leaves.iter().enumerate() {
                w.site(format!("drop where predicate ({leaf_text})"), || {
                    let e = s.selection.take().expect("selection present");
                    s.selection = remove_predicate_leaf(e, li);
                });
                if w.finished() {
                    return;
                }
            }
        }
    }
    let group_droppable = matches!(
        &s.group_by,
        sql::GroupByExpr::Expressions(exprs, mods) if !exprs.is_empty() && mods.is_empty()
    );
    if group_droppable {
        w.site("drop group by".to_string(), || {
            s.group_by = sql::GroupByExpr::Expressions(Vec::new(), Vec::new());
        });
        if w.finished() {
            return;
        }
    }
    if s.having.is_some() {
        w.site("drop having".to_string(), || s.having = None);
        if w.finished() {
            return;
        }
    }
    // Descend into derived tables, then subqueries inside expressions.
    for twj in &mut s.from {
        visit_drops_factor(&mut twj.relation, w);
        if w.finished() {
            return;
        }
        for join in &mut twj.joins {
            visit_drops_factor(&mut join.relation, w);
            if w.finished() {
                return;
            }
        }
    }
    let mut sub = |q: &mut sql::Query| visit_drops_query(q, w);
    for item in &mut s.projection {
        match item {
            sql::SelectItem::UnnamedExpr(e) | sql::SelectItem::ExprWithAlias { expr: e, .. } => {
                for_each_subquery_mut(e, &mut sub);
            }
            _ => {}
        }
    }
    if let Some(selection) = &mut s.selection {
        for_each_subquery_mut(selection, &mut sub);
    }
    if let sql::GroupByExpr::Expressions(exprs, _) = &mut s.group_by {
        for e in exprs {
            for_each_subquery_mut(e, &mut sub);
        }
    }
    if let Some(having) = &mut s.having {
        for_each_subquery_mut(having, &mut sub);
    }
}

fn visit_drops_factor(factor: &mut sql::TableFactor, w: &mut DropWalk) {
    match factor {
        sql::TableFactor::Derived { subquery, .. } => visit_drops_query(subquery, w),
        sql::TableFactor::NestedJoin { table_with_joins, .. } => {
            visit_drops_factor(&mut table_with_joins.relation, w);
            if w.finished() {
                return;
            }
            for join in &mut table_with_joins.joins {
                visit_drops_factor(&mut join.relation, w);
                if w.finished() {
                    return;
                }
            }
        }
        _ => {}
    }
}

/// The leaves of a predicate's AND/OR skeleton, as display text.
/// Parentheses are transparent, so `(a AND b) OR c` has three leaves.
fn predicate_leaves(e: &sql::Expr) -> Vec<String> {
    match e {
        sql::Expr::BinaryOp {
            left,
            op: sql::BinaryOperator::And | sql::BinaryOperator::Or,
            right,
        } => {
            let mut v = predicate_leaves(left);
            v.extend(predicate_leaves(right));
            v
        }
        sql::Expr::Nested(inner) => predicate_leaves(inner),
        leaf => vec![leaf.to_string()],
    }
}

/// Removes leaf `idx` from the skeleton; `None` means the whole expression
/// was that leaf (callers only remove leaves when two or more exist).
fn remove_predicate_leaf(e: sql::Expr, idx: usize) -> Option<sql::Expr> {
    match e {
        sql::Expr::BinaryOp { left, op, right }
            if matches!(op, sql::BinaryOperator::And | sql::BinaryOperator::Or) =>
        {
            let n_left = predicate_leaves(&left).len();
            if idx < n_left {
                match remove_predicate_leaf(*left, idx) {
                    None => Some(*right),
                    Some(l) => Some(sql::Expr::BinaryOp { left: Box::new(l), op, right }),
                }
            } else {
                match remove_predicate_leaf(*right, idx - n_left) {
                    None => Some(*left),
                    Some(r) => Some(sql::Expr::BinaryOp { left, op, right: Box::new(r) }),
                }
            }
        }
        sql::Expr::Nested(inner) => {
            remove_predicate_leaf(*inner, idx).map(|x| sql::Expr::Nested(Box::new(x)))
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Subquery scans (shared by the resolver and the drop walk)
// ---------------------------------------------------------------------------

fn for_each_subquery_in_select(s: &sql::Select, f: &mut impl FnMut(&sql::Query)) {
    for item in &s.projection {
        match item {
            sql::SelectItem::UnnamedExpr(e) | sql::SelectItem::ExprWithAlias { expr: e, .. } => {
                for_each_subquery(e, f)
            }
            _ => {}
        }
    }
    if let Some(selection) = &s.selection {
        for_each_subquery(selection, f);
    }
    if let sql::GroupByExpr::Expressions(exprs, _) = &s.group_by {
        for e in exprs {
            for_each_subquery(e, f);
        }
    }
    if let Some(having) = &s.having {
        for_each_subquery(having, f);
    }
}

macro_rules! subquery_scan {
    ($name:ident, $($mutability:tt)*) => {
        fn $name(e: & $($mutability)* sql::Expr, f: &mut impl FnMut(& $($mutability)* sql::Query)) {
            use sql::Expr;
            match e {
                Expr::InSubquery { expr, subquery, .. } => {
                    $name(expr, f);
                    f(subquery);
                }
                Expr::Subquery(q) => f(q),
                Expr::Exists { subquery, .. } => f(subquery),
                Expr::BinaryOp { left, right, .. } => {
                    $name(left, f);
                    $name(right, f);
                }
                Expr::UnaryOp { expr, .. } => $name(expr, f),
                Expr::Nested(inner) => $name(inner, f),
                Expr::IsNull(x) | Expr::IsNotNull(x) => $name(x, f),
                Expr::InList { expr, list, .. } => {
                    $name(expr, f);
                    for item in list {
                        $name(item, f);
                    }
                }
                Expr::Between { expr, low, high, .. } => {
                    $name(expr, f);
                    $name(low, f);
                    $name(high, f);
                }
                Expr::Like { expr, pattern, .. } | Expr::ILike { expr, pattern, .. } => {
                    $name(expr, f);
                    $name(pattern, f);
                }
                Expr::Function(func) => {
                    if let sql::FunctionArguments::List(list) = & $($mutability)* func.args {
                        for arg in & $($mutability)* list.args {
                            match arg {
                                sql::FunctionArg::Unnamed(sql::FunctionArgExpr::Expr(e))
                                | sql::FunctionArg::Named {
                                    arg: sql::FunctionArgExpr::Expr(e), ..
                                } => $name(e, f),
                                _ => {}
                            }
                        }
                    }
                }
                Expr::Case { operand, conditions, else_result, .. } => {
                    if let Some(op) = operand {
                        $name(op, f);
                    }
                    for when in conditions {
                        $name(& $($mutability)* when.condition, f);
                        $name(& $($mutability)* when.result, f);
                    }
                    if let Some(el) = else_result {
                        $name(el, f);
                    }
                }
                Expr::Cast { expr, .. } => $name(expr, f),
                Expr::Tuple(items) => {
                    for item in items {
                        $name(item, f);
                    }
                }
                _ => {}
            }
        }
    };
}

subquery_scan!(for_each_subquery,);
subquery_scan!(for_each_subquery_mut, mut);
