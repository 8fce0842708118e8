//! Neighbor queries: single-site mutants of a gold query.
//!
//! A neighbor differs from its gold query at exactly one mutation site, so
//! it is a nearby "almost right" query — the kind a text-to-SQL model
//! plausibly emits. The distiller later searches for databases that tell
//! each neighbor apart from gold; a database suite that distinguishes every
//! neighbor is strong evidence it can catch realistic near-miss predictions.
//!
//! Generation is deterministic given the gold text, schema, and RNG stream;
//! each neighbor records its `(site, replacement)` provenance, and
//! [`replay`] reproduces the exact mutant text from it.

pub mod ast;

pub use ast::{
    parse_sql, CmpOp, MutationSite, QueryAst, Replacement, SiteKind, SitePayload,
};

use rand::Rng;
use rusqlite::Connection;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::execution::{self, Denotation};
use crate::random::random_string;
use crate::schema::Schema;

/// Replayable origin of a neighbor: install `replacement` at `site` of the
/// gold query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub site: usize,
    pub replacement: Replacement,
    /// Human-readable summary, e.g. `int 34 -> 35` or `drop where`.
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub text: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone)]
pub struct NeighborSet {
    /// Canonical serialization of the gold query; never among the neighbors.
    pub gold_text: String,
    pub neighbors: Vec<Neighbor>,
    /// Mutants whose text no longer parsed. These are discarded, not sites
    /// skipped: the count is diagnostic only.
    pub discarded_non_parsing: usize,
}

/// Generates the neighbor set of a parsed gold query.
///
/// Per site: integer constants get `v-1`, `v+1`, and a random integer;
/// float constants `v-0.001`, `v+0.001`, and a uniform draw from ±1e6;
/// string constants a random string, a random proper substring (when length
/// permits), and the value with a random suffix; comparison operators every
/// other comparison operator; resolved column references every same-table
/// column of the same declared type; droppable spans their removal.
/// Results are deduplicated by text and never include the gold text itself.
pub fn generate_neighbors(
    gold: &QueryAst,
    schema: &Schema,
    rng: &mut impl Rng,
) -> NeighborSet {
    let gold_text = gold.text();
    let mut set = NeighborSet {
        gold_text: gold_text.clone(),
        neighbors: Vec::new(),
        discarded_non_parsing: 0,
    };
    let mut seen: std::collections::HashSet<String> = std::collections::HashSet::new();

    for site in gold.sites() {
        for (replacement, label) in site_candidates(site, schema, rng) {
            match gold.apply(site.index, &replacement) {
                None => set.discarded_non_parsing += 1,
                Some(text) => {
                    if text != gold_text && seen.insert(text.clone()) {
                        set.neighbors.push(Neighbor {
                            text,
                            provenance: Provenance {
                                site: site.index,
                                replacement,
                                label,
                            },
                        });
                    }
                }
            }
        }
    }
    set
}

fn site_candidates(
    site: &MutationSite,
    schema: &Schema,
    rng: &mut impl Rng,
) -> Vec<(Replacement, String)> {
    let mut out = Vec::new();
    match &site.payload {
        SitePayload::Int(v) => {
            let mut push = |n: i64| out.push((Replacement::Int(n), format!("int {v} -> {n}")));
            if let Some(n) = v.checked_sub(1) {
                push(n);
            }
            if let Some(n) = v.checked_add(1) {
                push(n);
            }
            push(rng.random::<i64>());
        }
        SitePayload::Float(v) => {
            let mut push =
                |n: f64| out.push((Replacement::Float(n), format!("float {v} -> {n}")));
            push(v - 0.001);
            push(v + 0.001);
            push(rng.random_range(-1e6..=1e6));
        }
        SitePayload::Str(s) => {
            let mut push = |n: String| {
                out.push((Replacement::Str(n.clone()), format!("string '{s}' -> '{n}'")))
            };
            push(random_string(rng));
            let chars: Vec<char> = s.chars().collect();
            if chars.len() >= 2 {
                let sub_len = rng.random_range(1..chars.len());
                let start = rng.random_range(0..=chars.len() - sub_len);
                push(chars[start..start + sub_len].iter().collect());
            }
            push(format!("{s}{}", random_string(rng)));
        }
        SitePayload::Cmp(op) => {
            for alt in CmpOp::ALL {
                if alt != *op {
                    out.push((
                        Replacement::Cmp(alt),
                        format!("op {} -> {}", op.as_str(), alt.as_str()),
                    ));
                }
            }
        }
        SitePayload::Column { table: Some(ti), name } => {
            let table = &schema.tables[*ti];
            if let Some(ci) = table.column_index(name) {
                let decl = table.columns[ci].decl_type;
                for (i, col) in table.columns.iter().enumerate() {
                    if i != ci && col.decl_type == decl {
                        out.push((
                            Replacement::Column(col.name.clone()),
                            format!("column {name} -> {}", col.name),
                        ));
                    }
                }
            }
        }
        SitePayload::Column { table: None, .. } => {}
        SitePayload::Drop { label } => {
            out.push((Replacement::Drop, label.clone()));
        }
    }
    out
}

/// Reproduces a neighbor's text from its provenance. `None` when the
/// provenance does not fit the gold query (wrong site or replacement kind).
pub fn replay(gold: &QueryAst, provenance: &Provenance) -> Option<String> {
    gold.apply(provenance.site, &provenance.replacement)
}

/// Keeps only neighbors that execute on the probe database without an
/// engine error. A timeout is not an error: a query that merely runs too
/// long is still a meaningful candidate to distinguish. Returns the kept
/// neighbors and the number filtered out.
pub fn filter_executable(
    neighbors: Vec<Neighbor>,
    probe: &Connection,
    timeout: std::time::Duration,
) -> Result<(Vec<Neighbor>, usize)> {
    let mut kept = Vec::with_capacity(neighbors.len());
    let mut filtered = 0usize;
    for n in neighbors {
        match execution::execute(probe, &n.text, timeout) {
            Ok(Denotation::Rows { .. }) | Ok(Denotation::Bottom) => kept.push(n),
            Err(crate::Error::Exec(_)) => filtered += 1,
            Err(other) => return Err(other),
        }
    }
    Ok((kept, filtered))
}
