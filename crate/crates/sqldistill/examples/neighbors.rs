//! Enumerate the neighbor queries of a gold query: single-site mutations of
//! its constants, comparison operators, column references, and droppable
//! clauses. Neighbors are what a distilled suite must tell apart from the
//! gold, so this listing is the coverage target everything else chases.
//!
//!     cargo run --example neighbors

use sqldistill::mutation::{generate_neighbors, parse_sql, replay};
use sqldistill::random::stream_rng;
use sqldistill::schema::parse_schemas;

fn main() -> sqldistill::Result<()> {
    let schemas = parse_schemas(
        r#"[{
            "db_id": "demo",
            "table_names": ["people"],
            "columns": [[0, "name", "text"], [0, "age", "integer"], [0, "height", "real"]]
        }]"#,
    )?;
    let schema = schemas.get("demo").unwrap();

    let gold = parse_sql(
        "SELECT name FROM people WHERE age > 34 AND height < 1.9 ORDER BY age",
        schema,
    )?;
    println!("gold: {}", gold.text());
    for span in gold.preserved_spans() {
        println!("kept verbatim (dropping it cannot change results): {span}");
    }

    // The stream name pins the randomness: same seed and scope, same mutants.
    let mut rng = stream_rng(7, "demo/neighbors/q0");
    let set = generate_neighbors(&gold, schema, &mut rng);

    println!(
        "\n{} neighbors ({} non-parsing mutants discarded):",
        set.neighbors.len(),
        set.discarded_non_parsing
    );
    for n in &set.neighbors {
        println!("  [{}] {}", n.provenance.label, n.text);
    }

    // Provenance is complete: every neighbor can be rebuilt from the gold
    // AST plus its (site, replacement) record.
    for n in &set.neighbors {
        assert_eq!(replay(&gold, &n.provenance).as_deref(), Some(n.text.as_str()));
    }
    println!("\nall {} neighbors replay from provenance", set.neighbors.len());
    Ok(())
}
