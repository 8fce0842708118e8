//! Distill a compact test suite: sample candidate databases and keep only
//! those that distinguish a gold query from some still-undistinguished
//! neighbor. Prints the coverage trace — the fraction of neighbors no kept
//! member can tell apart, after each sampling attempt — then persists the
//! suite and loads it back.
//!
//!     cargo run --example distill_suite

use sqldistill::distiller::{
    distill, evaluate_coverage, load_suite, write_suite, DistillConfig, GoldInput,
};
use sqldistill::mutation::{generate_neighbors, parse_sql};
use sqldistill::random::stream_rng;
use sqldistill::schema::parse_schemas;

fn main() -> sqldistill::Result<()> {
    let schemas = parse_schemas(
        r#"[{
            "db_id": "demo",
            "table_names": ["people"],
            "columns": [[0, "name", "text"], [0, "age", "integer"]]
        }]"#,
    )?;
    let schema = schemas.get("demo").unwrap();

    let seed = 7;
    let texts =
        ["SELECT name FROM people WHERE age > 30", "SELECT name, age FROM people ORDER BY age"];
    let golds: Vec<GoldInput> = texts
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let ast = parse_sql(text, schema)?;
            let scope = format!("demo/neighbors/q{i}");
            let neighbors = generate_neighbors(&ast, schema, &mut stream_rng(seed, &scope));
            Ok(GoldInput { id: format!("q{i}"), ast, neighbors: neighbors.neighbors })
        })
        .collect::<sqldistill::Result<_>>()?;

    let config = DistillConfig { budget: 200, base_seed: seed, ..DistillConfig::default() };
    let outcome = distill(golds, schema, &config)?;

    println!("coverage trace (attempt, undistinguished fraction):");
    for point in &outcome.trace {
        // The trace is dense; print only the attempts that changed coverage.
        let prev = point.t.checked_sub(1).map(|t| outcome.trace[t].undistinguished_fraction);
        if prev != Some(point.undistinguished_fraction) {
            println!("  t={:<4} {:.4}", point.t, point.undistinguished_fraction);
        }
    }

    let coverage = evaluate_coverage(&outcome.suite);
    println!(
        "\nkept {} of {} attempted databases; {}/{} neighbors left undistinguished",
        coverage.suite_size,
        outcome.suite.budget_used,
        coverage.total_undistinguished,
        coverage.total_neighbors
    );
    for q in &coverage.per_query {
        println!("  {}: {}/{} undistinguished", q.id, q.undistinguished, q.neighbors);
    }
    for w in &outcome.warnings {
        println!("warning: {w}");
    }

    // Suites round-trip through disk: member databases, suite.json with the
    // full config echoed, and progress.csv with the trace.
    let dir = tempfile::tempdir().expect("tempdir");
    let suite_dir = write_suite(&outcome, schema, dir.path())?;
    let loaded = load_suite(&suite_dir)?;
    assert_eq!(loaded.suite.members.len(), outcome.suite.members.len());
    println!("\nsuite round-tripped through {}", suite_dir.display());
    Ok(())
}
