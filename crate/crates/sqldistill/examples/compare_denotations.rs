//! Execute two queries on the same database and compare their denotations —
//! the primitive underneath both distillation and judging. Shows multiset
//! vs. order-sensitive row comparison, the column-permutation flag, and the
//! timeout outcome (Bottom) that engine errors are kept distinct from.
//!
//!     cargo run --example compare_denotations

use std::time::Duration;

use rusqlite::Connection;
use sqldistill::execution::{denotations_equal, execute, CompareFlags, Denotation};

fn main() -> sqldistill::Result<()> {
    let conn = Connection::open_in_memory().expect("open");
    conn.execute_batch(
        "CREATE TABLE people (name TEXT, age INTEGER);
         INSERT INTO people VALUES ('ada', 36), ('bob', 19), ('cid', 36);
         PRAGMA query_only = ON;",
    )
    .expect("seed rows");
    let timeout = Duration::from_secs(5);

    let by_age = execute(&conn, "SELECT name, age FROM people ORDER BY age", timeout)?;
    let by_name = execute(&conn, "SELECT name, age FROM people ORDER BY name", timeout)?;

    // As multisets the two results agree; as sequences they do not.
    let bag = CompareFlags { order_sensitive: false, column_order_insensitive: false };
    let seq = CompareFlags { order_sensitive: true, column_order_insensitive: false };
    println!("same rows, different order:");
    println!("  multiset comparison: {}", verdict(denotations_equal(&by_age, &by_name, bag)));
    println!("  sequence comparison: {}", verdict(denotations_equal(&by_age, &by_name, seq)));

    // Swapped SELECT list: equal only when one column permutation may be
    // applied, which is how predictions escape column-order nitpicks.
    let swapped = execute(&conn, "SELECT age, name FROM people ORDER BY age", timeout)?;
    let loose = CompareFlags { order_sensitive: true, column_order_insensitive: true };
    println!("\nswapped SELECT list:");
    println!("  strict columns: {}", verdict(denotations_equal(&by_age, &swapped, seq)));
    println!("  permuted columns allowed: {}", verdict(denotations_equal(&by_age, &swapped, loose)));

    // A query that cannot finish inside the budget denotes Bottom. That is an
    // outcome, not an error: Bottom compares unequal to every real relation.
    let spin = "WITH RECURSIVE n(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM n) \
                SELECT count(*) FROM n";
    let bottom = execute(&conn, spin, Duration::from_millis(50))?;
    println!("\nrunaway recursive query: {:?}", bottom);
    assert!(matches!(bottom, Denotation::Bottom));
    println!("  vs real rows: {}", verdict(denotations_equal(&bottom, &by_age, bag)));

    // Engine rejections are a different channel entirely.
    let err = execute(&conn, "SELECT nosuch FROM people", timeout).unwrap_err();
    println!("\nengine rejection is an error, not a denotation: {err}");
    Ok(())
}

fn verdict(eq: sqldistill::execution::Equality) -> &'static str {
    if eq.equal {
        "equal"
    } else {
        "not equal"
    }
}
