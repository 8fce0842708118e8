//! Judge predicted queries against a distilled suite. A prediction is
//! correct iff its denotation matches the gold's on every member database;
//! before judging, the gold's constants are plugged into the prediction's
//! constant sites so a model is not punished for echoing the wrong literal.
//!
//!     cargo run --example evaluate_predictions

use sqldistill::distiller::{distill, load_suite, write_suite, DistillConfig, GoldInput};
use sqldistill::evaluator::{evaluate_corpus, suite_verdict, EvalOptions};
use sqldistill::mutation::{generate_neighbors, parse_sql, QueryAst};
use sqldistill::random::stream_rng;
use sqldistill::sampler::GoldConstants;
use sqldistill::schema::parse_schemas;

const GOLD: &str = "SELECT name FROM people WHERE age > 30";

fn main() -> sqldistill::Result<()> {
    let schemas = parse_schemas(
        r#"[{
            "db_id": "demo",
            "table_names": ["people"],
            "columns": [[0, "name", "text"], [0, "age", "integer"]]
        }]"#,
    )?;
    let schema = schemas.get("demo").unwrap();

    let ast = parse_sql(GOLD, schema)?;
    let neighbors = generate_neighbors(&ast, schema, &mut stream_rng(7, "demo/neighbors/q0"));
    let golds = vec![GoldInput { id: "q0".into(), ast, neighbors: neighbors.neighbors }];
    let config = DistillConfig { budget: 200, base_seed: 7, ..DistillConfig::default() };
    let outcome = distill(golds, schema, &config)?;

    let dir = tempfile::tempdir().expect("tempdir");
    let loaded = load_suite(&write_suite(&outcome, schema, dir.path())?)?;
    println!("suite: {} members for {}\n", loaded.suite.members.len(), GOLD);

    let constants = GoldConstants::from_query(&QueryAst::parse_unchecked(GOLD)?);
    let options = EvalOptions::default();
    let predictions = [
        GOLD,                                                  // textual match
        "SELECT name FROM people WHERE 30 < age",              // commuted comparison
        "SELECT name FROM people WHERE age >= 30",             // off-by-one boundary
        "SELECT name FROM people WHERE age > 99",              // wrong constant: plugging saves it
        "SELECT nome FROM people WHERE age > 30",              // typo: never executes
    ];
    for pred in predictions {
        let v = suite_verdict(GOLD, pred, &loaded, &constants, &options)?;
        let mark = if v.correct { "correct  " } else { "incorrect" };
        print!("{mark}  {pred}");
        if let Some(via) = &v.plugged_variant {
            print!("   (passed as: {via})");
        }
        if let Some(t) = v.failing_member {
            print!("   (first failing member: t={t})");
        }
        println!();
    }

    // The same verdicts, driven through line-aligned corpus files, produce a
    // JSON report with per-difficulty buckets and an exact-match baseline.
    let gold_file = dir.path().join("gold.txt");
    let pred_file = dir.path().join("pred.txt");
    std::fs::write(&gold_file, format!("{GOLD}\tdemo\teasy\n{GOLD}\tdemo\thard\n"))
        .expect("write gold");
    std::fs::write(
        &pred_file,
        "SELECT name FROM people WHERE 30 < age\nSELECT name FROM people WHERE age >= 30\n",
    )
    .expect("write pred");

    let report = evaluate_corpus(&gold_file, &pred_file, dir.path(), &options)?;
    println!(
        "\ncorpus: accuracy {:.2}, baseline exact-match {:.2}, baseline false negatives {:?}",
        report.accuracy, report.baseline.baseline_accuracy, report.baseline.baseline_false_negatives
    );
    Ok(())
}
