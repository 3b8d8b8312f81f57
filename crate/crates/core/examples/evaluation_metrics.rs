//! Balance, alignment and intent spread for a hand-made assignment.
//!
//! cargo run --example evaluation_metrics

use tscan::assignments::{Assignment, AssignmentTable};
use tscan::corpus::GroundTruth;
use tscan::metrics::{
    alignment_accuracy, distribution_from_sizes, intent_confidence, match_clusters,
};

fn main() -> tscan::Result<()> {
    println!("balance of cluster sizes:");
    for sizes in [[25, 25, 25, 25], [40, 30, 20, 10], [97, 1, 1, 1]] {
        let r = distribution_from_sizes(&sizes)?;
        println!(
            "  {sizes:?}: score {:.4}, ideal {:.4}, deviation {:.4}",
            r.score, r.ideal, r.deviation
        );
    }

    // three intents over four clusters; "greet" is split across two
    // (intent, true state, assigned cluster, count)
    let rows = [
        ("greet", 0, 0, 30),
        ("greet", 0, 3, 10),
        ("ask_date", 1, 1, 35),
        ("ask_date", 1, 0, 5),
        ("confirm", 2, 2, 20),
    ];
    let mut truth = GroundTruth::default();
    let mut table = AssignmentTable::new();
    let mut n = 0;
    for (intent, state, cluster, count) in rows {
        for _ in 0..count {
            let id = format!("u{n:03}");
            truth.state_of.insert(id.clone(), state);
            truth.intent_of.insert(id.clone(), intent.to_string());
            table.insert(
                id,
                Assignment {
                    cluster,
                    confidence: 1.0,
                },
            )?;
            n += 1;
        }
    }
    println!(
        "\ncluster to state matching: {:?}",
        match_clusters(&table, &truth)?
    );
    println!(
        "alignment accuracy {:.4}\n",
        alignment_accuracy(&table, &truth)?
    );
    print!(
        "{}",
        intent_confidence(&table, &truth.intent_of, 4)?.to_text()
    );
    Ok(())
}
