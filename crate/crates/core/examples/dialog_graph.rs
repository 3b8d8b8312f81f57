//! Builds the transition graph from cluster sequences and renders it.
//!
//! Clusters here are the true latent states. The agent and user utterances
//! of a turn share a state, so every state also gets a self-loop.
//!
//! cargo run --example dialog_graph

use tscan::assignments::{Assignment, AssignmentTable};
use tscan::corpus::{generate_synthetic, SyntheticSpec};
use tscan::selflabel::{extract_prototypes, Naming};
use tscan::structure::{build_transitions, prune, to_dot};

fn main() -> tscan::Result<()> {
    let spec = SyntheticSpec {
        transition_matrix: vec![
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.7, 0.3, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 1.0],
        ],
        templates_per_state: 2,
        slot_vocab_size: 10,
        num_dialogs: 300,
        seed: 6,
    };
    let (c, truth) = generate_synthetic(&spec)?;
    let mut table = AssignmentTable::new();
    for (id, &state) in &truth.state_of {
        table.insert(
            id.clone(),
            Assignment {
                cluster: state,
                confidence: 1.0,
            },
        )?;
    }
    let model = build_transitions(&c, &table)?;
    print!("{}", model.to_edge_list(|i| Naming::Joint.name(i)));

    let graph = prune(&model, 0.2)?;
    println!(
        "\n{} of {} edges kept at threshold 0.2\n",
        graph.edges.len(),
        model.edges().len()
    );
    print!("{}", to_dot(&graph, &extract_prototypes(&table, &c, 4)?)?);
    Ok(())
}
