//! Lambda selection from a dev-split probe grid.
//!
//! Three lambda arms over four (model, budget) cells, with a few
//! incomplete cells in the heaviest arm. The rule picks the arm with the
//! best unweighted mean delta, breaks near-ties toward the smaller
//! lambda, and recomputes over complete cells only as a robustness check.
//!
//! Run: `cargo run --example probe_selection`

use kv_retention::stats::{phase1_select, ProbeCell, ProbeTable};

fn main() {
    let mk = |model: &str, budget: u64, lambda: f64, delta_pp: f64, n: usize| ProbeCell {
        model: model.into(),
        budget,
        lambda,
        delta_pp,
        n,
    };
    let table = ProbeTable {
        cells: vec![
            mk("qwen7b", 64, 0.5, 0.5, 201),
            mk("qwen7b", 128, 0.5, 4.0, 201),
            mk("llama8b", 64, 0.5, 0.0, 201),
            mk("llama8b", 128, 0.5, -1.5, 201),
            mk("qwen7b", 64, 1.0, -1.0, 201),
            mk("qwen7b", 128, 1.0, 1.0, 201),
            mk("llama8b", 64, 1.0, 0.0, 201),
            mk("llama8b", 128, 1.0, -2.0, 201),
            mk("qwen7b", 64, 1.5, 2.5, 200),
            mk("qwen7b", 128, 1.5, 1.0, 164),
            mk("llama8b", 64, 1.5, -1.9, 196),
            mk("llama8b", 128, 1.5, 0.0, 201),
        ],
    };

    let sel = phase1_select(&table, 0.5).unwrap();
    for m in &sel.lambda_means {
        println!(
            "lambda {:<4} mean delta {:+.2} pp over {} cells",
            m.lambda,
            m.mean_delta_pp.unwrap(),
            m.cells_used
        );
    }
    println!("winner: lambda = {}", sel.winner_lambda);
    println!("complete-cells ranking: {:?}", sel.excluded_ranking);
    for w in &sel.warnings {
        println!("warning: {w}");
    }
}
