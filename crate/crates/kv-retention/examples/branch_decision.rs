//! The pre-committed branch rule over a four-cell family.
//!
//! Ingests a (model, budget) cell table, marks the Bonferroni family
//! verdicts, and applies the branch rule under both the registered guard
//! (guard model only) and the stricter symmetric guard (both models).
//!
//! Run: `cargo run --example branch_decision`

use kv_retention::stats::{bonferroni_evaluate, branch_decide, BranchConfig, CellResult};

fn cell(model: &str, budget: u64, delta_pp: f64, ci: [f64; 2], p: f64) -> CellResult {
    CellResult {
        model: model.into(),
        budget,
        delta_pp,
        ci95: ci,
        p,
        bonferroni_pass: false,
        n_problems: Some(299),
    }
}

fn main() {
    let mut cells = vec![
        cell("qwen7b", 64, 1.56, [-0.89, 4.01], 0.20),
        cell("qwen7b", 128, 4.79, [1.67, 7.92], 0.0022),
        cell("llama8b", 64, 2.23, [0.56, 3.90], 0.0054),
        cell("llama8b", 128, -0.22, [-2.45, 2.01], 0.86),
    ];

    bonferroni_evaluate(&mut cells, 0.05).unwrap();
    for c in &cells {
        println!(
            "{:<14} delta {:+.2} pp, p {:<7} {}",
            c.label(),
            c.delta_pp,
            c.p,
            if c.bonferroni_pass { "PASS at 0.0125" } else { "--" }
        );
    }

    let verdict = branch_decide(&cells, &BranchConfig::new("qwen7b", "llama8b")).unwrap();
    println!();
    println!("branch (registered guard): {:?}", verdict.branch);
    println!("qualifying cells: {:?}", verdict.qualifying_cells);
    println!("guard-model mean delta: {:+.2} pp", verdict.guard_mean_delta_pp);
    println!("negative-guard violations: {:?}", verdict.negative_guard_violations);
    println!("branch (symmetric guard): {:?}", verdict.symmetric_guard_branch);
}
