//! Paired per-problem analysis with the cluster bootstrap.
//!
//! Synthesizes outcome records for two methods over a problem set, three
//! seeds per cell, then walks the full confirmation pipeline: per-problem
//! paired deltas, cluster bootstrap CI and two-sided p, Bonferroni over
//! the cell family, and the forest-plot CSV.
//!
//! Run: `cargo run --example confirmation_analysis`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kv_retention::io::forest_csv;
use kv_retention::stats::{
    bonferroni_evaluate, cluster_bootstrap, paired_deltas, CellResult, ProblemOutcome,
};

fn record(problem: usize, model: &str, budget: u64, method: &str, seed: i64, correct: bool) -> ProblemOutcome {
    ProblemOutcome {
        problem_id: format!("p{problem:03}"),
        model: model.into(),
        budget,
        method: method.into(),
        lambda: if method == "treat" { Some(0.5) } else { None },
        seed,
        correct,
        extracted: true,
        mean_cache: budget as f64 + 1.0,
        peak_cache: budget + 1,
        extra: Default::default(),
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cells = Vec::new();

    for (model, budget, lift) in [
        ("qwen7b", 64u64, 0.01),
        ("qwen7b", 128, 0.05),
        ("llama8b", 64, 0.03),
        ("llama8b", 128, 0.0),
    ] {
        // 299 problems, 3 seeds, baseline accuracy 15%, planted per-cell lift
        let mut treat = Vec::new();
        let mut base = Vec::new();
        for problem in 0..299 {
            for seed in 0..3 {
                let b = rng.gen_bool(0.15);
                let a = b || rng.gen_bool(lift);
                treat.push(record(problem, model, budget, "treat", seed, a));
                base.push(record(problem, model, budget, "base", seed, b));
            }
        }
        let deltas: Vec<f64> = paired_deltas(&treat, &base)
            .unwrap()
            .into_iter()
            .map(|d| d.delta)
            .collect();
        let boot = cluster_bootstrap(&deltas, 10_000, 7).unwrap();
        cells.push(CellResult {
            model: model.into(),
            budget,
            delta_pp: boot.point_pp,
            ci95: boot.ci95_pp,
            p: boot.p_two_sided,
            bonferroni_pass: false,
            n_problems: Some(deltas.len()),
        });
    }

    bonferroni_evaluate(&mut cells, 0.05).unwrap();
    for cell in &cells {
        println!(
            "{:<14} delta {:+.2} pp, 95% CI [{:+.2}, {:+.2}], p {:.4}{}",
            cell.label(),
            cell.delta_pp,
            cell.ci95[0],
            cell.ci95[1],
            cell.p,
            if cell.bonferroni_pass { "  ** clears 0.05/4" } else { "" }
        );
    }
    println!("\nforest-plot CSV:\n{}", forest_csv(&cells));
}
