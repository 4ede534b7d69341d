//! Set-conditioned retention vs plain top-k.
//!
//! Builds a tiny cache where two tokens carry near-identical value
//! signatures, then shows how the greedy selector trades the redundant
//! runner-up for a fresh direction as lambda grows.
//!
//! Run: `cargo run --example diverse_selection`

use kv_retention::{aggregate_signatures, select, top_k, ScoreVector, SelectionConfig, ValueTensorBlock};

fn main() {
    // 5 tokens, 2 layers, 2 heads, head dim 3. Tokens 0 and 1 carry the
    // same value content; token 4 points somewhere new.
    let directions: [[f64; 3]; 5] = [
        [1.0, 0.0, 0.0],  // token 0
        [1.0, 0.02, 0.0], // token 1: near-duplicate of token 0
        [0.0, 1.0, 0.0],  // token 2
        [0.1, 0.9, 0.0],  // token 3: close to token 2
        [0.0, 0.0, 1.0],  // token 4: unique direction
    ];
    let mut values = Vec::new();
    for dir in &directions {
        for _layer_head in 0..4 {
            values.extend_from_slice(dir);
        }
    }
    let block = ValueTensorBlock::new(5, 2, 2, 3, values).unwrap();
    let sig = aggregate_signatures(&block, 1e-12).unwrap();

    let scores = ScoreVector::new(vec![0.95, 0.90, 0.85, 0.80, 0.75]).unwrap();
    println!("base scores: {:?}", scores.scores);
    println!("top-k (k=3): {:?}", top_k(&scores, 3).unwrap().indices);

    for lambda in [0.0, 0.25, 0.5, 1.0] {
        let cfg = SelectionConfig::new(3, lambda).unwrap();
        let kept = select(&scores, &sig, &cfg).unwrap();
        println!("lambda={lambda:<4} -> retained {:?}", kept.indices);
    }
}
