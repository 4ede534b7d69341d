//! Why end-of-prefill memory matching is not enough.
//!
//! Simulates two cadence policies that look identical at the end of
//! prefill and diverge during decode: never recompressing drifts to a
//! decode mean near 3b and a peak near 5b, while per-step recompression
//! stays pinned at b+1. The matched-mean check flags the pair.
//!
//! Run: `cargo run --example cadence_tradeoff`

use kv_retention::cache::{
    instrument, matched_mean_check, simulate_trajectory, Cadence, CadencePolicy,
};

fn main() {
    let budget = 64;
    let decode_steps = 4 * budget;

    let never = CadencePolicy::new(Cadence::Never, budget).unwrap();
    let every = CadencePolicy::new(Cadence::EveryCSteps { c: 1 }, budget).unwrap();

    let drift = instrument(&simulate_trajectory(1000, decode_steps, &never).unwrap());
    let pinned = instrument(&simulate_trajectory(1000, decode_steps, &every).unwrap());

    println!("budget b = {budget}, decode steps = {decode_steps}");
    println!(
        "never recompressed: end-of-prefill {}, decode mean {:.1}, peak {}",
        drift.end_of_prefill_cache, drift.mean_decode_cache, drift.peak_cache
    );
    println!(
        "every-step:         end-of-prefill {}, decode mean {:.1}, peak {}",
        pinned.end_of_prefill_cache, pinned.mean_decode_cache, pinned.peak_cache
    );

    let verdict = matched_mean_check(&drift, &pinned, 0.02).unwrap();
    println!();
    println!("matched on decode mean (2% tolerance)? {}", verdict.matched);
    if verdict.end_of_prefill_false_positive {
        println!(
            "both report {} at end of prefill -- an end-of-prefill audit would call this pair matched",
            verdict.end_of_prefill_a
        );
    }
}
