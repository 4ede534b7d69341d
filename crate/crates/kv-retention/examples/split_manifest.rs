//! Deterministic dev/confirm splitting of a problem-ID list.
//!
//! Run: `cargo run --example split_manifest`

use kv_retention::split::{bucket, build_manifest};

fn main() {
    let ids: Vec<String> = (0..500).map(|i| format!("test/topic/{i}.json")).collect();
    let manifest = build_manifest(&ids).unwrap();

    println!("convention: {}", manifest.convention);
    println!("input hash: {}", manifest.input_hash);
    println!(
        "dev: {} ids (buckets 0-1), confirm: {} ids (buckets 2-4)",
        manifest.dev_ids.len(),
        manifest.confirm_ids.len()
    );
    for id in ids.iter().take(5) {
        println!("  {id} -> bucket {}", bucket(id).unwrap());
    }
}
