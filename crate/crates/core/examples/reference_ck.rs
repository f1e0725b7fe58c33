//! Regenerates `src/reference_ck.in`:
//!
//!     cargo run --release -p dpfdr --example reference_ck > crates/core/src/reference_ck.in

use dpfdr::fdr::estimate_ck_many;
use dpfdr::StreamSeed;

fn main() {
    let ks: Vec<usize> = (2..=30).collect();
    let est = estimate_ck_many(&ks, 100_000, 100_000, StreamSeed::new(0x0c0ffee)).expect("valid parameters");
    for e in &est {
        eprintln!("k = {:2}  C_k = {:.6}  se = {:.6}", e.k, e.mean, e.std_error);
    }
    let body: Vec<String> = est.iter().map(|e| format!("{:.6}", e.mean)).collect();
    println!("[{}]", body.join(", "));
}
