//! Feeds a jittered box stream through the stabilizer and compares the
//! frame-to-frame variance of the raw and smoothed box centers.

use fasthand::geometry::BoundingBox;
use fasthand::tracking::{push_detection, stabilization_weights, stabilize, BoxHistory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

fn main() -> fasthand::Result<()> {
    let w = stabilization_weights(7);
    println!("weights: {}", w.iter().map(|v| format!("{v:.5}")).collect::<Vec<_>>().join(" "));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut history = BoxHistory::new();
    let (mut raw, mut smooth) = (Vec::new(), Vec::new());
    for _ in 0..100 {
        let (dx, dy) = (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
        let b = BoundingBox::new(200.0 + dx, 150.0 + dy, 300.0 + dx, 250.0 + dy)?;
        push_detection(&mut history, b)?;
        raw.push(b.center().0);
        smooth.push(stabilize(&history)?.center().0);
    }
    println!("center x variance: raw {:.3}  stabilized {:.3}", variance(&raw), variance(&smooth));
    Ok(())
}
