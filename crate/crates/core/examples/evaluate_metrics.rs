//! Scores a perturbed copy of a synthetic ground-truth set.

use fasthand::heatmap::{Frame, KeypointSet};
use fasthand::metrics::{evaluate, EvalSample, DEFAULT_SIGMAS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> fasthand::Result<()> {
    let (w, h) = (320, 240);
    let frame = Frame::Image { width: w, height: h };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut samples = Vec::new();
    for _ in 0..20 {
        let gt: Vec<(f64, f64)> = (0..21).map(|_| (rng.random_range(40.0..280.0), rng.random_range(40.0..200.0))).collect();
        let pred: Vec<(f64, f64)> = gt.iter().map(|&(x, y)| (x + rng.random_range(-40.0..40.0), y + rng.random_range(-40.0..40.0))).collect();
        samples.push(EvalSample::new(KeypointSet::from_coords(&gt, frame)?, KeypointSet::from_coords(&pred, frame)?, w, h)?);
    }
    let report = evaluate(&samples, &DEFAULT_SIGMAS)?;
    println!("{}", report.summary());
    print!("{}", report.to_table());
    Ok(())
}
