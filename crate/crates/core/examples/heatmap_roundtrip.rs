//! Renders Gaussian targets for random keypoints, decodes them back and
//! reports the worst error with and without the subpixel step.

use fasthand::heatmap::{decode_peaks, render_gaussian, Frame, KeypointSet, DEFAULT_SIGMA};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> fasthand::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_int, mut worst_sub) = (0.0f64, 0.0f64);
    let trials = 50;
    for _ in 0..trials {
        let coords: Vec<(f64, f64)> = (0..21).map(|_| (rng.random_range(0.0..63.0), rng.random_range(0.0..63.0))).collect();
        let k = KeypointSet::from_coords(&coords, Frame::Heatmap)?;
        let h = render_gaussian(&k, DEFAULT_SIGMA)?;
        for (subpixel, worst) in [(false, &mut worst_int), (true, &mut worst_sub)] {
            let d = decode_peaks(&h, subpixel)?;
            for (p, q) in k.points.iter().zip(&d.points) {
                *worst = worst.max((p.x - q.x).abs().max((p.y - q.y).abs()));
            }
        }
    }
    println!("{} keypoints, sigma {DEFAULT_SIGMA}", trials * 21);
    println!("worst per-axis error, integer peak: {worst_int:.3} cells");
    println!("worst per-axis error, subpixel:     {worst_sub:.3} cells");
    Ok(())
}
