//! Builds the default network and two alternate schedules with random
//! weights, runs one forward pass each and prints the tap shapes.

use std::time::Instant;

use fasthand::model::{build_fasthand, ModelConfig, WeightSource};
use fasthand::tensor::Tensor;

fn main() -> fasthand::Result<()> {
    let input = Tensor::from_fn(256, 256, 3, |y, x, c| ((x + 2 * y + 3 * c) % 17) as f32 / 17.0)?;
    for (name, config) in [("default", ModelConfig::default()), ("tiny", ModelConfig::tiny()), ("deep", ModelConfig::deep())] {
        let model = build_fasthand(&config, WeightSource::Seed(42))?;
        let start = Instant::now();
        let taps = model.forward_with_taps(&input)?;
        println!(
            "{name:8} params {:>9}  weights {:>6.2} MB  low {:?}  middle {:?}  encoder {:?}  heatmaps {:?}  {:.0} ms",
            model.param_count(),
            model.params().serialized_len() as f64 / 1e6,
            taps.low.shape(),
            taps.middle.shape(),
            taps.encoder.shape(),
            taps.heatmaps.shape(),
            start.elapsed().as_secs_f64() * 1e3
        );
    }
    Ok(())
}
