//! Times the crop + forward + decode path of the default network with random
//! weights. Pass an iteration count as the first argument.

use fasthand::bench;
use fasthand::geometry::BoundingBox;
use fasthand::model::{build_fasthand, ModelConfig, WeightSource};
use fasthand::tensor::Tensor;

fn main() -> fasthand::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let model = build_fasthand(&ModelConfig::default(), WeightSource::Seed(0))?;
    let frame = Tensor::from_fn(480, 640, 3, |y, x, c| ((x ^ y) + c) as f32 % 256.0 / 255.0)?;
    let bbox = BoundingBox::new(220.0, 140.0, 420.0, 340.0)?;
    let report = bench::run(&model, &frame, &bbox, 1.5, iterations, 3)?;
    print!("{}", report.to_text());
    Ok(())
}
