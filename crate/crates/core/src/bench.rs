//! Latency harness for the crop + forward + decode path.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::model::Model;
use crate::tensor::Tensor;
use crate::tracking::locate;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub iterations: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    /// `1000 / mean_ms`.
    pub fps: f64,
}

impl BenchReport {
    /// Summarizes per-frame latencies in milliseconds. p95 is the
    /// nearest-rank percentile.
    pub fn from_latencies(latencies_ms: &[f64]) -> Result<Self> {
        if latencies_ms.is_empty() || latencies_ms.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::contract("latencies must be a non-empty list of finite non-negative values"));
        }
        let n = latencies_ms.len();
        let mut sorted = latencies_ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean_ms = sorted.iter().sum::<f64>() / n as f64;
        let median_ms = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Ok(Self {
            iterations: n,
            mean_ms,
            median_ms,
            p95_ms: sorted[rank - 1],
            fps: 1000.0 / mean_ms,
        })
    }

    pub fn to_text(&self) -> String {
        format!(
            "iterations: {}\nmean_ms: {:.3}\nmedian_ms: {:.3}\np95_ms: {:.3}\nfps: {:.2}\n",
            self.iterations, self.mean_ms, self.median_ms, self.p95_ms, self.fps
        )
    }
}

/// Times `iterations` runs after `warmup` untimed ones. The frame is already
/// decoded, so image I/O is excluded.
pub fn run(model: &Model, frame: &Tensor, bbox: &BoundingBox, margin: f64, iterations: usize, warmup: usize) -> Result<BenchReport> {
    if iterations == 0 {
        return Err(Error::contract("iterations must be positive"));
    }
    for _ in 0..warmup {
        locate(model, frame, bbox, margin, true)?;
    }
    let mut latencies = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let start = Instant::now();
        locate(model, frame, bbox, margin, true)?;
        latencies.push(start.elapsed().as_secs_f64() * 1e3);
    }
    BenchReport::from_latencies(&latencies)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistics() {
        let lat: Vec<f64> = (1..=100).map(f64::from).collect();
        let r = BenchReport::from_latencies(&lat).unwrap();
        assert_eq!(r.mean_ms, 50.5);
        assert_eq!(r.median_ms, 50.5);
        assert_eq!(r.p95_ms, 95.0);
        assert!((r.fps - 1000.0 / 50.5).abs() < 1e-12);
        assert_eq!(BenchReport::from_latencies(&[4.0, 1.0, 2.0]).unwrap().median_ms, 2.0);
        assert!(BenchReport::from_latencies(&[]).is_err());
    }
}
