//! Landmark accuracy metrics: SSE, root-relative EPE and PCK@sigma.
//!
//! Errors are normalized by `max(w, h)` of the source image. Ground-truth
//! landmarks flagged invisible are left out of every metric; per-joint
//! denominators shrink accordingly. Sums run in sample-index order, so results
//! are reproducible bit for bit.

use std::fmt::Write as _;

use crate::annotations::AnnotationRecord;
use crate::error::{Error, Result};
use crate::heatmap::{KeypointSet, ROOT};
use crate::model::NUM_LANDMARKS;

/// Default thresholds reported by [`evaluate`] callers.
pub const DEFAULT_SIGMAS: [f64; 3] = [0.1, 0.2, 0.3];

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    pub ground_truth: KeypointSet,
    pub prediction: KeypointSet,
    pub width: usize,
    pub height: usize,
}

impl EvalSample {
    pub fn new(ground_truth: KeypointSet, prediction: KeypointSet, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::contract(format!("image size must be positive, got {width}x{height}")));
        }
        Ok(Self {
            ground_truth,
            prediction,
            width,
            height,
        })
    }

    fn norm(&self) -> f64 {
        self.width.max(self.height) as f64
    }

    fn visible(&self, i: usize) -> bool {
        self.ground_truth.points[i].visible
    }

    /// Normalized displacement `(gt - pred) / max(w, h)` of landmark `i`.
    fn delta(&self, i: usize) -> (f64, f64) {
        let g = &self.ground_truth.points[i];
        let p = &self.prediction.points[i];
        let n = self.norm();
        ((g.x - p.x) / n, (g.y - p.y) / n)
    }
}

fn non_empty(samples: &[EvalSample]) -> Result<()> {
    if samples.is_empty() {
        Err(Error::contract("metrics need at least one sample"))
    } else {
        Ok(())
    }
}

/// Mean over samples of the summed squared normalized landmark errors.
pub fn sse(samples: &[EvalSample]) -> Result<f64> {
    non_empty(samples)?;
    let total: f64 = samples
        .iter()
        .map(|s| {
            (0..NUM_LANDMARKS)
                .filter(|&i| s.visible(i))
                .map(|i| {
                    let (dx, dy) = s.delta(i);
                    dx * dx + dy * dy
                })
                .sum::<f64>()
        })
        .sum();
    Ok(total / samples.len() as f64)
}

/// Mean normalized root-relative end-point error over all landmarks. The root
/// itself contributes a zero term, so with full visibility the denominator is
/// `21 * D`. Samples whose root is invisible are skipped.
pub fn epe(samples: &[EvalSample]) -> Result<f64> {
    non_empty(samples)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for s in samples {
        if !s.visible(ROOT) {
            continue;
        }
        let (rx, ry) = s.delta(ROOT);
        for i in (0..NUM_LANDMARKS).filter(|&i| s.visible(i)) {
            let (dx, dy) = s.delta(i);
            total += (dx - rx).hypot(dy - ry);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::contract("no sample has a visible root landmark"));
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PckResult {
    pub sigma: f64,
    /// Mean of the defined per-joint values.
    pub overall: f64,
    /// `None` for a joint never visible in the ground truth.
    pub per_joint: [Option<f64>; NUM_LANDMARKS],
}

/// Fraction of samples whose normalized error is `<= sigma`, per joint and
/// averaged over joints.
pub fn pck(samples: &[EvalSample], sigma: f64) -> Result<PckResult> {
    non_empty(samples)?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::contract(format!("sigma must be positive, got {sigma}")));
    }
    let mut hits = [0usize; NUM_LANDMARKS];
    let mut seen = [0usize; NUM_LANDMARKS];
    for s in samples {
        for i in (0..NUM_LANDMARKS).filter(|&i| s.visible(i)) {
            let (dx, dy) = s.delta(i);
            seen[i] += 1;
            if dx.hypot(dy) <= sigma {
                hits[i] += 1;
            }
        }
    }
    let per_joint: [Option<f64>; NUM_LANDMARKS] =
        std::array::from_fn(|i| (seen[i] > 0).then(|| hits[i] as f64 / seen[i] as f64));
    let defined: Vec<f64> = per_joint.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::contract("no visible ground-truth landmarks"));
    }
    let overall = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(PckResult {
        sigma,
        overall,
        per_joint,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub samples: usize,
    pub sse: f64,
    pub epe: f64,
    /// One entry per requested sigma, sorted ascending.
    pub pck: Vec<PckResult>,
}

pub fn evaluate(samples: &[EvalSample], sigmas: &[f64]) -> Result<EvalReport> {
    let mut sigmas = sigmas.to_vec();
    if sigmas.is_empty() {
        return Err(Error::contract("at least one PCK threshold is required"));
    }
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    Ok(EvalReport {
        samples: samples.len(),
        sse: sse(samples)?,
        epe: epe(samples)?,
        pck: sigmas.iter().map(|&s| pck(samples, s)).collect::<Result<_>>()?,
    })
}

/// Pairs prediction and ground-truth records by position.
pub fn samples_from_records(predictions: &[AnnotationRecord], ground_truth: &[AnnotationRecord]) -> Result<Vec<EvalSample>> {
    if predictions.len() != ground_truth.len() {
        return Err(Error::Sample {
            index: predictions.len().min(ground_truth.len()),
            reason: format!(
                "{} predictions but {} ground-truth records",
                predictions.len(),
                ground_truth.len()
            ),
        });
    }
    predictions
        .iter()
        .zip(ground_truth)
        .enumerate()
        .map(|(index, (p, g))| {
            if (p.width, p.height) != (g.width, g.height) {
                return Err(Error::Sample {
                    index,
                    reason: format!(
                        "prediction image is {}x{}, ground truth {}x{}",
                        p.width, p.height, g.width, g.height
                    ),
                });
            }
            EvalSample::new(g.keypoints(), p.keypoints(), g.width, g.height)
                .map_err(|e| Error::Sample { index, reason: e.to_string() })
        })
        .collect()
}

impl EvalReport {
    pub fn pck_at(&self, sigma: f64) -> Option<&PckResult> {
        self.pck.iter().find(|p| (p.sigma - sigma).abs() < 1e-12)
    }

    /// `key: value` document with every figure at full precision.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "samples: {}", self.samples);
        let _ = writeln!(out, "sse: {}", self.sse);
        let _ = writeln!(out, "epe: {}", self.epe);
        for p in &self.pck {
            let _ = writeln!(out, "pck@{}: {}", p.sigma, p.overall);
        }
        for p in &self.pck {
            for (i, v) in p.per_joint.iter().enumerate() {
                match v {
                    Some(v) => {
                        let _ = writeln!(out, "pck@{}.joint{i:02}: {v}", p.sigma);
                    }
                    None => {
                        let _ = writeln!(out, "pck@{}.joint{i:02}: n/a", p.sigma);
                    }
                }
            }
        }
        out
    }

    /// Tab-separated `metric\tvalue` rows.
    pub fn to_table(&self) -> String {
        let mut out = String::from("metric\tvalue\n");
        let _ = writeln!(out, "samples\t{}", self.samples);
        let _ = writeln!(out, "sse\t{}", self.sse);
        let _ = writeln!(out, "epe\t{}", self.epe);
        for p in &self.pck {
            let _ = writeln!(out, "pck@{}\t{}", p.sigma, p.overall);
        }
        out
    }

    /// One line in the column order SSE, EPE, PCK@sigma...
    pub fn summary(&self) -> String {
        let mut line = format!("SSE {:.4}  EPE {:.4}", self.sse, self.epe);
        for p in &self.pck {
            let _ = write!(line, "  PCK@{} {:.4}", p.sigma, p.overall);
        }
        line
    }
}
