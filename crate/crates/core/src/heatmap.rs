//! Keypoint sets, heatmap rendering/decoding and frame mapping.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::CropTransform;
use crate::model::{HEATMAP_SIZE, INPUT_SIZE, NUM_LANDMARKS};
use crate::tensor::Tensor;
use crate::weights::{NamedTensor, WeightStore};

pub const DEFAULT_SIGMA: f64 = 2.0;

/// Landmark index of the wrist, the root for root-relative errors.
pub const ROOT: usize = 0;

/// Wrist-to-fingertip chains: thumb 1-4, index 5-8, middle 9-12, ring 13-16,
/// little 17-20.
pub const SKELETON: [(usize, usize); 20] = [
    (0, 1), (1, 2), (2, 3), (3, 4),
    (0, 5), (5, 6), (6, 7), (7, 8),
    (0, 9), (9, 10), (10, 11), (11, 12),
    (0, 13), (13, 14), (14, 15), (15, 16),
    (0, 17), (17, 18), (18, 19), (19, 20),
];

/// Coordinate frame a keypoint set is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// 64x64 heatmap grid.
    Heatmap,
    /// 256x256 network input crop.
    Roi,
    Image { width: usize, height: usize },
}

impl Frame {
    pub fn size(&self) -> (usize, usize) {
        match *self {
            Frame::Heatmap => (HEATMAP_SIZE, HEATMAP_SIZE),
            Frame::Roi => (INPUT_SIZE, INPUT_SIZE),
            Frame::Image { width, height } => (width, height),
        }
    }

    /// Inside the hull of pixel centers, `[0, w-1] x [0, h-1]`.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (w, h) = self.size();
        x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
    /// False for unannotated or out-of-frame landmarks.
    pub visible: bool,
}

impl Keypoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            confidence: 1.0,
            visible: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    pub points: [Keypoint; NUM_LANDMARKS],
    pub frame: Frame,
}

impl KeypointSet {
    /// Builds a set from 21 coordinates; points outside the frame are flagged
    /// invisible.
    pub fn from_coords(coords: &[(f64, f64)], frame: Frame) -> Result<Self> {
        if coords.len() != NUM_LANDMARKS {
            return Err(Error::contract(format!(
                "keypoint set needs {NUM_LANDMARKS} landmarks, got {}",
                coords.len()
            )));
        }
        let points = std::array::from_fn(|i| {
            let (x, y) = coords[i];
            Keypoint {
                visible: frame.contains(x, y),
                ..Keypoint::new(x, y)
            }
        });
        Ok(Self { points, frame })
    }

    pub fn coords(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.x, p.y)).collect()
    }
}

/// A 64x64x21 stack, one channel per landmark.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStack(Tensor);

impl HeatmapStack {
    pub fn new(tensor: Tensor) -> Result<Self> {
        if tensor.shape() != (HEATMAP_SIZE, HEATMAP_SIZE, NUM_LANDMARKS) {
            return Err(Error::contract(format!(
                "heatmap stack must be {HEATMAP_SIZE}x{HEATMAP_SIZE}x{NUM_LANDMARKS}, got {:?}",
                tensor.shape()
            )));
        }
        Ok(Self(tensor))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    /// Writes the stack as a single tensor named `heatmaps` in the weight
    /// file container.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let (h, w, c) = self.0.shape();
        let mut store = WeightStore::new();
        store.insert(HEATMAP_TENSOR, NamedTensor::new(vec![h, w, c], self.0.data().to_vec())?)?;
        store.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let store = WeightStore::load(path)?;
        let t = store.get(HEATMAP_TENSOR).ok_or_else(|| Error::Format {
            tensor: HEATMAP_TENSOR.into(),
            reason: "missing".into(),
        })?;
        let [h, w, c] = t.dims[..] else {
            return Err(Error::Format {
                tensor: HEATMAP_TENSOR.into(),
                reason: format!("expected rank 3, got {}", t.dims.len()),
            });
        };
        Self::new(Tensor::from_vec(h, w, c, t.data.clone())?)
    }
}

const HEATMAP_TENSOR: &str = "heatmaps";

/// Extracts the peak of every channel.
///
/// Ties go to the smallest row, then column. With `subpixel` the peak moves a
/// quarter cell toward the larger of its two neighbours on each axis; a
/// missing neighbour at the border counts as smaller. Confidence is the peak
/// clamped to `[0, 1]`, or 0 for a constant channel.
pub fn decode_peaks(h: &HeatmapStack, subpixel: bool) -> Result<KeypointSet> {
    let t = h.tensor();
    if !t.is_finite() {
        return Err(Error::contract("heatmaps contain non-finite values"));
    }
    let (rows, cols, channels) = t.shape();
    let mut points = [Keypoint::new(0.0, 0.0); NUM_LANDMARKS];
    for (c, point) in points.iter_mut().enumerate().take(channels) {
        let mut best = (0usize, 0usize);
        let mut max = f32::NEG_INFINITY;
        let mut min = f32::INFINITY;
        for r in 0..rows {
            for q in 0..cols {
                let v = t.at(r, q, c);
                if v > max {
                    max = v;
                    best = (r, q);
                }
                min = min.min(v);
            }
        }
        let (r, q) = best;
        let mut x = q as f64;
        let mut y = r as f64;
        if subpixel && max > min {
            let at = |rr: isize, qq: isize| -> f32 {
                if rr < 0 || qq < 0 || rr >= rows as isize || qq >= cols as isize {
                    f32::NEG_INFINITY
                } else {
                    t.at(rr as usize, qq as usize, c)
                }
            };
            let (ri, qi) = (r as isize, q as isize);
            x += 0.25 * quarter_step(at(ri, qi - 1), at(ri, qi + 1));
            y += 0.25 * quarter_step(at(ri - 1, qi), at(ri + 1, qi));
        }
        let confidence = if max > min { (max as f64).clamp(0.0, 1.0) } else { 0.0 };
        *point = Keypoint {
            x,
            y,
            confidence,
            visible: true,
        };
    }
    Ok(KeypointSet {
        points,
        frame: Frame::Heatmap,
    })
}

fn quarter_step(before: f32, after: f32) -> f64 {
    if after > before {
        1.0
    } else if before > after {
        -1.0
    } else {
        0.0
    }
}

/// Renders one unit-peak Gaussian per landmark; invisible or out-of-frame
/// landmarks give an all-zero channel.
pub fn render_gaussian(k: &KeypointSet, sigma: f64) -> Result<HeatmapStack> {
    if k.frame != Frame::Heatmap {
        return Err(Error::contract("render_gaussian expects heatmap-frame keypoints"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::contract(format!("sigma must be positive, got {sigma}")));
    }
    let denom = 2.0 * sigma * sigma;
    let mut t = Tensor::zeros(HEATMAP_SIZE, HEATMAP_SIZE, NUM_LANDMARKS)?;
    for (c, p) in k.points.iter().enumerate() {
        if !p.visible || !k.frame.contains(p.x, p.y) {
            continue;
        }
        let gx: Vec<f64> = (0..HEATMAP_SIZE).map(|q| (q as f64 - p.x).powi(2)).collect();
        for r in 0..HEATMAP_SIZE {
            let dy2 = (r as f64 - p.y).powi(2);
            for (q, dx2) in gx.iter().enumerate() {
                t.set(r, q, c, (-(dx2 + dy2) / denom).exp() as f32);
            }
        }
    }
    HeatmapStack::new(t)
}

fn frame_scale(frame: Frame) -> Option<f64> {
    match frame {
        Frame::Heatmap => Some((INPUT_SIZE / HEATMAP_SIZE) as f64),
        Frame::Roi => Some(1.0),
        Frame::Image { .. } => None,
    }
}

/// Re-expresses a keypoint set in `target`.
///
/// Heatmap and ROI differ by a factor of 4; ROI and image are related by
/// `transform`. Confidence is carried over, visibility is re-checked against
/// the target frame bounds.
pub fn map_keypoints(k: &KeypointSet, transform: &CropTransform, target: Frame) -> Result<KeypointSet> {
    transform.validate()?;
    if let Frame::Image { width, height } = target {
        if width == 0 || height == 0 {
            return Err(Error::contract("image frame must have positive size"));
        }
    }
    let mut out = k.clone();
    out.frame = target;
    for p in out.points.iter_mut() {
        // source -> roi
        let (rx, ry) = match frame_scale(k.frame) {
            Some(s) => (p.x * s, p.y * s),
            None => transform.to_roi(p.x, p.y),
        };
        // roi -> target
        let (x, y) = match frame_scale(target) {
            Some(s) => (rx / s, ry / s),
            None => transform.to_image(rx, ry),
        };
        p.x = x;
        p.y = y;
        p.visible = p.visible && target.contains(x, y);
    }
    Ok(out)
}
