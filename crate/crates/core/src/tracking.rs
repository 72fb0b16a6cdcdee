//! Per-frame hand tracking: detection intake, exponentially weighted box
//! stabilization, ROI cropping and landmark localization.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, CropTransform};
use crate::heatmap::{decode_peaks, map_keypoints, Frame, HeatmapStack, KeypointSet};
use crate::model::{Model, INPUT_SIZE};
use crate::tensor::Tensor;

/// Number of previous frames blended into the stabilized box.
pub const PREVIOUS_FRAMES: usize = 6;
/// Ring capacity: the current frame plus `PREVIOUS_FRAMES`.
pub const HISTORY_CAPACITY: usize = PREVIOUS_FRAMES + 1;
pub const DEFAULT_MARGIN: f64 = 1.5;
/// Frames a lost detection is bridged with the last stabilized box.
pub const MAX_MISSED_FRAMES: usize = 10;

/// Most recent detections, newest first.
#[derive(Debug, Clone)]
pub struct BoxHistory {
    boxes: VecDeque<BoundingBox>,
    capacity: usize,
}

impl Default for BoxHistory {
    fn default() -> Self {
        Self::new()
    }
}

impl BoxHistory {
    pub fn new() -> Self {
        Self::with_capacity(HISTORY_CAPACITY)
    }

    pub fn with_capacity(capacity: usize) -> Self {
        assert!(capacity > 0, "history capacity must be positive");
        Self {
            boxes: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn newest(&self) -> Option<&BoundingBox> {
        self.boxes.front()
    }

    /// Index 0 is the current frame.
    pub fn iter(&self) -> impl Iterator<Item = &BoundingBox> {
        self.boxes.iter()
    }

    pub fn clear(&mut self) {
        self.boxes.clear();
    }
}

/// Makes `bbox` the current frame (k = 0), evicting the oldest when full.
pub fn push_detection(history: &mut BoxHistory, bbox: BoundingBox) -> Result<()> {
    bbox.validate()?;
    if history.boxes.len() == history.capacity {
        history.boxes.pop_back();
    }
    history.boxes.push_front(bbox);
    Ok(())
}

/// `e^{-k} / sum_j e^{-j}` for `k, j < len`.
pub fn stabilization_weights(len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|k| (-(k as f64)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Exponentially weighted average of the stored boxes, per coordinate.
/// Shorter histories renormalize over what is available.
pub fn stabilize(history: &BoxHistory) -> Result<BoundingBox> {
    if history.is_empty() {
        return Err(Error::contract("cannot stabilize an empty box history"));
    }
    let weights = stabilization_weights(history.len());
    // Evaluated as P_0 + sum_k w_k (P_k - P_0), equal to sum_k w_k P_k since
    // the weights sum to one, but exact when every entry is the same box.
    let current = history.newest().expect("history is non-empty").coords();
    let mut acc = current;
    for (b, w) in history.iter().zip(&weights).skip(1) {
        for ((a, v), c) in acc.iter_mut().zip(b.coords()).zip(current) {
            *a += w * (v - c);
        }
    }
    BoundingBox::from_coords(acc)
}

/// Bilinear sample of every channel at index-convention coordinates, clamped
/// to the border.
fn sample_into(image: &Tensor, x: f64, y: f64, out: &mut [f32]) {
    let (h, w, _) = image.shape();
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = (x - x0 as f64) as f32;
    let fy = (y - y0 as f64) as f32;
    let (a, b, p, q) = (image.pixel(y0, x0), image.pixel(y0, x1), image.pixel(y1, x0), image.pixel(y1, x1));
    for (c, o) in out.iter_mut().enumerate() {
        let top = a[c] + (b[c] - a[c]) * fx;
        let bottom = p[c] + (q[c] - p[c]) * fx;
        *o = top + (bottom - top) * fy;
    }
}

/// Crops a square about `bbox` (side `max(w, h) * margin`) and resamples it to
/// 256x256; regions past the border repeat the edge pixels. The returned
/// transform maps crop pixels back to image pixels.
pub fn crop_and_resize(image: &Tensor, bbox: &BoundingBox, margin: f64) -> Result<(Tensor, CropTransform)> {
    crop_to_size(image, bbox, margin, INPUT_SIZE)
}

pub(crate) fn crop_to_size(
    image: &Tensor,
    bbox: &BoundingBox,
    margin: f64,
    size: usize,
) -> Result<(Tensor, CropTransform)> {
    bbox.validate()?;
    if bbox.overlap_area(image.width(), image.height()) <= 0.0 {
        return Err(Error::HandLost(format!(
            "box ({:.1}, {:.1}, {:.1}, {:.1}) does not intersect the {}x{} frame",
            bbox.x1,
            bbox.y1,
            bbox.x2,
            bbox.y2,
            image.width(),
            image.height()
        )));
    }
    let region = bbox.squared(margin)?;
    let transform = CropTransform::for_region(&region, size)?;
    let crop = resample(image, &transform, size)?;
    Ok((crop, transform))
}

/// Resamples `image` onto a `size x size` grid through `transform`.
pub(crate) fn resample(image: &Tensor, transform: &CropTransform, size: usize) -> Result<Tensor> {
    let c = image.channels();
    let mut data = vec![0.0f32; size * size * c];
    for v in 0..size {
        for u in 0..size {
            let (x, y) = transform.to_image(u as f64, v as f64);
            let start = (v * size + u) * c;
            sample_into(image, x, y, &mut data[start..start + c]);
        }
    }
    Tensor::from_vec(size, size, c, data)
}

/// Everything computed for one located hand.
#[derive(Debug, Clone)]
pub struct HandObservation {
    /// Box actually cropped (stabilized unless stabilization is off).
    pub bbox: BoundingBox,
    pub transform: CropTransform,
    pub heatmaps: HeatmapStack,
    pub keypoints: KeypointSet,
}

/// Crop, forward and decode for one image and box.
pub fn locate(model: &Model, image: &Tensor, bbox: &BoundingBox, margin: f64, subpixel: bool) -> Result<HandObservation> {
    if image.channels() != 3 {
        return Err(Error::contract(format!("frames must have 3 channels, got {}", image.channels())));
    }
    let (crop, transform) = crop_and_resize(image, bbox, margin)?;
    let heatmaps = HeatmapStack::new(model.forward(&crop)?)?;
    let decoded = decode_peaks(&heatmaps, subpixel)?;
    let keypoints = map_keypoints(
        &decoded,
        &transform,
        Frame::Image {
            width: image.width(),
            height: image.height(),
        },
    )?;
    Ok(HandObservation {
        bbox: *bbox,
        transform,
        heatmaps,
        keypoints,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub margin: f64,
    pub stabilize: bool,
    pub subpixel: bool,
    pub max_missed: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            margin: DEFAULT_MARGIN,
            stabilize: true,
            subpixel: true,
            max_missed: MAX_MISSED_FRAMES,
        }
    }
}

#[derive(Debug, Clone)]
pub enum FrameOutcome {
    Hand(HandObservation),
    NoHand,
}

impl FrameOutcome {
    pub fn hand(&self) -> Option<&HandObservation> {
        match self {
            FrameOutcome::Hand(h) => Some(h),
            FrameOutcome::NoHand => None,
        }
    }
}

/// Stateful tracker for one hand stream. The model is shared read-only.
pub struct Pipeline {
    model: Arc<Model>,
    history: BoxHistory,
    config: PipelineConfig,
    missed: usize,
}

impl Pipeline {
    pub fn new(model: Arc<Model>, config: PipelineConfig) -> Self {
        Self {
            model,
            history: BoxHistory::new(),
            config,
            missed: 0,
        }
    }

    pub fn history(&self) -> &BoxHistory {
        &self.history
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Updates the box history and returns the box to crop, or `None` when no
    /// hand is being tracked.
    pub fn track(&mut self, detection: Option<BoundingBox>) -> Result<Option<BoundingBox>> {
        match detection {
            Some(d) => {
                push_detection(&mut self.history, d)?;
                self.missed = 0;
            }
            None => {
                if self.history.is_empty() {
                    return Ok(None);
                }
                self.missed += 1;
                if self.missed > self.config.max_missed {
                    self.history.clear();
                    self.missed = 0;
                    return Ok(None);
                }
            }
        }
        let b = if self.config.stabilize {
            stabilize(&self.history)?
        } else {
            *self.history.newest().expect("history is non-empty")
        };
        Ok(Some(b))
    }

    pub fn process_frame(&mut self, image: &Tensor, detection: Option<BoundingBox>) -> Result<FrameOutcome> {
        let Some(bbox) = self.track(detection)? else {
            return Ok(FrameOutcome::NoHand);
        };
        let obs = locate(&self.model, image, &bbox, self.config.margin, self.config.subpixel)?;
        Ok(FrameOutcome::Hand(obs))
    }
}

/// Supplies at most one hand box per frame.
pub trait DetectionSource {
    fn detection(&mut self, frame_index: usize) -> Option<BoundingBox>;
}

impl<F: FnMut(usize) -> Option<BoundingBox>> DetectionSource for F {
    fn detection(&mut self, frame_index: usize) -> Option<BoundingBox> {
        self(frame_index)
    }
}

/// Detections read from `frame_index x1 y1 x2 y2` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionFile {
    boxes: BTreeMap<usize, BoundingBox>,
}

impl DetectionFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut boxes = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |reason: String| Error::Parse {
                path: origin.to_string(),
                line: line_no,
                reason,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(err(format!("expected `frame x1 y1 x2 y2`, got {} fields", fields.len())));
            }
            let frame: usize = fields[0]
                .parse()
                .map_err(|_| err(format!("bad frame index `{}`", fields[0])))?;
            let mut c = [0.0f64; 4];
            for (slot, f) in c.iter_mut().zip(&fields[1..]) {
                *slot = f.parse().map_err(|_| err(format!("bad coordinate `{f}`")))?;
            }
            let b = BoundingBox::from_coords(c).map_err(|e| err(e.to_string()))?;
            if boxes.insert(frame, b).is_some() {
                return Err(err(format!("second detection for frame {frame}")));
            }
        }
        Ok(Self { boxes })
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn get(&self, frame_index: usize) -> Option<BoundingBox> {
        self.boxes.get(&frame_index).copied()
    }
}

impl DetectionSource for DetectionFile {
    fn detection(&mut self, frame_index: usize) -> Option<BoundingBox> {
        self.get(frame_index)
    }
}
