//! 2D landmark generation from hand meshes, and scale/crop augmentation.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotations::AnnotationRecord;
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, CropTransform};
use crate::heatmap::Frame;
use crate::model::{INPUT_SIZE, NUM_LANDMARKS};
use crate::tensor::Tensor;
use crate::tracking::resample;

/// Mesh vertices averaged into each joint.
pub const VERTICES_PER_JOINT: usize = 10;

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn validate(&self) -> Result<()> {
        if [self.fx, self.fy, self.cx, self.cy].iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::contract(format!("intrinsics must be positive, got {self:?}")));
        }
        Ok(())
    }

    /// Parses `fx fy cx cy`.
    pub fn parse(text: &str) -> Result<Self> {
        let v: Vec<f64> = text
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::contract(format!("bad intrinsics: {e}")))?;
        let [fx, fy, cx, cy] = v[..] else {
            return Err(Error::contract(format!("intrinsics need 4 values, got {}", v.len())));
        };
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }
}

/// One frame of hand mesh data in camera coordinates (meters, Z forward).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshFrame {
    pub image: String,
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub intrinsics: Option<Intrinsics>,
    pub vertices: Vec<[f64; 3]>,
}

impl MeshFrame {
    /// Reads one JSON object per line.
    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<MeshFrame>> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    line: i + 1,
                    reason: e.to_string(),
                })
            })
            .collect()
    }
}

/// For each of the 21 joints, the mesh vertices surrounding it.
#[derive(Debug, Clone, PartialEq)]
pub struct JointVertexMap {
    joints: Vec<[usize; VERTICES_PER_JOINT]>,
}

impl JointVertexMap {
    pub fn new(joints: Vec<[usize; VERTICES_PER_JOINT]>) -> Result<Self> {
        if joints.len() != NUM_LANDMARKS {
            return Err(Error::contract(format!(
                "vertex map needs {NUM_LANDMARKS} joints, got {}",
                joints.len()
            )));
        }
        Ok(Self { joints })
    }

    /// 21 lines of 10 whitespace-separated vertex indices.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut joints = Vec::with_capacity(NUM_LANDMARKS);
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                reason,
            };
            let idx: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| err(format!("bad vertex index `{t}`"))))
                .collect::<Result<_>>()?;
            let row: [usize; VERTICES_PER_JOINT] = idx
                .try_into()
                .map_err(|v: Vec<usize>| err(format!("expected {VERTICES_PER_JOINT} indices, got {}", v.len())))?;
            joints.push(row);
        }
        Self::new(joints)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn joints(&self) -> &[[usize; VERTICES_PER_JOINT]] {
        &self.joints
    }

    pub fn to_text(&self) -> String {
        self.joints
            .iter()
            .map(|row| row.iter().map(usize::to_string).collect::<Vec<_>>().join(" ") + "\n")
            .collect()
    }
}

/// Each joint is the mean of its mapped vertices.
pub fn joints_from_vertices(mesh: &MeshFrame, map: &JointVertexMap) -> Result<[[f64; 3]; NUM_LANDMARKS]> {
    let mut joints = [[0.0; 3]; NUM_LANDMARKS];
    for (j, (joint, indices)) in joints.iter_mut().zip(map.joints()).enumerate() {
        let mut acc = [0.0; 3];
        for &v in indices {
            let p = mesh.vertices.get(v).ok_or_else(|| Error::Joint {
                joint: j,
                reason: format!("vertex index {v} out of range ({} vertices)", mesh.vertices.len()),
            })?;
            for (a, c) in acc.iter_mut().zip(p) {
                *a += c;
            }
        }
        *joint = acc.map(|a| a / VERTICES_PER_JOINT as f64);
    }
    Ok(joints)
}

/// Pinhole projection `u = fx X / Z + cx`, `v = fy Y / Z + cy`.
pub fn project(joints: &[[f64; 3]; NUM_LANDMARKS], k: &Intrinsics) -> Result<[(f64, f64); NUM_LANDMARKS]> {
    k.validate()?;
    let mut out = [(0.0, 0.0); NUM_LANDMARKS];
    for (j, (o, p)) in out.iter_mut().zip(joints).enumerate() {
        let [x, y, z] = *p;
        if !(z > 0.0) {
            return Err(Error::Joint {
                joint: j,
                reason: format!("behind the camera (Z = {z})"),
            });
        }
        *o = (k.fx * x / z + k.cx, k.fy * y / z + k.cy);
    }
    Ok(out)
}

/// Annotation for one mesh frame. `fallback` intrinsics are used when the
/// frame carries none.
pub fn annotate_mesh(mesh: &MeshFrame, map: &JointVertexMap, fallback: Option<&Intrinsics>) -> Result<AnnotationRecord> {
    let k = mesh
        .intrinsics
        .as_ref()
        .or(fallback)
        .ok_or_else(|| Error::contract(format!("no intrinsics for frame `{}`", mesh.image)))?;
    let joints = joints_from_vertices(mesh, map)?;
    let landmarks = project(&joints, k)?;
    let mut rec = AnnotationRecord::new(mesh.image.clone(), mesh.width, mesh.height, landmarks);
    let frame = Frame::Image {
        width: mesh.width,
        height: mesh.height,
    };
    if landmarks.iter().any(|&(x, y)| !frame.contains(x, y)) {
        rec.visibility = Some(landmarks.map(|(x, y)| frame.contains(x, y)));
    }
    rec.bbox = landmark_box(&rec);
    Ok(rec)
}

/// Box (edge coordinates) covering the pixels of the visible landmarks, or
/// `None` if none is visible.
pub fn landmark_box(record: &AnnotationRecord) -> Option<BoundingBox> {
    let k = record.keypoints();
    let visible = k.points.iter().filter(|p| p.visible);
    let (mut x1, mut y1, mut x2, mut y2) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in visible {
        x1 = x1.min(p.x);
        y1 = y1.min(p.y);
        x2 = x2.max(p.x);
        y2 = y2.max(p.y);
    }
    BoundingBox::new(x1, y1, x2 + 1.0, y2 + 1.0).ok()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub count: usize,
    /// Inclusive range of the crop scale factor.
    pub scale_range: (f64, f64),
    /// Max center shift per axis as a fraction of the crop side.
    pub jitter: f64,
    /// Square margin around the record's box, when it has one.
    pub margin: f64,
    pub max_retries: usize,
    pub output_size: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            count: 10,
            scale_range: (0.8, 1.2),
            jitter: 0.1,
            margin: crate::tracking::DEFAULT_MARGIN,
            max_retries: 8,
            output_size: INPUT_SIZE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AugmentedSample {
    pub image: Tensor,
    pub record: AnnotationRecord,
    /// Maps variant pixels back to source-image pixels.
    pub transform: CropTransform,
}

/// Square region a record is cropped from before augmentation: its box
/// squared with the margin, or the whole image squared about its center.
pub fn base_region(record: &AnnotationRecord, margin: f64) -> Result<BoundingBox> {
    match &record.bbox {
        Some(b) => b.squared(margin),
        None => {
            let side = record.width.max(record.height) as f64;
            let (cx, cy) = (record.width as f64 / 2.0, record.height as f64 / 2.0);
            BoundingBox::new(cx - side / 2.0, cy - side / 2.0, cx + side / 2.0, cy + side / 2.0)
        }
    }
}

/// Applies `transform` (variant -> source) inversely to a record's landmarks.
pub fn transform_record(record: &AnnotationRecord, transform: &CropTransform, size: usize, image: String) -> AnnotationRecord {
    let frame = Frame::Image { width: size, height: size };
    let landmarks = record.landmarks.map(|(x, y)| transform.to_roi(x, y));
    let inside = landmarks.map(|(x, y)| frame.contains(x, y));
    let flags: [bool; NUM_LANDMARKS] = std::array::from_fn(|i| inside[i] && record.visibility.map_or(true, |v| v[i]));
    let visibility = (record.visibility.is_some() || flags.iter().any(|f| !f)).then_some(flags);
    let bbox = record.bbox.and_then(|b| {
        // box corners are pixel edges; shift to centers and back
        let (x1, y1) = transform.to_roi(b.x1 - 0.5, b.y1 - 0.5);
        let (x2, y2) = transform.to_roi(b.x2 - 0.5, b.y2 - 0.5);
        BoundingBox::new(x1 + 0.5, y1 + 0.5, x2 + 0.5, y2 + 0.5).ok()
    });
    AnnotationRecord {
        image,
        width: size,
        height: size,
        landmarks,
        visibility,
        bbox,
    }
}

fn variant_name(image: &str, index: usize) -> String {
    let p = Path::new(image);
    let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    let name = format!("{stem}_aug{index:02}.png");
    match p.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => dir.join(name).display().to_string(),
        None => name,
    }
}

/// Produces up to `config.count` randomly scaled and shifted crops.
///
/// A draw that leaves more than half of the landmarks outside the crop is
/// redrawn up to `max_retries` times, then skipped with a warning. The same
/// seed always yields the same variants.
pub fn augment(record: &AnnotationRecord, image: &Tensor, seed: u64, config: &AugmentConfig) -> Result<Vec<AugmentedSample>> {
    record.validate()?;
    if (image.width(), image.height()) != (record.width, record.height) {
        return Err(Error::contract(format!(
            "image is {}x{} but record says {}x{}",
            image.width(),
            image.height(),
            record.width,
            record.height
        )));
    }
    let (lo, hi) = config.scale_range;
    if !(lo > 0.0) || hi < lo || !(config.jitter >= 0.0) || config.output_size == 0 {
        return Err(Error::contract("invalid augmentation config"));
    }
    let base = base_region(record, config.margin)?;
    let side = base.width();
    let (cx, cy) = base.center();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = config.output_size;

    let mut out = Vec::with_capacity(config.count);
    for index in 0..config.count {
        let mut accepted = None;
        for _ in 0..=config.max_retries {
            let scale = rng.random_range(lo..=hi);
            let jx = rng.random_range(-config.jitter..=config.jitter) * side;
            let jy = rng.random_range(-config.jitter..=config.jitter) * side;
            let s = side * scale;
            let (ccx, ccy) = (cx + jx, cy + jy);
            let region = BoundingBox::new(ccx - s / 2.0, ccy - s / 2.0, ccx + s / 2.0, ccy + s / 2.0)?;
            let transform = CropTransform::for_region(&region, size)?;
            let rec = transform_record(record, &transform, size, variant_name(&record.image, index));
            let frame = Frame::Image { width: size, height: size };
            let outside = rec.landmarks.iter().filter(|&&(x, y)| !frame.contains(x, y)).count();
            if 2 * outside <= NUM_LANDMARKS {
                accepted = Some((rec, transform));
                break;
            }
        }
        match accepted {
            Some((rec, transform)) => out.push(AugmentedSample {
                image: resample(image, &transform, size)?,
                record: rec,
                transform,
            }),
            None => log::warn!(
                "{}: variant {index} skipped, every draw pushed most landmarks out of frame",
                record.image
            ),
        }
    }
    Ok(out)
}
