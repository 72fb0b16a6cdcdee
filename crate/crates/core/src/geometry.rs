//! Boxes and crop transforms shared by the tracker, codec and dataset tools.
//!
//! Pixel coordinates use the index convention: the center of pixel `i` is at
//! coordinate `i`, so a `w`-wide frame spans `[-0.5, w - 0.5]`.

use crate::error::{Error, Result};

/// Axis-aligned rectangle in image pixels, `x1 < x2` and `y1 < y2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let b = Self { x1, y1, x2, y2 };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x1, self.y1, self.x2, self.y2].iter().all(|v| v.is_finite());
        if !finite || self.x1 >= self.x2 || self.y1 >= self.y2 {
            return Err(Error::contract(format!(
                "invalid bounding box ({}, {}, {}, {})",
                self.x1, self.y1, self.x2, self.y2
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) * 0.5, (self.y1 + self.y2) * 0.5)
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn from_coords(c: [f64; 4]) -> Result<Self> {
        Self::new(c[0], c[1], c[2], c[3])
    }

    /// Square of side `max(w, h) * margin` about the box center.
    pub fn squared(&self, margin: f64) -> Result<Self> {
        if !(margin > 0.0) || !margin.is_finite() {
            return Err(Error::contract(format!("margin must be positive, got {margin}")));
        }
        let side = self.width().max(self.height()) * margin;
        let (cx, cy) = self.center();
        Self::new(cx - side / 2.0, cy - side / 2.0, cx + side / 2.0, cy + side / 2.0)
    }

    /// Area of the overlap with a `width x height` image whose extent is
    /// `[0, width] x [0, height]` in box coordinates.
    pub fn overlap_area(&self, width: usize, height: usize) -> f64 {
        let w = (self.x2.min(width as f64) - self.x1.max(0.0)).max(0.0);
        let h = (self.y2.min(height as f64) - self.y1.max(0.0)).max(0.0);
        w * h
    }
}

/// Maps crop (ROI) pixel coordinates to source-image pixel coordinates:
/// `image = scale * roi + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropTransform {
    pub scale: f64,
    pub offset_x: f64,
    pub offset_y: f64,
}

impl CropTransform {
    pub const IDENTITY: CropTransform = CropTransform {
        scale: 1.0,
        offset_x: 0.0,
        offset_y: 0.0,
    };

    pub fn new(scale: f64, offset_x: f64, offset_y: f64) -> Result<Self> {
        let t = Self {
            scale,
            offset_x,
            offset_y,
        };
        t.validate()?;
        Ok(t)
    }

    /// Transform that resamples the region `[x1, x2] x [y1, y2]` (edge
    /// coordinates, square) onto a `size x size` crop.
    pub fn for_region(region: &BoundingBox, size: usize) -> Result<Self> {
        let scale = region.width() / size as f64;
        // crop pixel u covers [u, u+1) in edge coords -> center u + 0.5
        Self::new(
            scale,
            region.x1 + 0.5 * scale - 0.5,
            region.y1 + 0.5 * scale - 0.5,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() || !self.offset_x.is_finite() || !self.offset_y.is_finite() {
            return Err(Error::contract(format!(
                "degenerate crop transform (scale {}, offset {}, {})",
                self.scale, self.offset_x, self.offset_y
            )));
        }
        Ok(())
    }

    pub fn to_image(&self, x: f64, y: f64) -> (f64, f64) {
        (self.scale * x + self.offset_x, self.scale * y + self.offset_y)
    }

    pub fn to_roi(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.offset_x) / self.scale, (y - self.offset_y) / self.scale)
    }
}
