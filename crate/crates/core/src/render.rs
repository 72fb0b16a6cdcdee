//! Debug overlays: landmarks with skeleton edges, and heatmap maxima.

use crate::error::{Error, Result};
use crate::heatmap::{HeatmapStack, KeypointSet, SKELETON};
use crate::tensor::Tensor;

pub const POINT_COLOR: [f32; 3] = [1.0, 0.2, 0.2];
pub const BONE_COLOR: [f32; 3] = [0.2, 1.0, 0.2];
/// Color a fully hot heatmap cell is painted with.
pub const HEAT_COLOR: [f32; 3] = [1.0, 0.0, 0.0];

fn require_rgb(image: &Tensor) -> Result<()> {
    if image.channels() != 3 {
        return Err(Error::contract(format!("overlays need an RGB image, got {} channels", image.channels())));
    }
    Ok(())
}

fn put(image: &mut Tensor, x: i64, y: i64, color: [f32; 3]) {
    if x < 0 || y < 0 || x >= image.width() as i64 || y >= image.height() as i64 {
        return;
    }
    for (c, v) in color.into_iter().enumerate() {
        image.set(y as usize, x as usize, c, v);
    }
}

fn line(image: &mut Tensor, (x0, y0): (f64, f64), (x1, y1): (f64, f64), color: [f32; 3]) {
    let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let x = x0 + (x1 - x0) * t;
        let y = y0 + (y1 - y0) * t;
        put(image, x.round() as i64, y.round() as i64, color);
    }
}

fn disc(image: &mut Tensor, (x, y): (f64, f64), radius: i64, color: [f32; 3]) {
    let (cx, cy) = (x.round() as i64, y.round() as i64);
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            if dx * dx + dy * dy <= radius * radius {
                put(image, cx + dx, cy + dy, color);
            }
        }
    }
}

/// Draws visible landmarks and the bones joining them. Keypoints must be in
/// the pixel frame of `image`.
pub fn draw_keypoints(image: &Tensor, k: &KeypointSet) -> Result<Tensor> {
    require_rgb(image)?;
    let mut out = image.clone();
    let radius = (image.width().max(image.height()) / 200).max(1) as i64;
    for &(a, b) in &SKELETON {
        let (p, q) = (&k.points[a], &k.points[b]);
        if p.visible && q.visible {
            line(&mut out, (p.x, p.y), (q.x, q.y), BONE_COLOR);
        }
    }
    for p in k.points.iter().filter(|p| p.visible) {
        disc(&mut out, (p.x, p.y), radius, POINT_COLOR);
    }
    Ok(out)
}

/// Blends the per-pixel maximum over all heatmap channels onto `roi` as
/// `roi * (1 - m) + HEAT_COLOR * m`, with `m` clamped to `[0, 1]`. Each pixel
/// reads the heatmap cell it falls in, so a 64x64 canvas maps cells 1:1.
pub fn heatmap_overlay(roi: &Tensor, h: &HeatmapStack) -> Result<Tensor> {
    require_rgb(roi)?;
    let t = h.tensor();
    let (hh, hw, _) = t.shape();
    let (rh, rw, _) = roi.shape();
    let mut out = roi.clone();
    for y in 0..rh {
        let cy = y * hh / rh;
        for x in 0..rw {
            let cx = x * hw / rw;
            let m = t.pixel(cy, cx).iter().copied().fold(f32::NEG_INFINITY, f32::max).clamp(0.0, 1.0);
            for (c, heat) in HEAT_COLOR.into_iter().enumerate() {
                let v = roi.at(y, x, c);
                out.set(y, x, c, v + (heat - v) * m);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heatmap::Frame;

    #[test]
    fn delta_heatmap_is_one_pixel() {
        let mut t = Tensor::zeros(64, 64, 21).unwrap();
        t.set(10, 20, 5, 1.0);
        let canvas = Tensor::zeros(64, 64, 3).unwrap();
        let out = heatmap_overlay(&canvas, &HeatmapStack::new(t).unwrap()).unwrap();
        assert_eq!(out.pixel(10, 20), &HEAT_COLOR);
        let lit = (0..64 * 64).filter(|i| out.pixel(i / 64, i % 64) != [0.0; 3]).count();
        assert_eq!(lit, 1);
    }

    #[test]
    fn skeleton_is_drawn() {
        let coords: Vec<_> = (0..21).map(|i| (10.0 + i as f64 * 4.0, 50.0)).collect();
        let mut k = KeypointSet::from_coords(&coords, Frame::Image { width: 100, height: 100 }).unwrap();
        let img = Tensor::zeros(100, 100, 3).unwrap();
        let out = draw_keypoints(&img, &k).unwrap();
        assert_eq!(out.pixel(50, 10), &POINT_COLOR);
        k.points.iter_mut().for_each(|p| p.visible = false);
        assert_eq!(draw_keypoints(&img, &k).unwrap(), img);
    }
}
