//! Line-oriented annotation / prediction files.
//!
//! One record per line, whitespace separated:
//!
//! ```text
//! image_path w h x0 y0 x1 y1 ... x20 y20 [v0 ... v20] [box=x1,y1,x2,y2]
//! ```
//!
//! Visibility flags are `0`/`1`. Blank lines and lines starting with `#` are
//! ignored. Coordinates are written with the shortest representation that
//! parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::heatmap::{Frame, Keypoint, KeypointSet};
use crate::model::NUM_LANDMARKS;

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub landmarks: [(f64, f64); NUM_LANDMARKS],
    pub visibility: Option<[bool; NUM_LANDMARKS]>,
    pub bbox: Option<BoundingBox>,
}

impl AnnotationRecord {
    pub fn new(image: impl Into<String>, width: usize, height: usize, landmarks: [(f64, f64); NUM_LANDMARKS]) -> Self {
        Self {
            image: image.into(),
            width,
            height,
            landmarks,
            visibility: None,
            bbox: None,
        }
    }

    /// Image-frame keypoints; a landmark is visible when flagged so and inside
    /// the image.
    pub fn keypoints(&self) -> KeypointSet {
        let frame = Frame::Image {
            width: self.width,
            height: self.height,
        };
        let points = std::array::from_fn(|i| {
            let (x, y) = self.landmarks[i];
            let flagged = self.visibility.map_or(true, |v| v[i]);
            Keypoint {
                x,
                y,
                confidence: 1.0,
                visible: flagged && frame.contains(x, y),
            }
        });
        KeypointSet { points, frame }
    }

    /// Record holding the coordinates of an image-frame keypoint set.
    pub fn from_keypoints(image: impl Into<String>, k: &KeypointSet) -> Result<Self> {
        let Frame::Image { width, height } = k.frame else {
            return Err(Error::contract("annotation records hold image-frame keypoints"));
        };
        let landmarks = std::array::from_fn(|i| (k.points[i].x, k.points[i].y));
        let mut rec = Self::new(image, width, height, landmarks);
        if k.points.iter().any(|p| !p.visible) {
            rec.visibility = Some(std::array::from_fn(|i| k.points[i].visible));
        }
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.image.is_empty() || self.image.chars().any(char::is_whitespace) {
            return Err(Error::contract(format!("image path `{}` must be non-empty without whitespace", self.image)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::contract("image size must be positive"));
        }
        if self.landmarks.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::contract(format!("non-finite landmark in `{}`", self.image)));
        }
        Ok(())
    }

    pub fn to_line(&self) -> String {
        let mut line = format!("{} {} {}", self.image, self.width, self.height);
        for (x, y) in &self.landmarks {
            let _ = write!(line, " {x} {y}");
        }
        if let Some(v) = &self.visibility {
            for &f in v {
                line.push_str(if f { " 1" } else { " 0" });
            }
        }
        if let Some(b) = &self.bbox {
            let _ = write!(line, " box={},{},{},{}", b.x1, b.y1, b.x2, b.y2);
        }
        line
    }

    pub fn parse_line(line: &str) -> std::result::Result<Self, String> {
        let mut fields: Vec<&str> = line.split_whitespace().collect();
        let bbox = match fields.last() {
            Some(last) if last.starts_with("box=") => {
                let coords: Vec<f64> = last["box=".len()..]
                    .split(',')
                    .map(|v| v.parse::<f64>().map_err(|_| format!("bad box coordinate `{v}`")))
                    .collect::<std::result::Result<_, _>>()?;
                let coords: [f64; 4] = coords
                    .try_into()
                    .map_err(|_| "box needs four coordinates".to_string())?;
                fields.pop();
                Some(BoundingBox::from_coords(coords).map_err(|e| e.to_string())?)
            }
            _ => None,
        };
        let base = 3 + 2 * NUM_LANDMARKS;
        if fields.len() != base && fields.len() != base + NUM_LANDMARKS {
            return Err(format!(
                "expected {base} or {} fields, got {}",
                base + NUM_LANDMARKS,
                fields.len()
            ));
        }
        let image = fields[0].to_string();
        let width: usize = fields[1].parse().map_err(|_| format!("bad width `{}`", fields[1]))?;
        let height: usize = fields[2].parse().map_err(|_| format!("bad height `{}`", fields[2]))?;
        if width == 0 || height == 0 {
            return Err("image size must be positive".into());
        }
        let mut landmarks = [(0.0, 0.0); NUM_LANDMARKS];
        for (i, lm) in landmarks.iter_mut().enumerate() {
            let parse = |s: &str| -> std::result::Result<f64, String> {
                let v: f64 = s.parse().map_err(|_| format!("landmark {i}: bad coordinate `{s}`"))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(format!("landmark {i}: non-finite coordinate"))
                }
            };
            *lm = (parse(fields[3 + 2 * i])?, parse(fields[4 + 2 * i])?);
        }
        let visibility = if fields.len() > base {
            let mut v = [true; NUM_LANDMARKS];
            for (i, flag) in v.iter_mut().enumerate() {
                *flag = match fields[base + i] {
                    "1" => true,
                    "0" => false,
                    other => return Err(format!("visibility {i}: expected 0 or 1, got `{other}`")),
                };
            }
            Some(v)
        } else {
            None
        };
        Ok(Self {
            image,
            width,
            height,
            landmarks,
            visibility,
            bbox,
        })
    }
}

/// Streams records from a reader, one at a time.
pub struct AnnotationReader<R> {
    lines: std::io::Lines<R>,
    origin: String,
    line_no: usize,
}

impl AnnotationReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(BufReader::new(file), path.display().to_string()))
    }
}

impl<R: BufRead> AnnotationReader<R> {
    pub fn new(reader: R, origin: impl Into<String>) -> Self {
        Self {
            lines: reader.lines(),
            origin: origin.into(),
            line_no: 0,
        }
    }
}

impl<R: BufRead> Iterator for AnnotationReader<R> {
    type Item = Result<AnnotationRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => {
                    return Some(Err(Error::Parse {
                        path: self.origin.clone(),
                        line: self.line_no,
                        reason: e.to_string(),
                    }))
                }
            };
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Some(AnnotationRecord::parse_line(trimmed).map_err(|reason| Error::Parse {
                path: self.origin.clone(),
                line: self.line_no,
                reason,
            }));
        }
    }
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>> {
    AnnotationReader::open(path)?.collect()
}

pub fn write_annotations<'a>(records: impl IntoIterator<Item = &'a AnnotationRecord>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        r.validate()?;
        writeln!(w, "{}", r.to_line()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
