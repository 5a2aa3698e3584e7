//! Line overlays for visual inspection, written as binary PPM.
//!
//! Ground-truth lines are green, automatic lines red and pixels marked by
//! both are yellow.

use std::fs;
use std::path::Path;

use crate::geom::{clip_to_rect, Line2D};
use crate::heatmap::Heatmap;

pub type Rgb = [u8; 3];

pub const TRUTH_COLOR: Rgb = [0, 255, 0];
pub const AUTO_COLOR: Rgb = [255, 0, 0];
pub const OVERLAP_COLOR: Rgb = [255, 255, 0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineLabel {
    Truth,
    Auto,
}

#[derive(Debug, Clone, Copy)]
pub enum Background<'a> {
    Blank {
        rows: usize,
        cols: usize,
    },
    /// Rendered in gray, scaled so the raster maximum is white.
    Raster(&'a Heatmap),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Overlay {
    rows: usize,
    cols: usize,
    pixels: Vec<Rgb>,
}

impl Overlay {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.cols + x]
    }

    pub fn count(&self, color: Rgb) -> usize {
        self.pixels.iter().filter(|p| **p == color).count()
    }

    /// Share of line pixels marked by both labels; `None` with no marks.
    pub fn overlap_fraction(&self) -> Option<f64> {
        let both = self.count(OVERLAP_COLOR);
        let marked = both + self.count(TRUTH_COLOR) + self.count(AUTO_COLOR);
        (marked > 0).then(|| both as f64 / marked as f64)
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.cols, self.rows).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn write_ppm(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.to_ppm())
    }
}

/// Pixels hit by the line inside a `rows x cols` image: one pixel per
/// column for shallow lines and one per row for steep ones, each rounded to
/// the nearest pixel center.
pub fn line_pixels(line: &Line2D, rows: usize, cols: usize) -> Vec<(usize, usize)> {
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let (max_x, max_y) = ((cols - 1) as f64, (rows - 1) as f64);
    let Some(seg) = clip_to_rect(line, max_x, max_y) else {
        return Vec::new();
    };
    let (a, b, c) = (line.a(), line.b(), line.c());
    let shallow = b.abs() >= a.abs();
    let (lo, hi) = if shallow {
        (seg.start.x.min(seg.end.x), seg.start.x.max(seg.end.x))
    } else {
        (seg.start.y.min(seg.end.y), seg.start.y.max(seg.end.y))
    };
    let (first, last) = ((lo - 1e-9).ceil() as i64, (hi + 1e-9).floor() as i64);
    (first..=last)
        .map(|i| {
            let t = i as f64;
            if shallow {
                let y = (-(a * t + c) / b).round().clamp(0.0, max_y);
                (i as usize, y as usize)
            } else {
                let x = (-(b * t + c) / a).round().clamp(0.0, max_x);
                (x as usize, i as usize)
            }
        })
        .collect()
}

pub fn render_overlay(background: Background<'_>, lines: &[(Line2D, LineLabel)]) -> Overlay {
    let (rows, cols, pixels) = match background {
        Background::Blank { rows, cols } => (rows, cols, vec![[0u8; 3]; rows * cols]),
        Background::Raster(h) => {
            let max = h.values().iter().fold(0.0f32, |m, v| m.max(*v));
            let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
            let pixels = h
                .values()
                .iter()
                .map(|v| {
                    let g = (v * scale).round().clamp(0.0, 255.0) as u8;
                    [g, g, g]
                })
                .collect();
            (h.rows(), h.cols(), pixels)
        }
    };
    let mut truth = vec![false; rows * cols];
    let mut auto = vec![false; rows * cols];
    for (line, label) in lines {
        let mask = match label {
            LineLabel::Truth => &mut truth,
            LineLabel::Auto => &mut auto,
        };
        for (x, y) in line_pixels(line, rows, cols) {
            mask[y * cols + x] = true;
        }
    }
    let mut overlay = Overlay { rows, cols, pixels };
    for (i, p) in overlay.pixels.iter_mut().enumerate() {
        match (truth[i], auto[i]) {
            (true, true) => *p = OVERLAP_COLOR,
            (true, false) => *p = TRUTH_COLOR,
            (false, true) => *p = AUTO_COLOR,
            (false, false) => {}
        }
    }
    overlay
}
