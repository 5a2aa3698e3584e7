//! Intersecting-line heatmap labels.
//!
//! A target plane crosses every source slice along a line; the label for that
//! (source slice, target) pair is a Gaussian ridge of the perpendicular pixel
//! distance to the line. Labels for a whole exam are produced by walking the
//! view dependency table.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::geom::{self, GeomError, Line2D, PixelCoord, SlicePose};
use crate::io::manifest::ExamManifest;

/// Kernel width as a multiple of the target slice thickness.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Single-channel float raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeatmapError {
    #[error("raster has {got} values, expected {rows}x{cols}")]
    BadLength { rows: usize, cols: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

impl Heatmap {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self, HeatmapError> {
        if values.len() != rows * cols {
            return Err(HeatmapError::BadLength {
                rows,
                cols,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(HeatmapError::NonFinite(i));
        }
        Ok(Self { rows, cols, values })
    }

    /// Builds a raster from `f(x, y)` with `x` the column and `y` the row.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for y in 0..rows {
            for x in 0..cols {
                values.push(f(x, y));
            }
        }
        Self { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.cols + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.values[y * self.cols + x] = v;
    }

    pub fn scaled(&self, k: f32) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| v * k).collect(),
        }
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    /// Index of the largest value, ties resolved to the first in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best % self.cols, best / self.cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub alpha: f64,
    sigma_px: f64,
}

impl KernelConfig {
    /// Resolves `sigma = alpha * target thickness` in source pixels.
    pub fn for_pair(target: &SlicePose, source: &SlicePose, alpha: f64) -> Self {
        Self {
            alpha,
            sigma_px: sigma_for_target(target, source, alpha),
        }
    }

    /// A kernel with an explicit width in pixels.
    pub fn with_sigma_px(sigma_px: f64) -> Self {
        Self {
            alpha: f64::NAN,
            sigma_px,
        }
    }

    pub fn sigma_px(&self) -> f64 {
        self.sigma_px
    }
}

/// Kernel width in source pixels: `alpha * t_target / mean(source spacing)`.
pub fn sigma_for_target(target_pose: &SlicePose, source_pose: &SlicePose, alpha: f64) -> f64 {
    alpha * target_pose.thickness() / source_pose.mean_spacing()
}

/// Ridge value at one pixel. Evaluates the general `(a, b, c)` form so it
/// does not rely on the line being canonical.
pub fn gaussian_response(line: &Line2D, sigma_px: f64, px: PixelCoord) -> f64 {
    let r = line.a() * px.x + line.b() * px.y + line.c();
    let ab = line.a() * line.a() + line.b() * line.b();
    (-(r * r) / (2.0 * sigma_px * sigma_px * ab)).exp()
}

pub fn render_heatmap(line: &Line2D, pose: &SlicePose, kernel: &KernelConfig) -> Heatmap {
    let sigma = kernel.sigma_px();
    Heatmap::from_fn(pose.rows(), pose.cols(), |x, y| {
        gaussian_response(line, sigma, PixelCoord::new(x as f64, y as f64)) as f32
    })
}

/// Ordered `target -> sources` table.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyMap {
    entries: Vec<(String, Vec<String>)>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DependencyError {
    #[error("target {0} lists itself as a source")]
    SelfDependency(String),
    #[error("target {0} appears more than once")]
    DuplicateTarget(String),
    #[error("target {0} has no sources")]
    NoSources(String),
    #[error("source {source_view} listed twice for target {target}")]
    DuplicateSource { target: String, source_view: String },
}

impl DependencyMap {
    pub fn new<T, S>(entries: impl IntoIterator<Item = (T, Vec<S>)>) -> Result<Self, DependencyError>
    where
        T: Into<String>,
        S: Into<String>,
    {
        let mut out: Vec<(String, Vec<String>)> = Vec::new();
        for (target, sources) in entries {
            let target = target.into();
            let sources: Vec<String> = sources.into_iter().map(Into::into).collect();
            if sources.is_empty() {
                return Err(DependencyError::NoSources(target));
            }
            if sources.contains(&target) {
                return Err(DependencyError::SelfDependency(target));
            }
            if out.iter().any(|(t, _)| *t == target) {
                return Err(DependencyError::DuplicateTarget(target));
            }
            for (i, s) in sources.iter().enumerate() {
                if sources[..i].contains(s) {
                    return Err(DependencyError::DuplicateSource {
                        target,
                        source_view: s.clone(),
                    });
                }
            }
            out.push((target, sources));
        }
        Ok(Self { entries: out })
    }

    /// Default planning protocol: axial -> p2C -> pSA -> p4C, then the
    /// standard long- and short-axis views.
    pub fn protocol() -> Self {
        Self::new([
            ("p2C", vec!["axial"]),
            ("pSA", vec!["p2C"]),
            ("p4C", vec!["p2C", "pSA"]),
            ("2C", vec!["p4C", "pSA"]),
            ("3C", vec!["p2C", "p4C", "pSA"]),
            ("4C", vec!["p2C", "pSA"]),
            ("SAX", vec!["p2C", "p4C"]),
        ])
        .expect("static table is valid")
    }

    /// Variant where p4C is planned from p2C alone and pSA from p2C and p4C.
    pub fn alternative_protocol() -> Self {
        Self::new([
            ("p2C", vec!["axial"]),
            ("p4C", vec!["p2C"]),
            ("pSA", vec!["p2C", "p4C"]),
            ("2C", vec!["p4C", "pSA"]),
            ("3C", vec!["p2C", "p4C", "pSA"]),
            ("4C", vec!["p2C", "pSA"]),
            ("SAX", vec!["p2C", "p4C"]),
        ])
        .expect("static table is valid")
    }

    pub fn entries(&self) -> &[(String, Vec<String>)] {
        &self.entries
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(t, _)| t.as_str())
    }

    pub fn sources_of(&self, target: &str) -> Option<&[String]> {
        self.entries
            .iter()
            .find(|(t, _)| t == target)
            .map(|(_, s)| s.as_slice())
    }

    /// Channel order for a source view: targets in table order.
    pub fn targets_from(&self, source: &str) -> Vec<String> {
        self.entries
            .iter()
            .filter(|(_, s)| s.iter().any(|v| v == source))
            .map(|(t, _)| t.clone())
            .collect()
    }

    /// Every view that acts as a source, in order of first appearance.
    pub fn source_views(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (_, sources) in &self.entries {
            for s in sources {
                if !out.contains(s) {
                    out.push(s.clone());
                }
            }
        }
        out
    }

    /// Restricts the table to the given targets, keeping order.
    pub fn only_targets(&self, targets: &[&str]) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(t, _)| targets.contains(&t.as_str()))
                .cloned()
                .collect(),
        }
    }
}

/// All target channels of one source slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceLabels {
    pub channels: Vec<Heatmap>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewLabels {
    /// Channel order.
    pub targets: Vec<String>,
    pub slices: Vec<SliceLabels>,
}

impl ViewLabels {
    pub fn channel_index(&self, target: &str) -> Option<usize> {
        self.targets.iter().position(|t| t == target)
    }

    /// Heatmap of every slice for one target channel.
    pub fn channel(&self, target: &str) -> Option<Vec<&Heatmap>> {
        let c = self.channel_index(target)?;
        Some(self.slices.iter().map(|s| &s.channels[c]).collect())
    }
}

/// Labels (or predictions) keyed by source view id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabelSet {
    pub views: BTreeMap<String, ViewLabels>,
}

impl LabelSet {
    pub fn get(&self, view: &str) -> Option<&ViewLabels> {
        self.views.get(view)
    }

    pub fn heatmap(&self, view: &str, slice: usize, target: &str) -> Option<&Heatmap> {
        let v = self.views.get(view)?;
        let c = v.channel_index(target)?;
        v.slices.get(slice).map(|s| &s.channels[c])
    }

    pub fn heatmaps(&self) -> impl Iterator<Item = &Heatmap> {
        self.views
            .values()
            .flat_map(|v| v.slices.iter().flat_map(|s| s.channels.iter()))
    }

    /// Applies `f` to every raster, keeping structure.
    pub fn map(&self, mut f: impl FnMut(&Heatmap) -> Heatmap) -> Self {
        let views = self
            .views
            .iter()
            .map(|(id, v)| {
                let slices = v
                    .slices
                    .iter()
                    .map(|s| SliceLabels {
                        channels: s.channels.iter().map(&mut f).collect(),
                    })
                    .collect();
                (
                    id.clone(),
                    ViewLabels {
                        targets: v.targets.clone(),
                        slices,
                    },
                )
            })
            .collect();
        Self { views }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("dependency table references view {0}, which is not in the exam")]
    MissingView(String),
    #[error("source {source_view} slice {slice} is parallel to target {target}")]
    ParallelPlanes {
        source_view: String,
        slice: usize,
        target: String,
    },
    #[error("geometry error for source {source_view} slice {slice}, target {target}: {error}")]
    Geometry {
        source_view: String,
        slice: usize,
        target: String,
        error: GeomError,
    },
}

/// Renders the intersecting-line label of every (source slice, target) edge.
pub fn gen_labels(exam: &ExamManifest, deps: &DependencyMap, alpha: f64) -> Result<LabelSet, LabelError> {
    for (target, sources) in deps.entries() {
        for id in std::iter::once(target).chain(sources) {
            if exam.view(id).is_none() {
                return Err(LabelError::MissingView(id.clone()));
            }
        }
    }

    struct Job<'a> {
        view: &'a str,
        slice: usize,
        target: &'a str,
        source_pose: &'a SlicePose,
        target_pose: &'a SlicePose,
    }

    let mut layout: Vec<(String, Vec<String>, usize)> = Vec::new();
    let mut jobs = Vec::new();
    for source in deps.source_views() {
        let view = exam.view(&source).expect("checked above");
        let targets = deps.targets_from(&source);
        for (slice, pose) in view.slices.iter().enumerate() {
            for target in &targets {
                let target_view = exam.view(target).expect("checked above");
                jobs.push(Job {
                    view: &view.id,
                    slice,
                    target: &target_view.id,
                    source_pose: pose,
                    target_pose: target_view.target_pose(),
                });
            }
        }
        layout.push((source, targets, view.slices.len()));
    }

    let rendered: Vec<Result<Heatmap, LabelError>> = jobs
        .par_iter()
        .map(|job| {
            let wrap = |error: GeomError| match error {
                GeomError::ParallelPlanes { .. } => LabelError::ParallelPlanes {
                    source_view: job.view.to_string(),
                    slice: job.slice,
                    target: job.target.to_string(),
                },
                error => LabelError::Geometry {
                    source_view: job.view.to_string(),
                    slice: job.slice,
                    target: job.target.to_string(),
                    error,
                },
            };
            let line3 = geom::intersect_planes(
                &geom::pose_to_plane(job.target_pose),
                &geom::pose_to_plane(job.source_pose),
            )
            .map_err(wrap)?;
            let line = geom::line3d_to_line2d(&line3, job.source_pose).map_err(wrap)?;
            let kernel = KernelConfig::for_pair(job.target_pose, job.source_pose, alpha);
            Ok(render_heatmap(&line, job.source_pose, &kernel))
        })
        .collect();
    let rendered: Vec<Heatmap> = rendered.into_iter().collect::<Result<_, _>>()?;

    let mut it = rendered.into_iter();
    let mut set = LabelSet::default();
    for (source, targets, n_slices) in layout {
        let slices = (0..n_slices)
            .map(|_| SliceLabels {
                channels: it.by_ref().take(targets.len()).collect(),
            })
            .collect();
        set.views.insert(source, ViewLabels { targets, slices });
    }
    Ok(set)
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("shape mismatch: {0}")]
pub struct ShapeMismatch(pub String);

/// Mean squared difference over channels and pixels.
pub fn l2_loss(truth: &SliceLabels, pred: &SliceLabels) -> Result<f64, ShapeMismatch> {
    l2_loss_channels(&truth.channels, &pred.channels)
}

pub fn l2_loss_channels(truth: &[Heatmap], pred: &[Heatmap]) -> Result<f64, ShapeMismatch> {
    if truth.len() != pred.len() {
        return Err(ShapeMismatch(format!("{} channels vs {}", truth.len(), pred.len())));
    }
    if truth.is_empty() {
        return Err(ShapeMismatch("no channels".into()));
    }
    let mut total = 0.0;
    for (t, p) in truth.iter().zip(pred) {
        if (t.rows, t.cols) != (p.rows, p.cols) {
            return Err(ShapeMismatch(format!("{}x{} vs {}x{}", t.rows, t.cols, p.rows, p.cols)));
        }
        let sq: f64 = t
            .values
            .iter()
            .zip(&p.values)
            .map(|(a, b)| {
                let d = f64::from(*a) - f64::from(*b);
                d * d
            })
            .sum();
        total += sq / t.values.len() as f64;
    }
    Ok(total / truth.len() as f64)
}
