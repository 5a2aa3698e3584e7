//! Plane prescription by multi-view heatmap aggregation.
//!
//! A candidate plane is scored by intersecting it with every source slice,
//! clipping the intersection to the image and summing the heatmap along the
//! clipped segment. The best plane is found by a coarse-to-fine grid search
//! over a point constrained to an anchor segment and the two spherical angles
//! of the plane normal.

mod line_search;
mod search;

pub use line_search::{line_search_degenerate, InPlaneLine, LineSearchSpace};
pub use search::{exhaustive_search, pyramid_search, DEFAULT_CANDIDATE_CAP};

use thiserror::Error;

use crate::geom::{self, GeomError, Line2D, PixelCoord, Plane3D, Segment2D, SlicePose, SphericalAngles, Vec3};
use crate::heatmap::{DependencyMap, Heatmap, LabelSet};
use crate::io::manifest::ExamManifest;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrescribeError {
    #[error("{0} source view(s) given; a plane search needs at least two (use line_search_degenerate for one)")]
    TooFewSources(usize),
    #[error("anchor views {first} and {second} are parallel")]
    ParallelPlanes { first: String, second: String },
    #[error("intersection of {first} and {second} misses the {first} image")]
    EmptyIntersection { first: String, second: String },
    #[error("search space has {size} candidates, cap is {cap}")]
    SearchSpaceTooLarge { size: u128, cap: u128 },
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown target {0}")]
    UnknownTarget(String),
    #[error("view {0} is not in the exam")]
    MissingView(String),
    #[error("no heatmap for source {view} and target {target}")]
    MissingHeatmap { view: String, target: String },
    #[error("heatmap for {view} slice {slice} does not match the slice extent")]
    ExtentMismatch { view: String, slice: usize },
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    #[default]
    Bilinear,
    Nearest,
}

/// How segment samples are combined into a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Plain sum over every sample of every segment.
    #[default]
    Sum,
    /// Each segment contributes its mean sample value.
    SegmentMean,
}

#[derive(Debug, Clone, Copy)]
pub struct SourceSlice<'a> {
    pub pose: &'a SlicePose,
    pub heatmap: &'a Heatmap,
}

#[derive(Debug, Clone)]
pub struct SourceView<'a> {
    pub id: String,
    pub slices: Vec<SourceSlice<'a>>,
}

impl<'a> SourceView<'a> {
    pub fn new(id: impl Into<String>, slices: Vec<SourceSlice<'a>>) -> Self {
        Self { id: id.into(), slices }
    }

    /// Slice that stands for the view when building anchors: the middle one.
    pub fn reference_slice(&self) -> &SourceSlice<'a> {
        &self.slices[self.slices.len() / 2]
    }
}

/// Collects the source views of `target` with that target's heatmap channel.
pub fn sources_for_target<'a>(
    exam: &'a ExamManifest,
    labels: &'a LabelSet,
    deps: &DependencyMap,
    target: &str,
) -> Result<Vec<SourceView<'a>>, PrescribeError> {
    let sources = deps
        .sources_of(target)
        .ok_or_else(|| PrescribeError::UnknownTarget(target.to_string()))?;
    sources
        .iter()
        .map(|id| {
            let view = exam.view(id).ok_or_else(|| PrescribeError::MissingView(id.clone()))?;
            let missing = || PrescribeError::MissingHeatmap {
                view: id.clone(),
                target: target.to_string(),
            };
            let maps = labels.get(id).and_then(|v| v.channel(target)).ok_or_else(missing)?;
            if maps.len() != view.slices.len() {
                return Err(missing());
            }
            let slices = view
                .slices
                .iter()
                .zip(maps)
                .enumerate()
                .map(|(k, (pose, heatmap))| {
                    if (heatmap.rows(), heatmap.cols()) != (pose.rows(), pose.cols()) {
                        return Err(PrescribeError::ExtentMismatch {
                            view: id.clone(),
                            slice: k,
                        });
                    }
                    Ok(SourceSlice { pose, heatmap })
                })
                .collect::<Result<_, _>>()?;
            Ok(SourceView::new(id.clone(), slices))
        })
        .collect()
}

/// Segment of 3D space along which the candidate plane's point is searched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorSegment {
    start: Vec3,
    end: Vec3,
    step_mm: f64,
}

impl AnchorSegment {
    pub fn new(start: Vec3, end: Vec3, step_mm: f64) -> Result<Self, PrescribeError> {
        if !(step_mm.is_finite() && step_mm > 0.0) {
            return Err(PrescribeError::InvalidConfig(format!("anchor step {step_mm}")));
        }
        Ok(Self { start, end, step_mm })
    }

    pub fn start(&self) -> Vec3 {
        self.start
    }
    pub fn end(&self) -> Vec3 {
        self.end
    }
    pub fn step_mm(&self) -> f64 {
        self.step_mm
    }

    pub fn length_mm(&self) -> f64 {
        (self.end - self.start).norm()
    }

    /// Number of anchor positions, one per step starting at `start`.
    pub fn sample_count(&self) -> usize {
        (self.length_mm() / self.step_mm + 1e-9).floor() as usize + 1
    }

    pub fn point(&self, index: usize) -> Vec3 {
        let len = self.length_mm();
        if len == 0.0 {
            return self.start;
        }
        self.start + (self.end - self.start) * (index as f64 * self.step_mm / len)
    }

    /// Index of the anchor position closest to where `plane` crosses the
    /// anchor line, if it crosses within the segment.
    pub fn crossing_index(&self, plane: &Plane3D) -> Option<usize> {
        let d = self.end - self.start;
        let denom = plane.normal().dot(&d);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = plane.signed_distance(&self.start) / -denom;
        if !(-1e-9..=1.0 + 1e-9).contains(&t) {
            return None;
        }
        let idx = (t * self.length_mm() / self.step_mm).round() as usize;
        Some(idx.min(self.sample_count() - 1))
    }
}

/// Anchor from the intersection of two source views (default: the first
/// two), clipped to the first view's image.
pub fn build_anchor(
    sources: &[SourceView<'_>],
    pair_choice: Option<(usize, usize)>,
) -> Result<AnchorSegment, PrescribeError> {
    if sources.len() < 2 {
        return Err(PrescribeError::TooFewSources(sources.len()));
    }
    let (i, j) = pair_choice.unwrap_or((0, 1));
    if i == j || i >= sources.len() || j >= sources.len() {
        return Err(PrescribeError::InvalidConfig(format!(
            "anchor pair ({i}, {j}) with {} sources",
            sources.len()
        )));
    }
    let (first, second) = (&sources[i], &sources[j]);
    let host = first.reference_slice().pose;
    let other = second.reference_slice().pose;
    let line3 =
        geom::intersect_planes(&geom::pose_to_plane(host), &geom::pose_to_plane(other)).map_err(|e| match e {
            GeomError::ParallelPlanes { .. } => PrescribeError::ParallelPlanes {
                first: first.id.clone(),
                second: second.id.clone(),
            },
            e => e.into(),
        })?;
    let line = geom::line3d_to_line2d(&line3, host)?;
    let seg = geom::clip_line(&line, host).ok_or_else(|| PrescribeError::EmptyIntersection {
        first: first.id.clone(),
        second: second.id.clone(),
    })?;
    // lift through the 3D line so both endpoints sit on both planes
    let lift = |px: PixelCoord| {
        let p = geom::image_to_patient(host, px);
        line3.at(line3.direction().dot(&(p - line3.point())))
    };
    AnchorSegment::new(lift(seg.start), lift(seg.end), host.mean_spacing())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidatePlane {
    pub anchor_index: usize,
    pub angles: SphericalAngles,
}

impl CandidatePlane {
    pub fn new(anchor_index: usize, theta: f64, phi: f64) -> Self {
        Self {
            anchor_index,
            angles: SphericalAngles::new(theta, phi),
        }
    }

    pub fn plane(&self, anchor: &AnchorSegment) -> Plane3D {
        Plane3D::new(anchor.point(self.anchor_index), geom::normal_from_angles(self.angles)).expect("unit normal")
    }

    /// Lexicographic (anchor index, theta, phi) order used to break ties.
    pub(crate) fn key_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.anchor_index
            .cmp(&other.anchor_index)
            .then(self.angles.theta.total_cmp(&other.angles.theta))
            .then(self.angles.phi.total_cmp(&other.angles.phi))
    }
}

/// One pyramid level: anchor step in positions and angle step in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchLevel {
    pub position_step: usize,
    pub angle_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Coarse to fine. Each level after the first searches `+-` the previous
    /// level's step around the incumbent.
    pub levels: Vec<SearchLevel>,
    /// Inclusive polar range of the first level, degrees.
    pub theta_range: (f64, f64),
    /// Azimuth range of the first level; a span of 360 or more wraps.
    pub phi_range: (f64, f64),
    /// Inclusive anchor index range; the whole segment when absent.
    pub anchor_range: Option<(usize, usize)>,
    pub sampling: SamplingMode,
    pub aggregation: Aggregation,
    /// Incumbents each level hands to the next, coarsest first; missing
    /// entries mean 1.
    pub beam_widths: Vec<usize>,
    /// Anchor pair override, as indices into the source list.
    pub anchor_pair: Option<(usize, usize)>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            levels: vec![
                SearchLevel {
                    position_step: 15,
                    angle_step: 15.0,
                },
                SearchLevel {
                    position_step: 5,
                    angle_step: 5.0,
                },
                SearchLevel {
                    position_step: 1,
                    angle_step: 1.0,
                },
            ],
            theta_range: (0.0, 180.0),
            phi_range: (0.0, 360.0),
            anchor_range: None,
            sampling: SamplingMode::Bilinear,
            aggregation: Aggregation::Sum,
            beam_widths: vec![64, 4],
            anchor_pair: None,
        }
    }
}

impl SearchConfig {
    /// Levels from `(position step, angle step)` pairs.
    pub fn with_steps(mut self, steps: &[(usize, f64)]) -> Self {
        self.levels = steps
            .iter()
            .map(|&(p, a)| SearchLevel {
                position_step: p,
                angle_step: a,
            })
            .collect();
        self
    }

    pub fn validate(&self) -> Result<(), PrescribeError> {
        let bad = |m: String| Err(PrescribeError::InvalidConfig(m));
        let Some(first) = self.levels.first() else {
            return bad("no search levels".into());
        };
        if first.position_step == 0 || !(first.angle_step.is_finite() && first.angle_step > 0.0) {
            return bad("steps must be positive".into());
        }
        for w in self.levels.windows(2) {
            if w[1].position_step == 0 || !(w[1].angle_step.is_finite() && w[1].angle_step > 0.0) {
                return bad("steps must be positive".into());
            }
            if w[1].position_step >= w[0].position_step {
                return bad("position steps must strictly decrease".into());
            }
            if w[1].angle_step >= w[0].angle_step {
                return bad("angle steps must strictly decrease".into());
            }
        }
        let (lo, hi) = self.theta_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("theta range ({lo}, {hi})"));
        }
        let (lo, hi) = self.phi_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("phi range ({lo}, {hi})"));
        }
        if let Some((lo, hi)) = self.anchor_range {
            if lo > hi {
                return bad(format!("anchor range ({lo}, {hi})"));
            }
        }
        if self.beam_widths.contains(&0) {
            return bad("beam widths must be at least 1".into());
        }
        Ok(())
    }

    pub(crate) fn beam_after(&self, level: usize) -> usize {
        if level + 1 >= self.levels.len() {
            1
        } else {
            self.beam_widths.get(level).copied().unwrap_or(1)
        }
    }

    pub(crate) fn phi_wraps(&self) -> bool {
        self.phi_range.1 - self.phi_range.0 >= 360.0
    }
}

/// Where a plane crosses one source slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentHit {
    pub view: String,
    pub slice: usize,
    pub line: Option<Line2D>,
    pub segment: Option<Segment2D>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Winner {
    Plane(CandidatePlane),
    Line(InPlaneLine),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrescriptionResult {
    pub plane: Plane3D,
    pub score: f64,
    pub winner: Winner,
    pub segments: Vec<SegmentHit>,
    /// Candidates scored across all levels.
    pub visited: usize,
    /// Best score after each level.
    pub level_scores: Vec<f64>,
    pub degenerate_zero_score: bool,
}

/// Sum of heatmap values at unit arc-length spacing along the segment,
/// endpoints included.
pub fn sample_segment(heatmap: &Heatmap, seg: &Segment2D, mode: SamplingMode) -> f64 {
    let (sum, _) = sample_segment_counted(heatmap, seg, mode);
    sum
}

pub(crate) fn sample_segment_counted(heatmap: &Heatmap, seg: &Segment2D, mode: SamplingMode) -> (f64, usize) {
    let intervals = seg.length().round() as usize;
    if intervals == 0 {
        return (sample_at(heatmap, seg.start, mode), 1);
    }
    let step = (seg.end - seg.start) / intervals as f64;
    let mut sum = 0.0;
    for k in 0..=intervals {
        sum += sample_at(heatmap, seg.start + step * k as f64, mode);
    }
    (sum, intervals + 1)
}

fn sample_at(h: &Heatmap, p: PixelCoord, mode: SamplingMode) -> f64 {
    let max_x = (h.cols() - 1) as f64;
    let max_y = (h.rows() - 1) as f64;
    let x = p.x.clamp(0.0, max_x);
    let y = p.y.clamp(0.0, max_y);
    match mode {
        SamplingMode::Nearest => f64::from(h.get(x.round() as usize, y.round() as usize)),
        SamplingMode::Bilinear => {
            let x0 = x.floor() as usize;
            let y0 = y.floor() as usize;
            let x1 = (x0 + 1).min(h.cols() - 1);
            let y1 = (y0 + 1).min(h.rows() - 1);
            let fx = x - x0 as f64;
            let fy = y - y0 as f64;
            let v = |xx: usize, yy: usize| f64::from(h.get(xx, yy));
            let top = v(x0, y0) * (1.0 - fx) + v(x1, y0) * fx;
            let bottom = v(x0, y1) * (1.0 - fx) + v(x1, y1) * fx;
            top * (1.0 - fy) + bottom * fy
        }
    }
}

/// Scores planes against a fixed set of source slices.
pub(crate) struct Scorer<'s, 'a> {
    sources: &'s [SourceView<'a>],
    planes: Vec<Vec<Plane3D>>,
    sampling: SamplingMode,
    aggregation: Aggregation,
}

impl<'s, 'a> Scorer<'s, 'a> {
    pub(crate) fn new(sources: &'s [SourceView<'a>], sampling: SamplingMode, aggregation: Aggregation) -> Self {
        let planes = sources
            .iter()
            .map(|v| v.slices.iter().map(|s| geom::pose_to_plane(s.pose)).collect())
            .collect();
        Self {
            sources,
            planes,
            sampling,
            aggregation,
        }
    }

    fn clipped(plane: &Plane3D, source_plane: &Plane3D, pose: &SlicePose) -> (Option<Line2D>, Option<Segment2D>) {
        let Ok(line3) = geom::intersect_planes(plane, source_plane) else {
            return (None, None);
        };
        let Ok(line) = geom::project_in_plane_line(&line3, pose) else {
            return (None, None);
        };
        (Some(line), geom::clip_line(&line, pose))
    }

    pub(crate) fn score(&self, plane: &Plane3D) -> f64 {
        let mut total = 0.0;
        for (view, planes) in self.sources.iter().zip(&self.planes) {
            for (slice, sp) in view.slices.iter().zip(planes) {
                if let (_, Some(seg)) = Self::clipped(plane, sp, slice.pose) {
                    let (sum, n) = sample_segment_counted(slice.heatmap, &seg, self.sampling);
                    total += match self.aggregation {
                        Aggregation::Sum => sum,
                        Aggregation::SegmentMean => sum / n as f64,
                    };
                }
            }
        }
        total
    }

    pub(crate) fn segments(&self, plane: &Plane3D) -> Vec<SegmentHit> {
        let mut out = Vec::new();
        for (view, planes) in self.sources.iter().zip(&self.planes) {
            for (k, (slice, sp)) in view.slices.iter().zip(planes).enumerate() {
                let (line, segment) = Self::clipped(plane, sp, slice.pose);
                out.push(SegmentHit {
                    view: view.id.clone(),
                    slice: k,
                    line,
                    segment,
                });
            }
        }
        out
    }
}

/// Aggregated heatmap response of one candidate plane.
pub fn score_candidate(
    cand: &CandidatePlane,
    anchor: &AnchorSegment,
    sources: &[SourceView<'_>],
    sampling: SamplingMode,
) -> f64 {
    score_plane(&cand.plane(anchor), sources, sampling, Aggregation::Sum)
}

pub fn score_plane(
    plane: &Plane3D,
    sources: &[SourceView<'_>],
    sampling: SamplingMode,
    aggregation: Aggregation,
) -> f64 {
    Scorer::new(sources, sampling, aggregation).score(plane)
}

/// Prescribes `target` from its sources: a plane search for two or more
/// sources, the in-plane line search for one.
pub fn prescribe_target(
    exam: &ExamManifest,
    labels: &LabelSet,
    deps: &DependencyMap,
    target: &str,
    config: &SearchConfig,
) -> Result<PrescriptionResult, PrescribeError> {
    let sources = sources_for_target(exam, labels, deps, target)?;
    if sources.len() == 1 {
        return line_search_degenerate(&sources[0], config);
    }
    let anchor = build_anchor(&sources, config.anchor_pair)?;
    pyramid_search(&anchor, &sources, config)
}
