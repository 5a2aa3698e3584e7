//! Single-source prescription.
//!
//! When the target is planned orthogonal to its only source view, the plane
//! is fixed by one line in that view. The search runs over the line's signed
//! offset from the image center and its normal angle in `[0, 180)`.

use super::search::{inclusive_grid, offsets, refine};
use super::{PrescribeError, PrescriptionResult, Scorer, SearchConfig, SourceView, Winner};
use crate::geom::{self, Line2D, PixelCoord, Plane3D, SlicePose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InPlaneLine {
    pub offset_index: usize,
    /// Signed distance from the image center, pixels.
    pub offset_px: f64,
    /// Angle of the line normal from the +x (column) axis, degrees.
    pub angle_deg: f64,
}

/// Parameterization `cos(a) (x - cx) + sin(a) (y - cy) = offset` of lines in
/// a reference slice.
#[derive(Debug, Clone)]
pub struct LineSearchSpace {
    pose: SlicePose,
    center: PixelCoord,
    half_range: usize,
}

impl LineSearchSpace {
    pub fn for_pose(pose: &SlicePose) -> Self {
        let half_diag = ((pose.cols() - 1) as f64).hypot((pose.rows() - 1) as f64) / 2.0;
        Self {
            pose: pose.clone(),
            center: pose.center_pixel(),
            half_range: half_diag.ceil() as usize,
        }
    }

    /// Offsets run over `-half_range..=half_range` pixels.
    pub fn half_range(&self) -> usize {
        self.half_range
    }

    pub fn offset_of(&self, index: usize) -> f64 {
        index as f64 - self.half_range as f64
    }

    pub fn line(&self, offset_index: usize, angle_deg: f64) -> Line2D {
        let (s, c) = angle_deg.to_radians().sin_cos();
        let rho = self.offset_of(offset_index);
        Line2D::new(c, s, -(c * self.center.x + s * self.center.y) - rho).expect("unit normal")
    }

    /// Plane through the line, orthogonal to the reference slice.
    pub fn plane(&self, offset_index: usize, angle_deg: f64) -> Plane3D {
        let line = self.line(offset_index, angle_deg);
        let foot = self.center - PixelCoord::new(line.a(), line.b()) * line.eval(self.center);
        let p0 = geom::image_to_patient(&self.pose, foot);
        let p1 = geom::image_to_patient(&self.pose, foot + line.direction());
        let normal = (p1 - p0).cross(&self.pose.normal());
        Plane3D::new(p0, normal).expect("in-plane direction is never along the slice normal")
    }

    /// `(offset px, angle deg)` of an arbitrary line, angle in `[0, 180)`.
    pub fn locate(&self, line: &Line2D) -> (f64, f64) {
        let mut angle = line.b().atan2(line.a()).to_degrees();
        let mut rho = -line.c() - line.a() * self.center.x - line.b() * self.center.y;
        if angle < 0.0 {
            angle += 180.0;
            rho = -rho;
        }
        if angle >= 180.0 {
            angle -= 180.0;
            rho = -rho;
        }
        (rho, angle)
    }

    fn normalize(&self, index: i64, angle: f64) -> Option<(usize, f64)> {
        let flip = |i: i64| 2 * self.half_range as i64 - i;
        let (index, angle) = if angle < 0.0 {
            (flip(index), angle + 180.0)
        } else if angle >= 180.0 {
            (flip(index), angle - 180.0)
        } else {
            (index, angle)
        };
        (0..=2 * self.half_range as i64)
            .contains(&index)
            .then_some((index as usize, angle))
    }
}

fn key_cmp(a: &(usize, f64), b: &(usize, f64)) -> std::cmp::Ordering {
    a.0.cmp(&b.0).then(a.1.total_cmp(&b.1))
}

/// Pyramid search for the best line in a single source view; every slice of
/// a stacked source contributes. Uses the steps, sampling and aggregation of
/// `config`; the position step is in pixels of offset.
pub fn line_search_degenerate(
    source: &SourceView<'_>,
    config: &SearchConfig,
) -> Result<PrescriptionResult, PrescribeError> {
    config.validate()?;
    let space = LineSearchSpace::for_pose(source.reference_slice().pose);
    let sources = std::slice::from_ref(source);
    let scorer = Scorer::new(sources, config.sampling, config.aggregation);
    let score = |c: &(usize, f64)| scorer.score(&space.plane(c.0, c.1));

    let first = config.levels[0];
    let angles = inclusive_grid(0.0, 180.0, first.angle_step);
    let mut coarse = Vec::new();
    for idx in (0..=2 * space.half_range).step_by(first.position_step) {
        for &a in angles.iter().filter(|a| **a < 180.0) {
            coarse.push((idx, a));
        }
    }
    let ((idx, angle), best_score, visited, level_scores) = refine(
        &coarse,
        score,
        key_cmp,
        |&(idx, angle), i| {
            let (prev, level) = (config.levels[i - 1], config.levels[i]);
            let np = (prev.position_step / level.position_step) as i64;
            let mut cands = Vec::new();
            for jp in -np..=np {
                for ja in offsets(prev.angle_step, level.angle_step) {
                    let i = idx as i64 + jp * level.position_step as i64;
                    if let Some(c) = space.normalize(i, angle + ja as f64 * level.angle_step) {
                        cands.push(c);
                    }
                }
            }
            cands
        },
        config,
    );
    let plane = space.plane(idx, angle);
    Ok(PrescriptionResult {
        plane,
        score: best_score,
        winner: Winner::Line(InPlaneLine {
            offset_index: idx,
            offset_px: space.offset_of(idx),
            angle_deg: angle,
        }),
        segments: scorer.segments(&plane),
        visited,
        level_scores,
        degenerate_zero_score: best_score == 0.0,
    })
}
