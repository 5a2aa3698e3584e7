//! Slice-pose algebra.
//!
//! Pixel coordinates are continuous `(x, y)` with `x` the column index and
//! `y` the row index; integer values address pixel centers and `(0, 0)` is
//! the center of the first pixel. Patient coordinates are millimetres.

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
/// Continuous pixel coordinate, `x` = column, `y` = row.
pub type PixelCoord = Vector2<f64>;

/// Tolerance on unit length and orthogonality of direction cosines.
pub const UNIT_TOL: f64 = 1e-9;
/// Two planes are treated as parallel when `|n1 x n2|` falls below this.
pub const PARALLEL_TOL: f64 = 1e-8;
/// Slack, in pixels, allowed when deciding whether a point lies in an image.
pub const CLIP_SLACK: f64 = 1e-6;
/// Maximum out-of-plane residual (mm) for a line to count as lying in a slice.
pub const IN_PLANE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("invalid slice pose: {0}")]
    InvalidPose(String),
    #[error("planes are parallel (|n1 x n2| = {cross_norm:.3e})")]
    ParallelPlanes { cross_norm: f64 },
    #[error("line is not in the slice plane (residual {residual_mm:.3e} mm)")]
    LineNotInPlane { residual_mm: f64 },
    #[error("degenerate line coefficients: a and b are both zero")]
    DegenerateLine,
    #[error("vector has zero length")]
    ZeroVector,
}

/// Placement of a 2D image in patient space.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicePose {
    origin: Vec3,
    row_dir: Vec3,
    col_dir: Vec3,
    spacing_x: f64,
    spacing_y: f64,
    cols: usize,
    rows: usize,
    thickness: f64,
}

impl SlicePose {
    /// `row_dir` is the direction of increasing column index and `col_dir`
    /// the direction of increasing row index (the DICOM orientation order).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        origin: Vec3,
        row_dir: Vec3,
        col_dir: Vec3,
        spacing_x: f64,
        spacing_y: f64,
        cols: usize,
        rows: usize,
        thickness: f64,
    ) -> Result<Self, GeomError> {
        let bad = |msg: String| Err(GeomError::InvalidPose(msg));
        if !(origin.iter().chain(row_dir.iter()).chain(col_dir.iter())).all(|v| v.is_finite()) {
            return bad("non-finite position or direction cosine".into());
        }
        if (row_dir.norm() - 1.0).abs() > UNIT_TOL {
            return bad(format!("row direction has norm {}", row_dir.norm()));
        }
        if (col_dir.norm() - 1.0).abs() > UNIT_TOL {
            return bad(format!("column direction has norm {}", col_dir.norm()));
        }
        let dot = row_dir.dot(&col_dir);
        if dot.abs() > UNIT_TOL {
            return bad(format!("direction cosines not orthogonal (dot = {dot})"));
        }
        for (name, v) in [
            ("spacing_x", spacing_x),
            ("spacing_y", spacing_y),
            ("thickness", thickness),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if cols < 2 || rows < 2 {
            return bad(format!("image extent {cols}x{rows} is smaller than 2x2"));
        }
        Ok(Self {
            origin,
            row_dir,
            col_dir,
            spacing_x,
            spacing_y,
            cols,
            rows,
            thickness,
        })
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }
    pub fn row_dir(&self) -> Vec3 {
        self.row_dir
    }
    pub fn col_dir(&self) -> Vec3 {
        self.col_dir
    }
    pub fn spacing_x(&self) -> f64 {
        self.spacing_x
    }
    pub fn spacing_y(&self) -> f64 {
        self.spacing_y
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    pub fn mean_spacing(&self) -> f64 {
        0.5 * (self.spacing_x + self.spacing_y)
    }

    /// Unit normal `row_dir x col_dir`.
    pub fn normal(&self) -> Vec3 {
        self.row_dir.cross(&self.col_dir).normalize()
    }

    /// Pixel coordinate of the image center.
    pub fn center_pixel(&self) -> PixelCoord {
        PixelCoord::new((self.cols - 1) as f64 / 2.0, (self.rows - 1) as f64 / 2.0)
    }

    pub fn center(&self) -> Vec3 {
        image_to_patient(self, self.center_pixel())
    }

    pub fn contains_pixel(&self, px: PixelCoord, slack: f64) -> bool {
        px.x >= -slack
            && px.y >= -slack
            && px.x <= (self.cols - 1) as f64 + slack
            && px.y <= (self.rows - 1) as f64 + slack
    }

    /// Same pose with its origin shifted by `offset` mm.
    pub fn translated(&self, offset: Vec3) -> Self {
        Self {
            origin: self.origin + offset,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane3D {
    point: Vec3,
    normal: Vec3,
}

impl Plane3D {
    /// The normal is normalized here.
    pub fn new(point: Vec3, normal: Vec3) -> Result<Self, GeomError> {
        let n = normal.norm();
        if !(n.is_finite() && n > 0.0) || !point.iter().all(|v| v.is_finite()) {
            return Err(GeomError::ZeroVector);
        }
        Ok(Self {
            point,
            normal: normal / n,
        })
    }

    pub fn point(&self) -> Vec3 {
        self.point
    }
    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn signed_distance(&self, pt: &Vec3) -> f64 {
        self.normal.dot(&(pt - self.point))
    }

    /// `n . x` for every `x` on the plane.
    pub fn offset(&self) -> f64 {
        self.normal.dot(&self.point)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line3D {
    point: Vec3,
    direction: Vec3,
}

impl Line3D {
    pub fn new(point: Vec3, direction: Vec3) -> Result<Self, GeomError> {
        let n = direction.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(GeomError::ZeroVector);
        }
        Ok(Self {
            point,
            direction: direction / n,
        })
    }

    pub fn point(&self) -> Vec3 {
        self.point
    }
    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.point + self.direction * t
    }

    pub fn distance_to(&self, pt: &Vec3) -> f64 {
        let v = pt - self.point;
        (v - self.direction * v.dot(&self.direction)).norm()
    }
}

/// Implicit line `a*x + b*y + c = 0` in pixel coordinates, kept in canonical
/// form: `a^2 + b^2 = 1` and the first nonzero of `(a, b)` positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line2D {
    a: f64,
    b: f64,
    c: f64,
}

impl Line2D {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, GeomError> {
        let n = a.hypot(b);
        if !(n.is_finite() && n > 0.0) || !c.is_finite() {
            return Err(GeomError::DegenerateLine);
        }
        let sign = if a > 0.0 || (a == 0.0 && b > 0.0) { 1.0 } else { -1.0 };
        let k = sign / n;
        // -0.0 would make rescaled inputs compare unequal bitwise
        let fix = |v: f64| if v == 0.0 { 0.0 } else { v };
        Ok(Self {
            a: fix(a * k),
            b: fix(b * k),
            c: fix(c * k),
        })
    }

    /// Line through two distinct pixel points.
    pub fn through(p: PixelCoord, q: PixelCoord) -> Result<Self, GeomError> {
        let d = q - p;
        Self::new(d.y, -d.x, d.x * p.y - d.y * p.x)
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn eval(&self, px: PixelCoord) -> f64 {
        self.a * px.x + self.b * px.y + self.c
    }

    /// Perpendicular distance in pixels.
    pub fn distance(&self, px: PixelCoord) -> f64 {
        self.eval(px).abs()
    }

    /// Unit direction along the line.
    pub fn direction(&self) -> PixelCoord {
        PixelCoord::new(-self.b, self.a)
    }

    /// Foot of the perpendicular from the pixel origin.
    pub fn closest_to_origin(&self) -> PixelCoord {
        PixelCoord::new(-self.a * self.c, -self.b * self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment2D {
    pub start: PixelCoord,
    pub end: PixelCoord,
}

impl Segment2D {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }

    pub fn at(&self, t: f64) -> PixelCoord {
        self.start + (self.end - self.start) * t
    }
}

/// Polar/azimuthal angles of a plane normal, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalAngles {
    pub theta: f64,
    pub phi: f64,
}

impl SphericalAngles {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }
}

pub fn pose_to_plane(pose: &SlicePose) -> Plane3D {
    Plane3D {
        point: pose.origin,
        normal: pose.normal(),
    }
}

pub fn image_to_patient(pose: &SlicePose, px: PixelCoord) -> Vec3 {
    pose.origin + pose.row_dir * (px.x * pose.spacing_x) + pose.col_dir * (px.y * pose.spacing_y)
}

/// Orthogonal projection into the slice, returned with the signed
/// out-of-plane distance in mm.
pub fn patient_to_image(pose: &SlicePose, pt: &Vec3) -> (PixelCoord, f64) {
    let v = pt - pose.origin;
    let px = PixelCoord::new(
        v.dot(&pose.row_dir) / pose.spacing_x,
        v.dot(&pose.col_dir) / pose.spacing_y,
    );
    (px, v.dot(&pose.normal()))
}

pub fn intersect_planes(p1: &Plane3D, p2: &Plane3D) -> Result<Line3D, GeomError> {
    let d = p1.normal.cross(&p2.normal);
    let cross_norm = d.norm();
    if cross_norm < PARALLEL_TOL {
        return Err(GeomError::ParallelPlanes { cross_norm });
    }
    // point on both planes with no component along d, i.e. closest to the origin
    let h1 = p1.offset();
    let h2 = p2.offset();
    let point = (p2.normal.cross(&d) * h1 + d.cross(&p1.normal) * h2) / (cross_norm * cross_norm);
    Ok(Line3D {
        point,
        direction: d / cross_norm,
    })
}

/// Projects a 3D line lying in the slice onto the slice's pixel grid.
pub fn line3d_to_line2d(line: &Line3D, pose: &SlicePose) -> Result<Line2D, GeomError> {
    let probe = pose.cols.max(pose.rows) as f64 * pose.mean_spacing();
    let (_, r0) = patient_to_image(pose, &line.point);
    let (_, r1) = patient_to_image(pose, &line.at(probe));
    let residual_mm = r0.abs().max(r1.abs());
    if residual_mm > IN_PLANE_TOL {
        return Err(GeomError::LineNotInPlane { residual_mm });
    }
    project_in_plane_line(line, pose)
}

/// Projection without the in-plane check; used on hot paths where the line
/// is known to come from an intersection with the slice plane.
pub(crate) fn project_in_plane_line(line: &Line3D, pose: &SlicePose) -> Result<Line2D, GeomError> {
    let (p, _) = patient_to_image(pose, &line.point);
    let dir = PixelCoord::new(
        line.direction.dot(&pose.row_dir) / pose.spacing_x,
        line.direction.dot(&pose.col_dir) / pose.spacing_y,
    );
    Line2D::new(dir.y, -dir.x, dir.x * p.y - dir.y * p.x)
}

/// Clips the infinite line to the image rectangle `[0, cols-1] x [0, rows-1]`.
pub fn clip_line(line: &Line2D, pose: &SlicePose) -> Option<Segment2D> {
    clip_to_rect(line, (pose.cols - 1) as f64, (pose.rows - 1) as f64)
}

/// Clips the infinite line to `[0, max_x] x [0, max_y]`.
pub fn clip_to_rect(line: &Line2D, max_x: f64, max_y: f64) -> Option<Segment2D> {
    let p0 = line.closest_to_origin();
    let d = line.direction();
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (p, dv, lo, hi) in [(p0.x, d.x, 0.0, max_x), (p0.y, d.y, 0.0, max_y)] {
        if dv.abs() < 1e-15 {
            if p < lo - CLIP_SLACK || p > hi + CLIP_SLACK {
                return None;
            }
            continue;
        }
        let (mut a, mut b) = ((lo - p) / dv, (hi - p) / dv);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        t0 = t0.max(a);
        t1 = t1.min(b);
    }
    if !(t0.is_finite() && t1.is_finite()) || t0 > t1 + CLIP_SLACK {
        return None;
    }
    if t0 > t1 {
        let mid = 0.5 * (t0 + t1);
        t0 = mid;
        t1 = mid;
    }
    let clamp = |q: PixelCoord| PixelCoord::new(q.x.clamp(0.0, max_x), q.y.clamp(0.0, max_y));
    Some(Segment2D {
        start: clamp(p0 + d * t0),
        end: clamp(p0 + d * t1),
    })
}

pub fn normal_from_angles(angles: SphericalAngles) -> Vec3 {
    let (st, ct) = angles.theta.to_radians().sin_cos();
    let (sp, cp) = angles.phi.to_radians().sin_cos();
    Vec3::new(st * cp, st * sp, ct)
}

/// Inverse of [`normal_from_angles`]; `phi` is 0 at the poles.
pub fn angles_from_normal(n: &Vec3) -> SphericalAngles {
    let rho = n.x.hypot(n.y);
    let theta = rho.atan2(n.z).to_degrees();
    if rho <= 1e-15 * n.z.abs().max(1.0) {
        return SphericalAngles { theta, phi: 0.0 };
    }
    let mut phi = n.y.atan2(n.x).to_degrees().rem_euclid(360.0);
    if phi >= 360.0 {
        phi = 0.0;
    }
    SphericalAngles { theta, phi }
}
