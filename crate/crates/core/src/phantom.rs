//! Synthetic exams with known ground truth.
//!
//! A phantom is geometry only: a random left-ventricular long axis, the
//! localizers and standard views placed around it the way the planning
//! protocol places them, and labels rendered from the exact intersections.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{self, Plane3D, SlicePose, Vec3};
use crate::heatmap::{gen_labels, DependencyMap, Heatmap, LabelError, LabelSet};
use crate::io::manifest::{ExamManifest, ManifestError, View, ViewRole};

/// Draws rejected before giving up.
pub const MAX_ATTEMPTS: usize = 100;
/// Smallest angle allowed between any source and target plane.
pub const MIN_PAIR_ANGLE_DEG: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewGeometry {
    pub slices: usize,
    pub rows: usize,
    pub cols: usize,
    pub spacing_mm: f64,
    pub thickness_mm: f64,
    /// Center-to-center distance between stacked slices.
    pub interval_mm: f64,
}

impl ViewGeometry {
    const fn single(rows: usize, cols: usize, spacing_mm: f64, thickness_mm: f64) -> Self {
        Self {
            slices: 1,
            rows,
            cols,
            spacing_mm,
            thickness_mm,
            interval_mm: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Standard deviation of additive Gaussian noise.
    pub std: f64,
    /// Box blur radius in pixels, 0 for none.
    pub blur_radius: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomConfig {
    pub seed: u64,
    pub axial: ViewGeometry,
    pub p2c: ViewGeometry,
    pub p4c: ViewGeometry,
    pub psa: ViewGeometry,
    pub two_chamber: ViewGeometry,
    pub three_chamber: ViewGeometry,
    pub four_chamber: ViewGeometry,
    pub sax: ViewGeometry,
    /// Half-range of the random rotation about each patient axis applied
    /// to the nominal long axis.
    pub axis_rotation_deg: f64,
    pub alpha: f64,
    /// Plan p4C from p2C alone and pSA from p2C and p4C.
    pub alternative_protocol: bool,
    pub noise: NoiseConfig,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            axial: ViewGeometry {
                slices: 30,
                rows: 192,
                cols: 256,
                spacing_mm: 1.34,
                thickness_mm: 6.0,
                interval_mm: 6.0,
            },
            p2c: ViewGeometry::single(192, 176, 1.98, 6.0),
            p4c: ViewGeometry::single(160, 192, 1.77, 6.0),
            psa: ViewGeometry {
                slices: 8,
                rows: 192,
                cols: 176,
                spacing_mm: 1.88,
                thickness_mm: 6.0,
                interval_mm: 12.0,
            },
            two_chamber: ViewGeometry::single(192, 156, 1.80, 7.0),
            three_chamber: ViewGeometry::single(170, 173, 1.67, 7.0),
            four_chamber: ViewGeometry::single(155, 192, 1.72, 7.0),
            sax: ViewGeometry::single(192, 161, 1.85, 7.0),
            axis_rotation_deg: 30.0,
            alpha: crate::heatmap::DEFAULT_ALPHA,
            alternative_protocol: false,
            noise: NoiseConfig::default(),
        }
    }
}

impl PhantomConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn dependency_map(&self) -> DependencyMap {
        if self.alternative_protocol {
            DependencyMap::alternative_protocol()
        } else {
            DependencyMap::protocol()
        }
    }

    fn validate(&self) -> Result<(), PhantomError> {
        for g in [
            &self.axial,
            &self.p2c,
            &self.p4c,
            &self.psa,
            &self.two_chamber,
            &self.three_chamber,
            &self.four_chamber,
            &self.sax,
        ] {
            if g.slices == 0 || g.rows < 2 || g.cols < 2 || !positive(g.spacing_mm) || !positive(g.thickness_mm) {
                return Err(PhantomError::InvalidConfig(format!("view geometry {g:?}")));
            }
        }
        if !positive(self.alpha) {
            return Err(PhantomError::InvalidConfig(format!("alpha {}", self.alpha)));
        }
        if !(self.noise.std.is_finite() && self.noise.std >= 0.0) {
            return Err(PhantomError::InvalidConfig(format!("noise std {}", self.noise.std)));
        }
        if !(0.0..90.0).contains(&self.axis_rotation_deg) {
            return Err(PhantomError::InvalidConfig(format!(
                "axis rotation {}",
                self.axis_rotation_deg
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("invalid phantom configuration: {0}")]
    InvalidConfig(String),
    #[error("no admissible geometry after {0} attempts")]
    DegenerateGeometry(usize),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Labels(#[from] LabelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomExam {
    pub manifest: ExamManifest,
    pub deps: DependencyMap,
    /// Ground-truth plane of every view, keyed by view id.
    pub gt_planes: BTreeMap<String, Plane3D>,
    pub labels: LabelSet,
    /// Present when the configuration asks for noise or blur.
    pub noisy_labels: Option<LabelSet>,
    /// Center of the simulated ventricle.
    pub heart_center: Vec3,
    /// Unit long axis, base to apex.
    pub long_axis: Vec3,
}

/// Rotates `v` about unit `axis` by `deg` degrees.
fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn rotate(v: Vec3, axis: Vec3, deg: f64) -> Vec3 {
    let (s, c) = deg.to_radians().sin_cos();
    v * c + axis.cross(&v) * s + axis * axis.dot(&v) * (1.0 - c)
}

fn unit_perpendicular(rng: &mut ChaCha8Rng, to: Vec3) -> Vec3 {
    let helper = if to.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let a = to.cross(&helper).normalize();
    let b = to.cross(&a);
    let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    a * t.cos() + b * t.sin()
}

/// Pose of `g` centered on `center`, columns running along `col_hint`
/// projected into the plane.
fn pose_at(center: Vec3, normal: Vec3, col_hint: Vec3, g: &ViewGeometry) -> SlicePose {
    let n = normal.normalize();
    let mut hint = col_hint - n * col_hint.dot(&n);
    if hint.norm() < 1e-3 {
        let alt = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        hint = alt - n * alt.dot(&n);
    }
    let col = hint.normalize();
    let row = col.cross(&n);
    let origin =
        center - row * ((g.cols - 1) as f64 / 2.0 * g.spacing_mm) - col * ((g.rows - 1) as f64 / 2.0 * g.spacing_mm);
    SlicePose::new(
        origin,
        row,
        col,
        g.spacing_mm,
        g.spacing_mm,
        g.cols,
        g.rows,
        g.thickness_mm,
    )
    .expect("orthonormal by construction")
}

/// Stack of `g.slices` parallel poses whose centers step along the normal.
fn stack_at(center: Vec3, normal: Vec3, col_hint: Vec3, g: &ViewGeometry) -> Vec<SlicePose> {
    let n = normal.normalize();
    let mid = pose_at(center, n, col_hint, g);
    (0..g.slices)
        .map(|k| {
            let shift = (k as f64 - (g.slices - 1) as f64 / 2.0) * g.interval_mm;
            mid.translated(n * shift)
        })
        .collect()
}

struct Draw {
    views: Vec<View>,
    center: Vec3,
    axis: Vec3,
}

fn draw_geometry(config: &PhantomConfig, rng: &mut ChaCha8Rng) -> Option<Draw> {
    let r = config.axis_rotation_deg;
    let mut angle = |lo: f64, hi: f64| if hi > lo { rng.gen_range(lo..hi) } else { lo };

    let center = Vec3::new(angle(-20.0, 20.0), angle(-20.0, 20.0), angle(-20.0, 20.0));
    // base-to-apex direction: towards patient left, anterior and inferior
    let nominal = Vec3::new(0.55, -0.45, -0.70).normalize();
    let (ax, ay, az) = (angle(-r, r), angle(-r, r), angle(-r, r));
    let u = rotate(rotate(rotate(nominal, Vec3::x(), ax), Vec3::y(), ay), Vec3::z(), az).normalize();
    if u.z.abs() > (15f64).to_radians().cos() {
        return None;
    }

    // p2C: contains the long axis, orthogonal to the axial slices
    let n2 = Vec3::z().cross(&u).normalize();
    let side = n2.cross(&u);
    let lax_normal = |psi: f64| n2 * psi.to_radians().cos() + u.cross(&n2) * psi.to_radians().sin();

    let psi2 = angle(-10.0, 10.0);
    let psi3 = psi2 + angle(30.0, 45.0);
    let psi4 = psi2 + angle(65.0, 85.0);
    let tau = angle(-15.0, 15.0);
    let delta = angle(3.0, 8.0);
    let psi_p4 = psi4 + angle(-10.0, 10.0);
    let sax_offset = angle(10.0, 25.0);
    let axial_shift = Vec3::new(angle(-15.0, 15.0), angle(-15.0, 15.0), angle(-20.0, 20.0));

    let (psa_normal, p4c_normal) = if config.alternative_protocol {
        // p4C orthogonal to p2C through a slightly tilted in-plane axis;
        // pSA tilted off the long axis in a random direction
        let axis = u * delta.to_radians().cos() + side * delta.to_radians().sin();
        let p4c = axis.cross(&n2).normalize();
        let tilt_axis = unit_perpendicular(rng, u);
        (rotate(u, tilt_axis, tau), p4c)
    } else {
        // pSA orthogonal to p2C; p4C through a tilted copy of the long axis
        let psa = u * tau.to_radians().cos() + side * tau.to_radians().sin();
        let tilt_axis = unit_perpendicular(rng, u);
        let axis = rotate(u, tilt_axis, delta).normalize();
        let m = (n2 - axis * n2.dot(&axis)).normalize();
        let k = axis.cross(&m);
        let p4c = m * psi_p4.to_radians().cos() + k * psi_p4.to_radians().sin();
        (psa, p4c)
    };

    let down = -Vec3::z();
    let mut axial = pose_at(center + axial_shift, Vec3::z(), Vec3::y(), &config.axial);
    // standard radiological axial orientation
    axial = SlicePose::new(
        axial.origin(),
        Vec3::x(),
        Vec3::y(),
        axial.spacing_x(),
        axial.spacing_y(),
        axial.cols(),
        axial.rows(),
        axial.thickness(),
    )
    .expect("axis aligned");
    let axial_stack: Vec<SlicePose> = (0..config.axial.slices)
        .map(|k| {
            let shift = (k as f64 - (config.axial.slices - 1) as f64 / 2.0) * config.axial.interval_mm;
            axial.translated(Vec3::z() * shift)
        })
        .collect();

    let view = |id: ViewRole, slices: Vec<SlicePose>| View {
        id: id.as_str().to_string(),
        role: id,
        slices,
    };
    let views = vec![
        view(ViewRole::Axial, axial_stack),
        view(ViewRole::Pseudo2C, vec![pose_at(center, n2, u, &config.p2c)]),
        view(ViewRole::Pseudo4C, vec![pose_at(center, p4c_normal, u, &config.p4c)]),
        view(ViewRole::PseudoSax, stack_at(center, psa_normal, down, &config.psa)),
        view(
            ViewRole::TwoChamber,
            vec![pose_at(center, lax_normal(psi2), u, &config.two_chamber)],
        ),
        view(
            ViewRole::ThreeChamber,
            vec![pose_at(center, lax_normal(psi3), u, &config.three_chamber)],
        ),
        view(
            ViewRole::FourChamber,
            vec![pose_at(center, lax_normal(psi4), u, &config.four_chamber)],
        ),
        view(
            ViewRole::ShortAxis,
            vec![pose_at(center - u * sax_offset, u, down, &config.sax)],
        ),
    ];
    Some(Draw { views, center, axis: u })
}

fn admissible(views: &[View], deps: &DependencyMap) -> bool {
    let min_sin = MIN_PAIR_ANGLE_DEG.to_radians().sin();
    let find = |id: &str| views.iter().find(|v| v.id == id).expect("all roles present");
    deps.entries().iter().all(|(target, sources)| {
        let nt = find(target).target_pose().normal();
        let ok_targets = sources
            .iter()
            .all(|s| find(s).slices[0].normal().cross(&nt).norm() >= min_sin);
        let ok_anchor = sources.len() < 2 || {
            let a = find(&sources[0]).slices[0].normal();
            let b = find(&sources[1]).slices[0].normal();
            a.cross(&b).norm() >= min_sin
        };
        ok_targets && ok_anchor
    })
}

/// Builds a phantom exam; deterministic in the configuration.
pub fn generate(config: &PhantomConfig) -> Result<PhantomExam, PhantomError> {
    config.validate()?;
    let deps = config.dependency_map();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let draw = (0..MAX_ATTEMPTS)
        .find_map(|_| draw_geometry(config, &mut rng).filter(|d| admissible(&d.views, &deps)))
        .ok_or(PhantomError::DegenerateGeometry(MAX_ATTEMPTS))?;

    let gt_planes = draw
        .views
        .iter()
        .map(|v| (v.id.clone(), geom::pose_to_plane(v.target_pose())))
        .collect();
    let manifest = ExamManifest::new(format!("phantom-{}", config.seed), draw.views, Some(deps.clone()))?;
    let labels = gen_labels(&manifest, &deps, config.alpha)?;
    let noisy_labels =
        (config.noise.std > 0.0 || config.noise.blur_radius > 0).then(|| corrupt(&labels, &config.noise, config.seed));
    Ok(PhantomExam {
        manifest,
        deps,
        gt_planes,
        labels,
        noisy_labels,
        heart_center: draw.center,
        long_axis: draw.axis,
    })
}

/// Adds seeded Gaussian noise to every raster, clips to `[0, 1]` and
/// optionally box-blurs.
pub fn corrupt(labels: &LabelSet, noise: &NoiseConfig, seed: u64) -> LabelSet {
    let views: Vec<&str> = labels.views.keys().map(String::as_str).collect();
    corrupt_views(labels, &views, noise, seed)
}

/// Like [`corrupt`], restricted to the listed source views.
pub fn corrupt_views(labels: &LabelSet, views: &[&str], noise: &NoiseConfig, seed: u64) -> LabelSet {
    let mut out = labels.clone();
    if noise.std == 0.0 && noise.blur_radius == 0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.std).expect("std validated non-negative");
    for (id, view) in out.views.iter_mut() {
        if !views.contains(&id.as_str()) {
            continue;
        }
        for slice in &mut view.slices {
            for h in &mut slice.channels {
                if noise.std > 0.0 {
                    for v in h.values_mut() {
                        let n: f64 = normal.sample(&mut rng);
                        *v = (f64::from(*v) + n).clamp(0.0, 1.0) as f32;
                    }
                }
                if noise.blur_radius > 0 {
                    *h = box_blur(h, noise.blur_radius);
                }
            }
        }
    }
    out
}

/// Separable box filter with edge clamping.
fn box_blur(h: &Heatmap, radius: usize) -> Heatmap {
    let (rows, cols) = (h.rows(), h.cols());
    let r = radius as isize;
    let width = (2 * radius + 1) as f64;
    let pass = |get: &dyn Fn(usize, usize) -> f64, along_x: bool| {
        let mut out = vec![0.0f64; rows * cols];
        for y in 0..rows {
            for x in 0..cols {
                let mut acc = 0.0;
                for d in -r..=r {
                    let (xx, yy) = if along_x {
                        ((x as isize + d).clamp(0, cols as isize - 1) as usize, y)
                    } else {
                        (x, (y as isize + d).clamp(0, rows as isize - 1) as usize)
                    };
                    acc += get(xx, yy);
                }
                out[y * cols + x] = acc / width;
            }
        }
        out
    };
    let tmp = pass(&|x, y| f64::from(h.get(x, y)), true);
    let done = pass(&|x, y| tmp[y * cols + x], false);
    Heatmap::from_vec(rows, cols, done.into_iter().map(|v| v as f32).collect()).expect("same extent")
}
