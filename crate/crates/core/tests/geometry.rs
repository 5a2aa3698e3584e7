mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use viewplan::geom::*;

use common::{random_pose, rng};

fn pose_strategy() -> impl Strategy<Value = SlicePose> {
    any::<u64>().prop_map(|s| random_pose(&mut rng(s)))
}

fn plane_eq(plane: &Plane3D, p: &Vec3) -> f64 {
    plane.normal().dot(p) - plane.normal().dot(&plane.point())
}

/// Intersections of a line with the four edges of `[0, w] x [0, h]`,
/// enumerated edge by edge.
fn edge_hits(a: f64, b: f64, c: f64, w: f64, h: f64) -> Vec<PixelCoord> {
    let mut pts = Vec::new();
    if b.abs() > 1e-12 {
        for x in [0.0, w] {
            let y = -(a * x + c) / b;
            if (-1e-9..=h + 1e-9).contains(&y) {
                pts.push(PixelCoord::new(x, y.clamp(0.0, h)));
            }
        }
    }
    if a.abs() > 1e-12 {
        for y in [0.0, h] {
            let x = -(b * y + c) / a;
            if (-1e-9..=w + 1e-9).contains(&x) {
                pts.push(PixelCoord::new(x.clamp(0.0, w), y));
            }
        }
    }
    pts
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn pixels_lie_on_pose_plane(pose in pose_strategy(), x in -50.0..400.0f64, y in -50.0..400.0f64) {
        let plane = pose_to_plane(&pose);
        let p = image_to_patient(&pose, PixelCoord::new(x, y));
        prop_assert!(plane_eq(&plane, &p).abs() < 1e-9);
    }

    #[test]
    fn transform_round_trip(pose in pose_strategy(), x in -50.0..400.0f64, y in -50.0..400.0f64, off in -30.0..30.0f64) {
        let px = PixelCoord::new(x, y);
        let p = image_to_patient(&pose, px) + pose.normal() * off;
        let (back, dist) = patient_to_image(&pose, &p);
        prop_assert!((back - px).norm() < 1e-9);
        prop_assert!((dist - off).abs() < 1e-9);
    }

    #[test]
    fn intersection_satisfies_both_planes(a in pose_strategy(), b in pose_strategy()) {
        let (pa, pb) = (pose_to_plane(&a), pose_to_plane(&b));
        prop_assume!(pa.normal().cross(&pb.normal()).norm() > 1e-3);
        let line = intersect_planes(&pa, &pb).unwrap();
        for k in 0..10 {
            let p = line.at(-450.0 + 100.0 * k as f64);
            prop_assert!(plane_eq(&pa, &p).abs() < 1e-9);
            prop_assert!(plane_eq(&pb, &p).abs() < 1e-9);
        }
    }

    #[test]
    fn in_plane_line_back_substitutes(pose in pose_strategy(), x0 in 0.0..200.0f64, y0 in 0.0..200.0f64, ang in 0.0..360.0f64) {
        let (s, c) = ang.to_radians().sin_cos();
        let p0 = image_to_patient(&pose, PixelCoord::new(x0, y0));
        let dir = pose.row_dir() * c + pose.col_dir() * s;
        let line3 = Line3D::new(p0, dir).unwrap();
        let l2 = line3d_to_line2d(&line3, &pose).unwrap();
        for t in [-300.0, -20.0, 0.0, 45.0, 500.0] {
            let px = l2.closest_to_origin() + l2.direction() * t;
            prop_assert!(line3.distance_to(&image_to_patient(&pose, px)) < 1e-6);
        }
    }

    #[test]
    fn clip_matches_edge_enumeration(ang in 0.0..180.0f64, c in -200.0..50.0f64, w in 1usize..300, h in 1usize..300) {
        let (s, co) = ang.to_radians().sin_cos();
        let line = Line2D::new(co, s, c).unwrap();
        let (wf, hf) = ((w - 1) as f64, (h - 1) as f64);
        let hits = edge_hits(line.a(), line.b(), line.c(), wf, hf);
        match clip_to_rect(&line, wf, hf) {
            None => prop_assert!(hits.is_empty()),
            Some(seg) => {
                prop_assert!(!hits.is_empty());
                for end in [seg.start, seg.end] {
                    let nearest = hits.iter().map(|h| (h - end).norm()).fold(f64::INFINITY, f64::min);
                    prop_assert!(nearest < 1e-9, "endpoint {:?} not among {:?}", end, hits);
                }
                let span = hits.iter().flat_map(|p| hits.iter().map(move |q| (p - q).norm())).fold(0.0, f64::max);
                prop_assert!((seg.length() - span).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn spherical_round_trip(theta in 1.0..179.0f64, phi in 0.0..360.0f64) {
        let back = angles_from_normal(&normal_from_angles(SphericalAngles::new(theta, phi)));
        prop_assert!((back.theta - theta).abs() < 1e-9);
        let dphi = (back.phi - phi).rem_euclid(360.0);
        prop_assert!(dphi.min(360.0 - dphi) < 1e-9);
    }

    #[test]
    fn line2d_is_canonical(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -100.0..100.0f64) {
        prop_assume!(a.hypot(b) > 1e-6);
        let l = Line2D::new(a, b, c).unwrap();
        prop_assert!((l.a().hypot(l.b()) - 1.0).abs() < 1e-12);
        prop_assert!(l.a() > 0.0 || (l.a() == 0.0 && l.b() > 0.0));
        let flipped = Line2D::new(-a, -b, -c).unwrap();
        prop_assert_eq!(l, flipped);
    }
}

#[test]
fn canonical_pose_planes() {
    let axial = SlicePose::new(Vec3::zeros(), Vec3::x(), Vec3::y(), 2.0, 2.0, 10, 10, 5.0).unwrap();
    let plane = pose_to_plane(&axial);
    assert_eq!(plane.point(), Vec3::zeros());
    assert_eq!(plane.normal(), Vec3::z());
    let sagittal = SlicePose::new(Vec3::zeros(), Vec3::y(), -Vec3::z(), 1.0, 1.0, 10, 10, 5.0).unwrap();
    assert_abs_diff_eq!(pose_to_plane(&sagittal).normal(), -Vec3::x(), epsilon = 1e-15);

    assert_eq!(image_to_patient(&axial, PixelCoord::new(0.0, 0.0)), Vec3::zeros());
    assert_eq!(
        image_to_patient(&axial, PixelCoord::new(3.0, 4.0)),
        Vec3::new(6.0, 8.0, 0.0)
    );
    let (px, off) = patient_to_image(&axial, &Vec3::new(6.0, 8.0, 5.0));
    assert_abs_diff_eq!(px, PixelCoord::new(3.0, 4.0), epsilon = 1e-12);
    assert_abs_diff_eq!(off, 5.0, epsilon = 1e-12);
}

#[test]
fn canonical_intersections() {
    let z0 = Plane3D::new(Vec3::zeros(), Vec3::z()).unwrap();
    let x0 = Plane3D::new(Vec3::zeros(), Vec3::x()).unwrap();
    let line = intersect_planes(&z0, &x0).unwrap();
    assert_abs_diff_eq!(line.point(), Vec3::zeros(), epsilon = 1e-15);
    assert_abs_diff_eq!(line.direction().dot(&Vec3::y()).abs(), 1.0, epsilon = 1e-15);
    assert!(matches!(
        intersect_planes(&z0, &z0),
        Err(GeomError::ParallelPlanes { .. })
    ));

    let axial = SlicePose::new(Vec3::zeros(), Vec3::x(), Vec3::y(), 1.0, 1.0, 10, 10, 5.0).unwrap();
    let y_axis = Line3D::new(Vec3::zeros(), Vec3::y()).unwrap();
    let l = line3d_to_line2d(&y_axis, &axial).unwrap();
    assert_eq!((l.a(), l.b(), l.c()), (1.0, 0.0, 0.0));
    let off = Line3D::new(Vec3::new(0.0, 0.0, 5.0), Vec3::y()).unwrap();
    assert!(matches!(
        line3d_to_line2d(&off, &axial),
        Err(GeomError::LineNotInPlane { .. })
    ));
}

#[test]
fn canonical_clips_and_angles() {
    let pose = SlicePose::new(Vec3::zeros(), Vec3::x(), Vec3::y(), 1.0, 1.0, 10, 10, 5.0).unwrap();
    let seg = clip_line(&Line2D::new(1.0, 0.0, -5.0).unwrap(), &pose).unwrap();
    let (lo, hi) = if seg.start.y < seg.end.y {
        (seg.start, seg.end)
    } else {
        (seg.end, seg.start)
    };
    assert_abs_diff_eq!(lo, PixelCoord::new(5.0, 0.0), epsilon = 1e-12);
    assert_abs_diff_eq!(hi, PixelCoord::new(5.0, 9.0), epsilon = 1e-12);
    assert!(clip_line(&Line2D::new(1.0, 0.0, 3.0).unwrap(), &pose).is_none());

    assert_abs_diff_eq!(
        normal_from_angles(SphericalAngles::new(0.0, 0.0)),
        Vec3::z(),
        epsilon = 1e-15
    );
    assert_abs_diff_eq!(
        normal_from_angles(SphericalAngles::new(90.0, 0.0)),
        Vec3::x(),
        epsilon = 1e-15
    );
}
