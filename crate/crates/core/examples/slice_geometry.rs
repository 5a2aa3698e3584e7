//! Pose algebra on two hand-built slices: pixel/patient transforms, the line
//! where the planes meet, its trace in each image and the spherical angles
//! of a normal.

use viewplan::geom::{
    angles_from_normal, clip_line, image_to_patient, intersect_planes, line3d_to_line2d, normal_from_angles,
    patient_to_image, pose_to_plane, PixelCoord, SlicePose, Vec3,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 256 x 192 axial slice at 1.34 mm, and an oblique long-axis slice
    let axial = SlicePose::new(
        Vec3::new(-170.0, -128.0, 12.0),
        Vec3::x(),
        Vec3::y(),
        1.34,
        1.34,
        256,
        192,
        6.0,
    )?;
    let tilt = 30f64.to_radians();
    let oblique = SlicePose::new(
        Vec3::new(-150.0, 0.0, 160.0),
        Vec3::new(tilt.cos(), tilt.sin(), 0.0),
        Vec3::new(0.0, 0.0, -1.0),
        1.98,
        1.98,
        176,
        192,
        6.0,
    )?;

    let px = PixelCoord::new(100.0, 50.0);
    let p = image_to_patient(&axial, px);
    let (back, off) = patient_to_image(&axial, &p);
    println!("pixel {px:?} -> patient {p:?} -> pixel {back:?} (out of plane {off:.2e} mm)");

    let line = intersect_planes(&pose_to_plane(&axial), &pose_to_plane(&oblique))?;
    println!(
        "planes meet along point {:?} direction {:?}",
        line.point(),
        line.direction()
    );

    for (name, pose) in [("axial", &axial), ("oblique", &oblique)] {
        let l2 = line3d_to_line2d(&line, pose)?;
        match clip_line(&l2, pose) {
            Some(seg) => println!(
                "{name}: {:.4} x + {:.4} y + {:.2} = 0, visible from {:?} to {:?} ({:.1} px)",
                l2.a(),
                l2.b(),
                l2.c(),
                seg.start,
                seg.end,
                seg.length()
            ),
            None => println!("{name}: line misses the image"),
        }
    }

    let n = oblique.normal();
    let angles = angles_from_normal(&n);
    println!(
        "oblique normal {n:?}: theta {:.3} deg, phi {:.3} deg, back to {:?}",
        angles.theta,
        angles.phi,
        normal_from_angles(angles)
    );
    Ok(())
}
