//! Single-source prescription: the pseudo two-chamber plane is planned
//! orthogonal to the axial stack, so finding it reduces to finding one line
//! in the axial images.
//!
//! cargo run --release --example localizer_line_search -- [seeds]

use viewplan::geom::{intersect_planes, line3d_to_line2d, pose_to_plane};
use viewplan::metrics::normal_deviation;
use viewplan::phantom::{generate, PhantomConfig};
use viewplan::prescribe::{prescribe_target, LineSearchSpace, SearchConfig, Winner};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(5);
    println!("seed  offset_px  found_px  angle_deg  found_deg  plane_dev_deg");
    for seed in 0..seeds {
        let exam = generate(&PhantomConfig::with_seed(seed))?;
        let r = prescribe_target(
            &exam.manifest,
            &exam.labels,
            &exam.deps,
            "p2C",
            &SearchConfig::default(),
        )?;
        let Winner::Line(found) = r.winner else {
            unreachable!("one source view always gives a line search")
        };

        let axial = exam.manifest.view("axial").expect("axial stack").reference_slice();
        let gt = pose_to_plane(exam.manifest.view("p2C").expect("p2C").target_pose());
        let line = line3d_to_line2d(&intersect_planes(&gt, &pose_to_plane(axial))?, axial)?;
        let (rho, angle) = LineSearchSpace::for_pose(axial).locate(&line);
        println!(
            "{seed:4}  {rho:9.2}  {:8.2}  {angle:9.2}  {:9.2}  {:13.3}",
            found.offset_px,
            found.angle_deg,
            normal_deviation(&r.plane, &gt)
        );
    }
    Ok(())
}
