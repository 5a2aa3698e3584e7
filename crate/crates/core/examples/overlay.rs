//! Draws the ground-truth and prescribed intersecting lines of one target
//! over its source heatmaps as PPM images.
//!
//! cargo run --release --example overlay -- [target] [out_dir]

use std::path::PathBuf;

use viewplan::geom::{intersect_planes, line3d_to_line2d, pose_to_plane};
use viewplan::io::overlay::{render_overlay, Background, LineLabel};
use viewplan::phantom::{generate, PhantomConfig};
use viewplan::prescribe::{prescribe_target, SearchConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let target = args.next().unwrap_or_else(|| "4C".to_string());
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("viewplan_overlays"));
    std::fs::create_dir_all(&out)?;

    let exam = generate(&PhantomConfig::with_seed(1))?;
    let r = prescribe_target(
        &exam.manifest,
        &exam.labels,
        &exam.deps,
        &target,
        &SearchConfig::default(),
    )?;
    let gt = pose_to_plane(exam.manifest.view(&target).ok_or("unknown target")?.target_pose());

    for hit in &r.segments {
        let pose = &exam.manifest.view(&hit.view).expect("source").slices[hit.slice];
        let heatmap = exam.labels.heatmap(&hit.view, hit.slice, &target).expect("label");
        let mut lines = vec![(
            line3d_to_line2d(&intersect_planes(&gt, &pose_to_plane(pose))?, pose)?,
            LineLabel::Truth,
        )];
        if let Some(line) = hit.line {
            lines.push((line, LineLabel::Auto));
        }
        let img = render_overlay(Background::Raster(heatmap), &lines);
        let path = out.join(format!("{target}_{}_{:02}.ppm", hit.view, hit.slice));
        img.write_ppm(&path)?;
        let overlap = img
            .overlap_fraction()
            .map_or("-".to_string(), |f| format!("{:.0}%", f * 100.0));
        println!("{} (overlap {overlap})", path.display());
    }
    Ok(())
}
