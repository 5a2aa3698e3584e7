//! Renders the intersecting-line labels of a phantom exam, writes them as
//! HMAP files and reads them back.
//!
//! cargo run --release --example render_labels -- [out_dir] [alpha]

use std::path::PathBuf;

use viewplan::heatmap::{gen_labels, sigma_for_target};
use viewplan::io::hmap::{read_label_dir, write_label_dir};
use viewplan::phantom::{generate, PhantomConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("viewplan_labels"));
    let alpha: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.5);

    let exam = generate(&PhantomConfig::with_seed(7))?;
    let deps = &exam.deps;
    let labels = gen_labels(&exam.manifest, deps, alpha)?;

    for (source, view) in &labels.views {
        let pose = exam.manifest.view(source).expect("source view").reference_slice();
        println!(
            "{source}: {} slice(s) x {} channel(s)",
            view.slices.len(),
            view.targets.len()
        );
        for target in &view.targets {
            let target_pose = exam.manifest.view(target).expect("target view").target_pose();
            let sigma = sigma_for_target(target_pose, pose, alpha);
            let mid = &view.slices[view.slices.len() / 2];
            let h = &mid.channels[view.channel_index(target).expect("channel")];
            let peak = h.values().iter().fold(0.0f32, |m, v| m.max(*v));
            let lit = h.values().iter().filter(|v| **v > 0.5).count();
            println!("  -> {target:4} sigma {sigma:5.2} px, peak {peak:.3}, {lit} px above 0.5");
        }
    }

    write_label_dir(&out, &labels)?;
    let back = read_label_dir(&out, &exam.manifest, deps)?;
    assert_eq!(back, labels);
    println!("wrote and re-read {}", out.display());
    Ok(())
}
