//! Closed loop on a synthetic exam: generate, prescribe every standard view
//! from clean labels and compare with ground truth.
//!
//! cargo run --release --example prescribe_phantom -- [seed] [count]

use std::time::Instant;

use viewplan::metrics::evaluate;
use viewplan::phantom::{generate, PhantomConfig};
use viewplan::prescribe::{prescribe_target, SearchConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let count: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let config = SearchConfig::default();

    println!("seed  target  dev_deg  dist_mm  spacing_mm  secs");
    for seed in seed..seed + count {
        let exam = generate(&PhantomConfig::with_seed(seed))?;
        for target in ["2C", "3C", "4C", "SAX"] {
            let t0 = Instant::now();
            let r = prescribe_target(&exam.manifest, &exam.labels, &exam.deps, target, &config)?;
            let secs = t0.elapsed().as_secs_f64();
            let gt = exam.manifest.view(target).expect("standard view").target_pose();
            let m = evaluate(&r.plane, gt);
            let host = &exam.deps.sources_of(target).expect("target")[0];
            let spacing = exam
                .manifest
                .view(host)
                .expect("source")
                .reference_slice()
                .mean_spacing();
            println!(
                "{seed:4}  {target:6}  {:7.3}  {:7.3}  {spacing:10.2}  {secs:.2}",
                m.normal_deviation_deg, m.point_to_plane_mm
            );
        }
    }
    Ok(())
}
