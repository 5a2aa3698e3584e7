//! Effect of the label kernel width on prescription from noisy labels.
//!
//! cargo run --release --example kernel_size_sweep -- [seeds] [noise_std]

use viewplan::metrics::evaluate;
use viewplan::phantom::{generate, NoiseConfig, PhantomConfig};
use viewplan::prescribe::{prescribe_target, SearchConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let std: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.1);
    let config = SearchConfig::default();

    println!("alpha  dev_deg  dist_mm");
    for alpha in [0.25, 0.5, 1.0, 2.0] {
        let (mut dev, mut dist, mut n) = (0.0, 0.0, 0.0);
        for seed in 0..seeds {
            let mut pc = PhantomConfig::with_seed(seed);
            pc.alpha = alpha;
            pc.noise = NoiseConfig { std, blur_radius: 0 };
            let exam = generate(&pc)?;
            let labels = exam.noisy_labels.as_ref().expect("noise configured");
            for target in ["2C", "3C", "4C", "SAX"] {
                let r = prescribe_target(&exam.manifest, labels, &exam.deps, target, &config)?;
                let m = evaluate(&r.plane, exam.manifest.view(target).expect("target").target_pose());
                dev += m.normal_deviation_deg;
                dist += m.point_to_plane_mm;
                n += 1.0;
            }
        }
        println!("{alpha:5}  {:7.3}  {:7.3}", dev / n, dist / n);
    }
    Ok(())
}
