//! Multi-view aggregation against two-view subsets for the three-chamber
//! plane, with one source view's labels corrupted at a time.
//!
//! cargo run --release --example multiview_ablation -- [seeds] [noise_std]

use viewplan::geom::pose_to_plane;
use viewplan::heatmap::DependencyMap;
use viewplan::metrics::normal_deviation;
use viewplan::phantom::{corrupt_views, generate, NoiseConfig, PhantomConfig};
use viewplan::prescribe::{prescribe_target, SearchConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let std: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.3);
    let noise = NoiseConfig { std, blur_radius: 0 };
    let views = ["p2C", "p4C", "pSA"];
    let subsets: [&[&str]; 4] = [&views, &["p2C", "p4C"], &["p2C", "pSA"], &["p4C", "pSA"]];
    let config = SearchConfig::default();

    println!("noisy  full   p2C+p4C  p2C+pSA  p4C+pSA   (mean 3C deviation, deg)");
    for bad in views {
        let mut means = [0.0; 4];
        for seed in 0..seeds {
            let exam = generate(&PhantomConfig::with_seed(seed))?;
            let labels = corrupt_views(&exam.labels, &[bad], &noise, 1000 + seed);
            let gt = pose_to_plane(exam.manifest.view("3C").expect("3C").target_pose());
            for (k, set) in subsets.iter().enumerate() {
                let deps = DependencyMap::new([("3C", set.to_vec())])?;
                let r = prescribe_target(&exam.manifest, &labels, &deps, "3C", &config)?;
                means[k] += normal_deviation(&r.plane, &gt) / seeds as f64;
            }
        }
        println!(
            "{bad:5}  {:5.2}  {:7.2}  {:7.2}  {:7.2}",
            means[0], means[1], means[2], means[3]
        );
    }
    Ok(())
}
