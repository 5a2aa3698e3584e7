//! Per-view and overall accuracy over several phantom exams, in the layout
//! of a results table, plus the CSV report.
//!
//! cargo run --release --example evaluate_report -- [seeds]

use viewplan::io::report::{metrics_csv, CaseRow};
use viewplan::metrics::{aggregate, evaluate};
use viewplan::phantom::{generate, PhantomConfig};
use viewplan::prescribe::{prescribe_target, SearchConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3);
    let mut rows = Vec::new();
    let mut cases = Vec::new();
    for seed in 0..seeds {
        let exam = generate(&PhantomConfig::with_seed(seed))?;
        for target in ["2C", "3C", "4C", "SAX"] {
            let r = prescribe_target(
                &exam.manifest,
                &exam.labels,
                &exam.deps,
                target,
                &SearchConfig::default(),
            )?;
            let m = evaluate(&r.plane, exam.manifest.view(target).expect("target").target_pose());
            rows.push(CaseRow::new(&exam.manifest.exam_id, target, m));
            cases.push((target, m));
        }
    }

    let report = aggregate(&cases)?;
    println!(
        "{:6} {:>22} {:>22}",
        "view", "normal deviation (deg)", "point-to-plane (mm)"
    );
    for g in &report.groups {
        println!(
            "{:6} {:>14.2} +- {:<5.2} {:>14.2} +- {:<5.2}",
            g.group,
            g.normal_deviation_deg.mean,
            g.normal_deviation_deg.std,
            g.point_to_plane_mm.mean,
            g.point_to_plane_mm.std
        );
    }
    println!(
        "{:6} {:>14.2} +- {:<5.2} {:>14.2} +- {:<5.2}",
        "mean",
        report.overall_normal_deviation_deg.mean,
        report.overall_normal_deviation_deg.std,
        report.overall_point_to_plane_mm.mean,
        report.overall_point_to_plane_mm.std
    );
    println!();
    print!("{}", metrics_csv(&rows)?);
    Ok(())
}
