use viewplan::heatmap::gen_labels;
use viewplan::io::hmap::encode_heatmaps;
use viewplan::phantom::{generate, PhantomConfig};
use viewplan::prescribe::{prescribe_target, PrescriptionResult, SearchConfig};

fn run_in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn bits(r: &PrescriptionResult) -> Vec<u64> {
    let (p, n) = (r.plane.point(), r.plane.normal());
    [p.x, p.y, p.z, n.x, n.y, n.z, r.score]
        .iter()
        .map(|v| v.to_bits())
        .collect()
}

#[test]
fn thread_count_does_not_change_results() {
    let exam = generate(&PhantomConfig::with_seed(9)).unwrap();
    let labels = |threads| {
        run_in_pool(threads, || {
            let set = gen_labels(&exam.manifest, &exam.deps, 0.5).unwrap();
            set.views
                .values()
                .map(|v| {
                    encode_heatmaps(&v.slices.iter().flat_map(|s| s.channels.clone()).collect::<Vec<_>>()).unwrap()
                })
                .collect::<Vec<_>>()
        })
    };
    assert_eq!(labels(1), labels(4));

    let config = SearchConfig::default();
    for target in ["p2C", "4C", "SAX"] {
        let run = |threads| {
            run_in_pool(threads, || {
                prescribe_target(&exam.manifest, &exam.labels, &exam.deps, target, &config).unwrap()
            })
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(bits(&a), bits(&b), "{target}");
        assert_eq!(a.visited, b.visited);
        assert_eq!(a.level_scores, b.level_scores);
    }
}
