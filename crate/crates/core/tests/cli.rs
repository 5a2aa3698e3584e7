mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use viewplan::heatmap::Heatmap;
use viewplan::io::hmap::{read_heatmaps, read_label_dir, write_heatmaps};
use viewplan::io::report::read_planes;
use viewplan::phantom::{generate, PhantomConfig};
use viewplan::workflow::{cmd_loss, read_manifest, write_manifest, LABEL_DIR, MANIFEST_FILE, PLANES_FILE};

fn tempdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("viewplan-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn viewplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viewplan"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn phantom(dir: &Path, seed: u64) -> PathBuf {
    let out = viewplan(&["phantom", "--seed", &seed.to_string(), "--out", s(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join(MANIFEST_FILE)
}

fn prescribe(manifest: &Path, labels: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "prescribe",
        "--manifest",
        s(manifest),
        "--labels",
        s(labels),
        "--out",
        s(out),
    ];
    args.extend_from_slice(extra);
    viewplan(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn pipeline_composes_and_reruns_are_identical() {
    let dir = tempdir("pipeline");
    let manifest = phantom(&dir.join("exam"), 3);

    let labels = dir.join("labels");
    let out = viewplan(&["gen-labels", "--manifest", s(&manifest), "--out", s(&labels)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let loss = cmd_loss(&dir.join("exam").join(LABEL_DIR), &labels).unwrap();
    assert!(loss.iter().all(|(_, l)| *l == 0.0), "{loss:?}");

    let targets = ["--target", "4C", "--target", "SAX"];
    let a = prescribe(&manifest, &labels, &dir.join("a"), &targets);
    assert!(a.status.success(), "{}", stderr(&a));
    let b = prescribe(
        &manifest,
        &labels,
        &dir.join("b"),
        &[&targets[..], &["--no-overlays"]].concat(),
    );
    assert!(b.status.success());
    let pa = std::fs::read(dir.join("a").join(PLANES_FILE)).unwrap();
    assert_eq!(pa, std::fs::read(dir.join("b").join(PLANES_FILE)).unwrap());
    assert!(dir.join("a/overlays/4C_p2C_00.ppm").exists());
    assert!(!dir.join("b/overlays").exists());

    let planes = dir.join("a").join(PLANES_FILE);
    let report = dir.join("report.json");
    let out = viewplan(&[
        "evaluate",
        "--planes",
        s(&planes),
        "--manifest",
        s(&manifest),
        "--out",
        s(&report),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let cases = json["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 2);
    for c in cases {
        assert!(c["normal_deviation_deg"].as_f64().unwrap() <= 1.5, "{c}");
    }
    let csv = viewplan(&[
        "evaluate",
        "--planes",
        s(&planes),
        "--manifest",
        s(&manifest),
        "--format",
        "csv",
    ]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("exam,target,normal_deviation_deg,point_to_plane_mm"));
}

#[test]
fn ground_truth_scores_zero() {
    let dir = tempdir("gt_zero");
    let manifest = phantom(&dir, 4);
    let gt = dir.join("ground_truth.json");
    let out = viewplan(&["evaluate", "--planes", s(&gt), "--manifest", s(&manifest)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for c in json["cases"].as_array().unwrap() {
        assert!(c["normal_deviation_deg"].as_f64().unwrap() < 1e-6, "{c}");
        assert!(c["point_to_plane_mm"].as_f64().unwrap() < 1e-9, "{c}");
    }
}

#[test]
fn loss_of_identical_dirs_is_zero_and_matches_mse() {
    let dir = tempdir("loss");
    let (a, b) = (dir.join("a"), dir.join("b"));
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    let mut r = common::rng(5);
    let t: Vec<Heatmap> = (0..3).map(|_| common::random_heatmap(&mut r, 7, 9)).collect();
    let p: Vec<Heatmap> = (0..3).map(|_| common::random_heatmap(&mut r, 7, 9)).collect();
    write_heatmaps(&a.join("v.hmap"), &t).unwrap();
    write_heatmaps(&b.join("v.hmap"), &p).unwrap();

    let same = cmd_loss(&a, &a).unwrap();
    assert!(same.iter().all(|(_, l)| *l == 0.0));

    let mut sum = 0.0f64;
    for (x, y) in t.iter().zip(&p) {
        for (u, v) in x.values().iter().zip(y.values()) {
            sum += (*u as f64 - *v as f64).powi(2);
        }
    }
    let expected = sum / (3.0 * 63.0);
    let got = cmd_loss(&a, &b).unwrap();
    assert!((got[0].1 - expected).abs() < 1e-12, "{} vs {expected}", got[0].1);
    assert_eq!(got[1].0, "mean");

    let out = viewplan(&["loss", "--truth", s(&a), "--pred", s(&b)]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("v.hmap\t"));
}

#[test]
fn missing_view_exits_2() {
    let dir = tempdir("missing");
    let manifest = phantom(&dir, 1);
    let mut exam = read_manifest(&manifest).unwrap();
    exam.views.retain(|v| v.id != "pSA");
    write_manifest(&manifest, &exam).unwrap();
    let out = viewplan(&["gen-labels", "--manifest", s(&manifest), "--out", s(&dir.join("l"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("MissingView"), "{}", stderr(&out));

    let out = prescribe(&manifest, &dir.join(LABEL_DIR), &dir.join("p"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("MissingView"), "{}", stderr(&out));
}

#[test]
fn parallel_dependency_exits_3() {
    let dir = tempdir("parallel");
    let manifest = phantom(&dir, 1);
    let mut exam = read_manifest(&manifest).unwrap();
    let psa = exam.view("pSA").unwrap().slices[0].clone();
    let four = exam.views.iter_mut().find(|v| v.id == "4C").unwrap();
    four.slices = vec![psa.translated(psa.normal() * 30.0)];
    write_manifest(&manifest, &exam).unwrap();
    let out = viewplan(&["gen-labels", "--manifest", s(&manifest), "--out", s(&dir.join("l"))]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn bad_requests_exit_2() {
    let dir = tempdir("bad");
    let manifest = phantom(&dir.join("one"), 1);
    let other = phantom(&dir.join("two"), 2);
    let labels = dir.join("one").join(LABEL_DIR);

    let out = prescribe(&manifest, &labels, &dir.join("p"), &["--target", "5C"]);
    assert_eq!(out.status.code(), Some(2));

    let out = prescribe(&manifest, &labels, &dir.join("p"), &["--target", "SAX", "--beam", "0"]);
    assert_eq!(out.status.code(), Some(2));

    let gt = dir.join("one/ground_truth.json");
    let out = viewplan(&["evaluate", "--planes", s(&gt), "--manifest", s(&other)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("mismatch"));

    let out = viewplan(&[
        "gen-labels",
        "--manifest",
        s(&dir.join("nope.json")),
        "--out",
        s(&dir.join("x")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(dir.join("broken.json"), "{\"exam_id\": 3}").unwrap();
    let out = viewplan(&[
        "gen-labels",
        "--manifest",
        s(&dir.join("broken.json")),
        "--out",
        s(&dir.join("x")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_labels_are_flagged_degenerate() {
    let dir = tempdir("zeros");
    let manifest = phantom(&dir, 8);
    let labels = dir.join(LABEL_DIR);
    for entry in std::fs::read_dir(&labels).unwrap() {
        let path = entry.unwrap().path();
        let zeros: Vec<Heatmap> = read_heatmaps(&path)
            .unwrap()
            .iter()
            .map(|h| Heatmap::zeros(h.rows(), h.cols()))
            .collect();
        write_heatmaps(&path, &zeros).unwrap();
    }
    let out = prescribe(&manifest, &labels, &dir.join("p"), &["--target", "3C", "--no-overlays"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let planes = read_planes(&dir.join("p").join(PLANES_FILE)).unwrap();
    assert_eq!(planes.planes.len(), 1);
    assert!(planes.planes[0].degenerate);
    assert_eq!(planes.planes[0].score, 0.0);
}

#[test]
fn phantom_output_is_deterministic() {
    let dir = tempdir("phantom_det");
    phantom(&dir.join("a"), 11);
    phantom(&dir.join("b"), 11);
    for file in [
        "manifest.json",
        "ground_truth.json",
        "phantom.json",
        "labels/p2C.hmap",
        "labels/pSA.hmap",
    ] {
        assert_eq!(
            std::fs::read(dir.join("a").join(file)).unwrap(),
            std::fs::read(dir.join("b").join(file)).unwrap(),
            "{file}"
        );
    }
    let exam = generate(&PhantomConfig::with_seed(11)).unwrap();
    let manifest = read_manifest(&dir.join("a").join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest, exam.manifest);
    let labels = read_label_dir(&dir.join("a").join(LABEL_DIR), &manifest, &exam.deps).unwrap();
    assert_eq!(labels, exam.labels);
}
