mod common;

use std::path::PathBuf;

use rand::Rng;
use viewplan::geom::{intersect_planes, line3d_to_line2d, pose_to_plane};
use viewplan::heatmap::Heatmap;
use viewplan::io::hmap::*;
use viewplan::io::manifest::{parse_manifest, serialize_manifest};
use viewplan::io::overlay::*;
use viewplan::phantom::{generate, PhantomConfig};

use common::{data_path, golden_overlay, golden_rasters, random_heatmap, rng, sha256_hex, GOLDEN_HMAP_SHA256};

const GOLDEN_PPM_SHA256: &str = include_str!("data/golden_overlay.sha256");

fn data(name: &str) -> PathBuf {
    data_path(name)
}

#[test]
fn golden_hmap_is_stable() {
    let bytes = std::fs::read(data("golden.hmap")).unwrap();
    assert_eq!(sha256_hex(&bytes), GOLDEN_HMAP_SHA256);
    assert_eq!(encode_heatmaps(&golden_rasters()).unwrap(), bytes);
    assert_eq!(decode_heatmaps(&bytes).unwrap(), golden_rasters());
}

/// Set `VIEWPLAN_BLESS=1` to rewrite the overlay golden after an intended
/// change in rasterization.
#[test]
fn golden_overlay_is_stable() {
    let bytes = golden_overlay().to_ppm();
    let path = data("golden_overlay.ppm");
    if std::env::var_os("VIEWPLAN_BLESS").is_some() {
        std::fs::write(&path, &bytes).unwrap();
        std::fs::write(data("golden_overlay.sha256"), sha256_hex(&bytes)).unwrap();
        return;
    }
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(sha256_hex(&bytes), GOLDEN_PPM_SHA256.trim());
}

#[test]
fn hmap_round_trip_is_bit_exact() {
    let dir = tempdir("hmap_round_trip");
    let mut r = rng(17);
    for k in 0..20 {
        let (rows, cols) = (r.gen_range(1..50), r.gen_range(1..50));
        let mut maps: Vec<Heatmap> = (0..r.gen_range(1..5))
            .map(|_| random_heatmap(&mut r, rows, cols))
            .collect();
        maps[0].set(0, 0, f32::MIN_POSITIVE / 2.0);
        maps[0].set(cols - 1, rows - 1, -0.0);
        let path = dir.join(format!("{k}.hmap"));
        write_heatmaps(&path, &maps).unwrap();
        let back = read_heatmaps(&path).unwrap();
        let bits = |m: &[Heatmap]| {
            m.iter()
                .flat_map(|h| h.values().iter().map(|v| v.to_bits()))
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&back), bits(&maps));
    }
}

#[test]
fn malformed_hmap_inputs() {
    let good = encode_heatmaps(&golden_rasters()).unwrap();
    assert!(matches!(
        decode_heatmaps(&good[..good.len() - 3]),
        Err(HmapError::TruncatedPayload { .. })
    ));
    let mut bad = good.clone();
    bad[0] = b'X';
    assert!(matches!(decode_heatmaps(&bad), Err(HmapError::BadMagic)));
    let mut nan = good.clone();
    nan[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(matches!(
        decode_heatmaps(&nan),
        Err(HmapError::NonFiniteValue { channel: 0, index: 0 })
    ));
    for n in 0..HEADER_LEN {
        assert!(decode_heatmaps(&good[..n]).is_err());
    }
    let mut huge = good;
    huge[6..10].copy_from_slice(&u32::MAX.to_le_bytes());
    assert!(decode_heatmaps(&huge).is_err());
}

fn tempdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("viewplan-test-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn phantom_manifest_is_a_fixed_point() {
    for seed in 0..5 {
        let exam = generate(&PhantomConfig::with_seed(seed)).unwrap();
        let text = serialize_manifest(&exam.manifest);
        let parsed = parse_manifest(&text).unwrap();
        assert_eq!(parsed, exam.manifest);
        assert_eq!(serialize_manifest(&parsed), text);
    }
}

#[test]
fn label_dir_round_trip() {
    let exam = generate(&PhantomConfig::with_seed(6)).unwrap();
    let dir = tempdir("label_dir");
    write_label_dir(&dir, &exam.labels).unwrap();
    assert_eq!(read_label_dir(&dir, &exam.manifest, &exam.deps).unwrap(), exam.labels);

    let p2c = exam.labels.get("p2C").unwrap();
    let one_less: Vec<Heatmap> = p2c.slices[0].channels[1..].to_vec();
    write_heatmaps(&label_file(&dir, "p2C"), &one_less).unwrap();
    assert!(matches!(
        read_label_dir(&dir, &exam.manifest, &exam.deps),
        Err(HmapError::ChannelCount {
            expected: 5,
            found: 4,
            ..
        })
    ));
}

#[test]
fn overlay_of_exact_recovery_fully_overlaps() {
    let exam = generate(&PhantomConfig::with_seed(2)).unwrap();
    let gt = pose_to_plane(exam.manifest.view("4C").unwrap().target_pose());
    for view in ["p2C", "pSA"] {
        let pose = exam.manifest.view(view).unwrap().reference_slice();
        let line = line3d_to_line2d(&intersect_planes(&gt, &pose_to_plane(pose)).unwrap(), pose).unwrap();
        let img = render_overlay(
            Background::Blank {
                rows: pose.rows(),
                cols: pose.cols(),
            },
            &[(line, LineLabel::Truth), (line, LineLabel::Auto)],
        );
        assert_eq!(img.overlap_fraction(), Some(1.0));
        assert!(img.count(OVERLAP_COLOR) >= pose.rows().min(pose.cols()));
    }
}
