#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viewplan::geom::{SlicePose, Vec3};
use viewplan::heatmap::Heatmap;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Random orthonormal slice with anisotropic spacing.
pub fn random_pose(rng: &mut ChaCha8Rng) -> SlicePose {
    let row = unit(rng);
    let col = loop {
        let c = unit(rng);
        let c = c - row * row.dot(&c);
        if c.norm() > 0.2 {
            break c.normalize();
        }
    };
    let origin = Vec3::new(
        rng.gen_range(-200.0..200.0),
        rng.gen_range(-200.0..200.0),
        rng.gen_range(-200.0..200.0),
    );
    SlicePose::new(
        origin,
        row,
        col,
        rng.gen_range(0.5..3.0),
        rng.gen_range(0.5..3.0),
        rng.gen_range(16..300),
        rng.gen_range(16..300),
        rng.gen_range(1.0..10.0),
    )
    .expect("orthonormal")
}

pub fn random_heatmap(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Heatmap {
    Heatmap::from_fn(rows, cols, |_, _| rng.gen_range(0.0f32..1.0))
}

/// Axis-aligned pose in the z = `z` plane.
pub fn axial(cols: usize, rows: usize, spacing: f64, z: f64) -> SlicePose {
    SlicePose::new(
        Vec3::new(0.0, 0.0, z),
        Vec3::x(),
        Vec3::y(),
        spacing,
        spacing,
        cols,
        rows,
        6.0,
    )
    .unwrap()
}

pub const GOLDEN_HMAP_SHA256: &str = "7b6b16985154d333466a5b5e595ddac1e2a0d7bc9a0f515d67e28f9335ff1c38";

pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// The rasters stored in `golden.hmap`.
pub fn golden_rasters() -> Vec<Heatmap> {
    vec![
        Heatmap::from_fn(3, 4, |x, y| (x * 10 + y) as f32 * 0.125),
        Heatmap::from_fn(3, 4, |x, y| {
            -((x + 2 * y) as f32) / 4.0 + if x == y { 0.5 } else { 0.0 }
        }),
    ]
}

/// The image stored in `golden_overlay.ppm`.
pub fn golden_overlay() -> viewplan::io::overlay::Overlay {
    use viewplan::geom::{Line2D, PixelCoord};
    use viewplan::io::overlay::{render_overlay, Background, LineLabel};
    let bg = Heatmap::from_fn(12, 16, |x, y| ((x + y) % 5) as f32);
    let truth = Line2D::through(PixelCoord::new(0.0, 2.0), PixelCoord::new(15.0, 9.0)).unwrap();
    let auto = Line2D::through(PixelCoord::new(0.0, 2.4), PixelCoord::new(15.0, 8.6)).unwrap();
    let steep = Line2D::through(PixelCoord::new(3.0, 0.0), PixelCoord::new(5.0, 11.0)).unwrap();
    render_overlay(
        Background::Raster(&bg),
        &[
            (truth, LineLabel::Truth),
            (auto, LineLabel::Auto),
            (steep, LineLabel::Auto),
        ],
    )
}
