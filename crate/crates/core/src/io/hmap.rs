//! `HMAP` raster container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "HMAP"
//! 4       2     version (u16, currently 1)
//! 6       4     rows (u32)
//! 10      4     cols (u32)
//! 14      4     channels (u32)
//! 18      ...   channels * rows * cols f32, channel-major, row-major within a channel
//! ```
//!
//! A label directory holds one `<view id>.hmap` per source view. Stacked
//! views store their slices back to back, so channel `k * T + t` is target
//! `t` of slice `k`, with `T` the number of targets planned from that view.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::heatmap::{DependencyMap, Heatmap, LabelSet, SliceLabels, ViewLabels};
use crate::io::manifest::ExamManifest;

pub const MAGIC: &[u8; 4] = b"HMAP";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 18;

#[derive(Debug, Error)]
pub enum HmapError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("{0} unexpected bytes after the payload")]
    TrailingBytes(usize),
    #[error("non-finite value in channel {channel} at index {index}")]
    NonFiniteValue { channel: usize, index: usize },
    #[error("channels have differing extents")]
    InconsistentShapes,
    #[error("nothing to write: no channels")]
    NoChannels,
    #[error("{file}: {found} channels, expected {expected}")]
    ChannelCount {
        file: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{file}: raster is {found_rows}x{found_cols}, slice is {rows}x{cols}")]
    ExtentMismatch {
        file: PathBuf,
        rows: usize,
        cols: usize,
        found_rows: usize,
        found_cols: usize,
    },
    #[error("view {0} is not in the exam")]
    MissingView(String),
}

pub fn encode_heatmaps(channels: &[Heatmap]) -> Result<Vec<u8>, HmapError> {
    let first = channels.first().ok_or(HmapError::NoChannels)?;
    let (rows, cols) = (first.rows(), first.cols());
    if channels.iter().any(|h| h.rows() != rows || h.cols() != cols) {
        return Err(HmapError::InconsistentShapes);
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * rows * cols * channels.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [rows, cols, channels.len()] {
        let v = u32::try_from(v).map_err(|_| HmapError::InconsistentShapes)?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    for (c, h) in channels.iter().enumerate() {
        for (i, v) in h.values().iter().enumerate() {
            if !v.is_finite() {
                return Err(HmapError::NonFiniteValue { channel: c, index: i });
            }
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_heatmaps(bytes: &[u8]) -> Result<Vec<Heatmap>, HmapError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(HmapError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(HmapError::TruncatedPayload {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(HmapError::UnsupportedVersion(version));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (rows, cols, channels) = (word(6), word(10), word(14));
    let plane = rows.checked_mul(cols).ok_or(HmapError::InconsistentShapes)?;
    let expected = plane
        .checked_mul(channels)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or(HmapError::InconsistentShapes)?;
    if bytes.len() < expected {
        return Err(HmapError::TruncatedPayload {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(HmapError::TrailingBytes(bytes.len() - expected));
    }
    let payload = &bytes[HEADER_LEN..];
    let mut out = Vec::with_capacity(channels);
    for c in 0..channels {
        let raw = &payload[c * plane * 4..(c + 1) * plane * 4];
        let mut values = Vec::with_capacity(plane);
        for (i, chunk) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(HmapError::NonFiniteValue { channel: c, index: i });
            }
            values.push(v);
        }
        out.push(Heatmap::from_vec(rows, cols, values).expect("length and finiteness checked"));
    }
    Ok(out)
}

pub fn write_heatmaps(path: &Path, channels: &[Heatmap]) -> Result<(), HmapError> {
    let bytes = encode_heatmaps(channels)?;
    fs::write(path, bytes).map_err(|source| HmapError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_heatmaps(path: &Path) -> Result<Vec<Heatmap>, HmapError> {
    let bytes = fs::read(path).map_err(|source| HmapError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_heatmaps(&bytes)
}

pub fn label_file(dir: &Path, view: &str) -> PathBuf {
    dir.join(format!("{view}.hmap"))
}

/// Writes one file per source view.
pub fn write_label_dir(dir: &Path, labels: &LabelSet) -> Result<(), HmapError> {
    fs::create_dir_all(dir).map_err(|source| HmapError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for (view, v) in &labels.views {
        let channels: Vec<Heatmap> = v.slices.iter().flat_map(|s| s.channels.iter().cloned()).collect();
        write_heatmaps(&label_file(dir, view), &channels)?;
    }
    Ok(())
}

/// Reads a label directory laid out by [`write_label_dir`]; channel counts
/// and extents are checked against the exam and dependency table.
pub fn read_label_dir(dir: &Path, exam: &ExamManifest, deps: &DependencyMap) -> Result<LabelSet, HmapError> {
    let mut set = LabelSet::default();
    for source in deps.source_views() {
        let view = exam
            .view(&source)
            .ok_or_else(|| HmapError::MissingView(source.clone()))?;
        let targets = deps.targets_from(&source);
        let file = label_file(dir, &source);
        let mut channels = read_heatmaps(&file)?;
        let expected = targets.len() * view.slices.len();
        if channels.len() != expected {
            return Err(HmapError::ChannelCount {
                file,
                expected,
                found: channels.len(),
            });
        }
        let pose = &view.slices[0];
        if let Some(h) = channels.first() {
            if (h.rows(), h.cols()) != (pose.rows(), pose.cols()) {
                return Err(HmapError::ExtentMismatch {
                    file,
                    rows: pose.rows(),
                    cols: pose.cols(),
                    found_rows: h.rows(),
                    found_cols: h.cols(),
                });
            }
        }
        let mut slices = Vec::with_capacity(view.slices.len());
        for _ in 0..view.slices.len() {
            let rest = channels.split_off(targets.len());
            slices.push(SliceLabels { channels });
            channels = rest;
        }
        set.views.insert(source, ViewLabels { targets, slices });
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Heatmap> {
        vec![
            Heatmap::from_fn(3, 4, |x, y| (x * 10 + y) as f32 * 0.125),
            Heatmap::from_fn(3, 4, |x, y| -((x + y) as f32) / 3.0),
        ]
    }

    #[test]
    fn header_layout() {
        let bytes = encode_heatmaps(&sample()).unwrap();
        assert_eq!(&bytes[..4], b"HMAP");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..10], &[3, 0, 0, 0]);
        assert_eq!(&bytes[10..14], &[4, 0, 0, 0]);
        assert_eq!(&bytes[14..18], &[2, 0, 0, 0]);
        assert_eq!(bytes.len(), HEADER_LEN + 2 * 3 * 4 * 4);
        // channel 0, row 1, col 0 = 0.125
        assert_eq!(&bytes[18 + 4 * 4..18 + 4 * 5], &0.125f32.to_le_bytes());
        assert_eq!(decode_heatmaps(&bytes).unwrap(), sample());
    }

    #[test]
    fn malformed_inputs() {
        let bytes = encode_heatmaps(&sample()).unwrap();
        assert!(matches!(
            decode_heatmaps(&bytes[..bytes.len() - 1]),
            Err(HmapError::TruncatedPayload { .. })
        ));
        assert!(matches!(
            decode_heatmaps(&bytes[..10]),
            Err(HmapError::TruncatedPayload { .. })
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode_heatmaps(&extra), Err(HmapError::TrailingBytes(1))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_heatmaps(&bad), Err(HmapError::BadMagic)));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(decode_heatmaps(&v2), Err(HmapError::UnsupportedVersion(2))));
        let mut nan = bytes.clone();
        nan[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            decode_heatmaps(&nan),
            Err(HmapError::NonFiniteValue { channel: 0, index: 0 })
        ));
        assert!(matches!(decode_heatmaps(b""), Err(HmapError::BadMagic)));
        // absurd dimensions must not allocate or panic
        let mut huge = bytes[..HEADER_LEN].to_vec();
        huge[6..10].copy_from_slice(&u32::MAX.to_le_bytes());
        huge[10..14].copy_from_slice(&u32::MAX.to_le_bytes());
        huge[14..18].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_heatmaps(&huge).is_err());
    }

    #[test]
    fn encode_rejects_mixed_extents() {
        let mixed = vec![Heatmap::zeros(2, 2), Heatmap::zeros(2, 3)];
        assert!(matches!(encode_heatmaps(&mixed), Err(HmapError::InconsistentShapes)));
        assert!(matches!(encode_heatmaps(&[]), Err(HmapError::NoChannels)));
    }
}
