//! Accuracy of automatic planes against ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Plane3D, SlicePose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneMetrics {
    pub normal_deviation_deg: f64,
    pub point_to_plane_mm: f64,
}

/// Angle between plane normals, ignoring their sign, in `[0, 90]` degrees.
pub fn normal_deviation(auto: &Plane3D, gt: &Plane3D) -> f64 {
    auto.normal()
        .dot(&gt.normal())
        .abs()
        .clamp(0.0, 1.0)
        .acos()
        .to_degrees()
}

/// Distance from the center of the ground-truth image to the automatic plane.
pub fn point_to_plane(gt_pose: &SlicePose, auto: &Plane3D) -> f64 {
    auto.signed_distance(&gt_pose.center()).abs()
}

pub fn evaluate(auto: &Plane3D, gt_pose: &SlicePose) -> PlaneMetrics {
    PlaneMetrics {
        normal_deviation_deg: normal_deviation(auto, &crate::geom::pose_to_plane(gt_pose)),
        point_to_plane_mm: point_to_plane(gt_pose, auto),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample standard deviation (n - 1); 0 for a single value.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() == 1 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub count: usize,
    pub normal_deviation_deg: MeanStd,
    pub point_to_plane_mm: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub groups: Vec<GroupSummary>,
    /// Mean and spread of the per-group means.
    pub overall_normal_deviation_deg: MeanStd,
    pub overall_point_to_plane_mm: MeanStd,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no cases to aggregate")]
    EmptyGroup,
}

/// Per-group mean and sample standard deviation, plus an overall row taken
/// over the group means. Groups are reported in lexicographic order.
pub fn aggregate<S: AsRef<str>>(cases: &[(S, PlaneMetrics)]) -> Result<Report, MetricsError> {
    if cases.is_empty() {
        return Err(MetricsError::EmptyGroup);
    }
    let mut by_group: BTreeMap<&str, Vec<PlaneMetrics>> = BTreeMap::new();
    for (g, m) in cases {
        by_group.entry(g.as_ref()).or_default().push(*m);
    }
    let groups: Vec<GroupSummary> = by_group
        .into_iter()
        .map(|(g, ms)| {
            let dev: Vec<f64> = ms.iter().map(|m| m.normal_deviation_deg).collect();
            let dist: Vec<f64> = ms.iter().map(|m| m.point_to_plane_mm).collect();
            GroupSummary {
                group: g.to_string(),
                count: ms.len(),
                normal_deviation_deg: MeanStd::of(&dev).expect("non-empty"),
                point_to_plane_mm: MeanStd::of(&dist).expect("non-empty"),
            }
        })
        .collect();
    let dev_means: Vec<f64> = groups.iter().map(|g| g.normal_deviation_deg.mean).collect();
    let dist_means: Vec<f64> = groups.iter().map(|g| g.point_to_plane_mm.mean).collect();
    Ok(Report {
        overall_normal_deviation_deg: MeanStd::of(&dev_means).expect("non-empty"),
        overall_point_to_plane_mm: MeanStd::of(&dist_means).expect("non-empty"),
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use approx::assert_abs_diff_eq;

    fn plane(n: Vec3) -> Plane3D {
        Plane3D::new(Vec3::zeros(), n).unwrap()
    }

    #[test]
    fn deviation_cases() {
        assert_eq!(normal_deviation(&plane(Vec3::z()), &plane(Vec3::z())), 0.0);
        assert_abs_diff_eq!(normal_deviation(&plane(Vec3::z()), &plane(Vec3::x())), 90.0);
        assert_eq!(normal_deviation(&plane(Vec3::z()), &plane(-Vec3::z())), 0.0);
    }

    #[test]
    fn distance_from_center() {
        let pose = SlicePose::new(Vec3::new(-2.0, -2.0, 5.0), Vec3::x(), Vec3::y(), 1.0, 1.0, 5, 5, 1.0).unwrap();
        assert_abs_diff_eq!(point_to_plane(&pose, &plane(Vec3::z())), 5.0);
        let through = Plane3D::new(Vec3::new(0.0, 0.0, 5.0), Vec3::new(1.0, 1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(point_to_plane(&pose, &through), 0.0);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn table_mean_row() {
        // per-view means of the reference result table; the overall row is
        // 5.98 +- 0.79 when taken across the four view means
        let cases: Vec<(&str, PlaneMetrics)> = [("2C", 4.97), ("3C", 6.84), ("4C", 5.84), ("SAX", 6.28)]
            .iter()
            .map(|&(g, d)| {
                (
                    g,
                    PlaneMetrics {
                        normal_deviation_deg: d,
                        point_to_plane_mm: 0.0,
                    },
                )
            })
            .collect();
        let r = aggregate(&cases).unwrap();
        assert_abs_diff_eq!(r.overall_normal_deviation_deg.mean, 5.98, epsilon = 0.005);
        assert_abs_diff_eq!(r.overall_normal_deviation_deg.std, 0.79, epsilon = 0.005);
    }

    #[test]
    fn single_case_and_empty() {
        let m = PlaneMetrics {
            normal_deviation_deg: 3.0,
            point_to_plane_mm: 2.0,
        };
        let r = aggregate(&[("x", m)]).unwrap();
        assert_eq!(r.groups[0].normal_deviation_deg, MeanStd { mean: 3.0, std: 0.0 });
        assert_eq!(r.overall_point_to_plane_mm, MeanStd { mean: 2.0, std: 0.0 });
        assert_eq!(aggregate::<&str>(&[]), Err(MetricsError::EmptyGroup));
    }
}
