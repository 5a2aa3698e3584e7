//! Exam manifest: the JSON carrier of slice poses.
//!
//! Field names follow the usual image-header attributes:
//! `image_position` (center of the first pixel), `image_orientation` (row
//! cosines then column cosines), `pixel_spacing` as `[between rows, between
//! columns]`, `rows`, `columns` and `slice_thickness`, all in mm.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{SlicePose, Vec3};
use crate::heatmap::DependencyMap;

/// Maximum disagreement between slice normals within one stack.
pub const STACK_NORMAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViewRole {
    #[serde(rename = "axial")]
    Axial,
    #[serde(rename = "p2C")]
    Pseudo2C,
    #[serde(rename = "p4C")]
    Pseudo4C,
    #[serde(rename = "pSA")]
    PseudoSax,
    #[serde(rename = "2C")]
    TwoChamber,
    #[serde(rename = "3C")]
    ThreeChamber,
    #[serde(rename = "4C")]
    FourChamber,
    #[serde(rename = "SAX")]
    ShortAxis,
}

impl ViewRole {
    pub const ALL: [ViewRole; 8] = [
        ViewRole::Axial,
        ViewRole::Pseudo2C,
        ViewRole::Pseudo4C,
        ViewRole::PseudoSax,
        ViewRole::TwoChamber,
        ViewRole::ThreeChamber,
        ViewRole::FourChamber,
        ViewRole::ShortAxis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ViewRole::Axial => "axial",
            ViewRole::Pseudo2C => "p2C",
            ViewRole::Pseudo4C => "p4C",
            ViewRole::PseudoSax => "pSA",
            ViewRole::TwoChamber => "2C",
            ViewRole::ThreeChamber => "3C",
            ViewRole::FourChamber => "4C",
            ViewRole::ShortAxis => "SAX",
        }
    }

    pub fn is_standard(self) -> bool {
        matches!(
            self,
            ViewRole::TwoChamber | ViewRole::ThreeChamber | ViewRole::FourChamber | ViewRole::ShortAxis
        )
    }
}

impl fmt::Display for ViewRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub id: String,
    pub role: ViewRole,
    pub slices: Vec<SlicePose>,
}

impl View {
    /// The plane a view stands for when it is a prescription target: its
    /// first slice (the most basal one for short-axis stacks).
    pub fn target_pose(&self) -> &SlicePose {
        &self.slices[0]
    }

    /// Slice used when the view anchors a search: the middle of the stack.
    pub fn reference_slice(&self) -> &SlicePose {
        &self.slices[self.slices.len() / 2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExamManifest {
    pub exam_id: String,
    pub views: Vec<View>,
    pub dependencies: Option<DependencyMap>,
}

impl ExamManifest {
    pub fn view(&self, id: &str) -> Option<&View> {
        self.views.iter().find(|v| v.id == id)
    }

    /// Manifest overrides if present, the default protocol otherwise.
    pub fn dependency_map(&self) -> DependencyMap {
        self.dependencies.clone().unwrap_or_else(DependencyMap::protocol)
    }

    /// Validates and builds a manifest from already constructed views.
    pub fn new(
        exam_id: impl Into<String>,
        views: Vec<View>,
        dependencies: Option<DependencyMap>,
    ) -> Result<Self, ManifestError> {
        let m = Self {
            exam_id: exam_id.into(),
            views,
            dependencies,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), ManifestError> {
        let violation = |view: &str, slice: Option<usize>, reason: String| ManifestError::InvariantViolation {
            view: view.to_string(),
            slice,
            reason,
        };
        for (i, v) in self.views.iter().enumerate() {
            if self.views[..i].iter().any(|w| w.id == v.id) {
                return Err(violation(&v.id, None, "duplicate view id".into()));
            }
            let Some(first) = v.slices.first() else {
                return Err(violation(&v.id, None, "view has no slices".into()));
            };
            let n0 = first.normal();
            for (k, s) in v.slices.iter().enumerate().skip(1) {
                let dev = s.normal().cross(&n0).norm();
                if dev > STACK_NORMAL_TOL {
                    return Err(violation(
                        &v.id,
                        Some(k),
                        format!("slice normal deviates from the stack normal by {dev:.3e}"),
                    ));
                }
            }
        }
        if let Some(deps) = &self.dependencies {
            for (target, sources) in deps.entries() {
                for id in std::iter::once(target).chain(sources) {
                    if self.view(id).is_none() {
                        return Err(ManifestError::MissingView {
                            view: id.clone(),
                            target: target.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invariant violation in view {view}{}: {reason}", slice.map(|k| format!(" slice {k}")).unwrap_or_default())]
    InvariantViolation {
        view: String,
        slice: Option<usize>,
        reason: String,
    },
    #[error("dependency for target {target} references absent view {view}")]
    MissingView { view: String, target: String },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    exam_id: String,
    views: Vec<RawView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dependencies: Option<Vec<RawDependency>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawView {
    id: String,
    role: ViewRole,
    slices: Vec<RawSlice>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSlice {
    image_position: [f64; 3],
    image_orientation: [f64; 6],
    pixel_spacing: [f64; 2],
    rows: usize,
    columns: usize,
    slice_thickness: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDependency {
    target: String,
    sources: Vec<String>,
}

impl RawSlice {
    fn from_pose(p: &SlicePose) -> Self {
        let (r, c, o) = (p.row_dir(), p.col_dir(), p.origin());
        Self {
            image_position: [o.x, o.y, o.z],
            image_orientation: [r.x, r.y, r.z, c.x, c.y, c.z],
            pixel_spacing: [p.spacing_y(), p.spacing_x()],
            rows: p.rows(),
            columns: p.cols(),
            slice_thickness: p.thickness(),
        }
    }
}

pub fn parse_manifest(text: &str) -> Result<ExamManifest, ManifestError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let raw: RawManifest = serde_path_to_error::deserialize(&mut de).map_err(|e| ManifestError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    de.end().map_err(|e| ManifestError::Schema {
        path: ".".into(),
        message: e.to_string(),
    })?;

    let mut views = Vec::with_capacity(raw.views.len());
    for v in raw.views {
        let mut slices = Vec::with_capacity(v.slices.len());
        for (k, s) in v.slices.iter().enumerate() {
            let o = s.image_orientation;
            let pose = SlicePose::new(
                Vec3::from(s.image_position),
                Vec3::new(o[0], o[1], o[2]),
                Vec3::new(o[3], o[4], o[5]),
                s.pixel_spacing[1],
                s.pixel_spacing[0],
                s.columns,
                s.rows,
                s.slice_thickness,
            )
            .map_err(|e| ManifestError::InvariantViolation {
                view: v.id.clone(),
                slice: Some(k),
                reason: e.to_string(),
            })?;
            slices.push(pose);
        }
        views.push(View {
            id: v.id,
            role: v.role,
            slices,
        });
    }
    let dependencies = raw
        .dependencies
        .map(|deps| {
            DependencyMap::new(deps.into_iter().map(|d| (d.target, d.sources))).map_err(|e| ManifestError::Schema {
                path: "dependencies".into(),
                message: e.to_string(),
            })
        })
        .transpose()?;
    ExamManifest::new(raw.exam_id, views, dependencies)
}

pub fn serialize_manifest(m: &ExamManifest) -> String {
    let raw = RawManifest {
        exam_id: m.exam_id.clone(),
        views: m
            .views
            .iter()
            .map(|v| RawView {
                id: v.id.clone(),
                role: v.role,
                slices: v.slices.iter().map(RawSlice::from_pose).collect(),
            })
            .collect(),
        dependencies: m.dependencies.as_ref().map(|d| {
            d.entries()
                .iter()
                .map(|(t, s)| RawDependency {
                    target: t.clone(),
                    sources: s.clone(),
                })
                .collect()
        }),
    };
    serde_json::to_string_pretty(&raw).expect("manifest is always serializable")
}
