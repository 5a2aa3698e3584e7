//! Prescribed planes and evaluation reports.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Plane3D, Vec3};
use crate::metrics::{PlaneMetrics, Report};
use crate::prescribe::{PrescriptionResult, Winner};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed planes file at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("degenerate plane for {target}")]
    BadPlane { target: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneRecord {
    pub target: String,
    pub point: [f64; 3],
    pub normal: [f64; 3],
    pub score: f64,
    /// Set when every candidate scored zero, so the plane is arbitrary.
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_offset_px: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_angle_deg: Option<f64>,
}

impl PlaneRecord {
    pub fn from_result(target: &str, r: &PrescriptionResult) -> Self {
        let p = r.plane.point();
        let n = r.plane.normal();
        let mut rec = Self {
            target: target.to_string(),
            point: [p.x, p.y, p.z],
            normal: [n.x, n.y, n.z],
            score: r.score,
            degenerate: r.degenerate_zero_score,
            anchor_index: None,
            theta_deg: None,
            phi_deg: None,
            line_offset_px: None,
            line_angle_deg: None,
        };
        match r.winner {
            Winner::Plane(c) => {
                rec.anchor_index = Some(c.anchor_index);
                rec.theta_deg = Some(c.angles.theta);
                rec.phi_deg = Some(c.angles.phi);
            }
            Winner::Line(l) => {
                rec.line_offset_px = Some(l.offset_px);
                rec.line_angle_deg = Some(l.angle_deg);
            }
        }
        rec
    }

    pub fn plane(&self) -> Result<Plane3D, ReportError> {
        Plane3D::new(Vec3::from(self.point), Vec3::from(self.normal)).map_err(|_| ReportError::BadPlane {
            target: self.target.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanesFile {
    pub exam_id: String,
    pub planes: Vec<PlaneRecord>,
}

pub fn write_planes(path: &Path, planes: &PlanesFile) -> Result<(), ReportError> {
    let text = serde_json::to_string_pretty(planes).expect("plain data serializes");
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn read_planes(path: &Path) -> Result<PlanesFile, ReportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_planes(&text)
}

pub fn parse_planes(text: &str) -> Result<PlanesFile, ReportError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let file: PlanesFile = serde_path_to_error::deserialize(&mut de).map_err(|e| ReportError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    de.end().map_err(|e| ReportError::Schema {
        path: ".".into(),
        message: e.to_string(),
    })?;
    for rec in &file.planes {
        rec.plane()?;
    }
    Ok(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub exam: String,
    pub target: String,
    pub normal_deviation_deg: f64,
    pub point_to_plane_mm: f64,
}

impl CaseRow {
    pub fn new(exam: &str, target: &str, m: PlaneMetrics) -> Self {
        Self {
            exam: exam.to_string(),
            target: target.to_string(),
            normal_deviation_deg: m.normal_deviation_deg,
            point_to_plane_mm: m.point_to_plane_mm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cases: Vec<CaseRow>,
    pub summary: Report,
}

pub fn metrics_json(report: &MetricsReport) -> String {
    serde_json::to_string_pretty(report).expect("plain data serializes") + "\n"
}

/// One row per case: exam, target, normal_deviation_deg, point_to_plane_mm.
pub fn metrics_csv(rows: &[CaseRow]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}
