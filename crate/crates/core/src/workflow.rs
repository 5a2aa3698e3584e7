//! File-to-file steps of the planning pipeline, shared by the `viewplan`
//! binary and the examples.
//!
//! `phantom -> gen-labels -> prescribe -> evaluate` only communicate through
//! the files each step writes.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geom::{self, Plane3D};
use crate::heatmap::{gen_labels, l2_loss_channels, LabelError, LabelSet};
use crate::io::hmap::{self, HmapError};
use crate::io::manifest::{parse_manifest, serialize_manifest, ExamManifest, ManifestError};
use crate::io::overlay::{render_overlay, Background, LineLabel};
use crate::io::report::{
    metrics_csv, metrics_json, read_planes, write_planes, CaseRow, MetricsReport, PlaneRecord, PlanesFile, ReportError,
};
use crate::metrics::{aggregate, evaluate};
use crate::phantom::{generate, PhantomConfig, PhantomError};
use crate::prescribe::{prescribe_target, PrescribeError, SearchConfig};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const PLANES_FILE: &str = "planes.json";
pub const LABEL_DIR: &str = "labels";
pub const NOISY_LABEL_DIR: &str = "labels_noisy";
pub const OVERLAY_DIR: &str = "overlays";

/// Failures split by exit code: 2 for bad input, 3 for degenerate geometry.
#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Degenerate(String),
}

impl WorkflowError {
    pub fn exit_code(&self) -> i32 {
        match self {
            WorkflowError::Validation(_) => 2,
            WorkflowError::Degenerate(_) => 3,
        }
    }
}

impl From<ManifestError> for WorkflowError {
    fn from(e: ManifestError) -> Self {
        match e {
            ManifestError::MissingView { .. } => Self::Validation(format!("MissingView: {e}")),
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<HmapError> for WorkflowError {
    fn from(e: HmapError) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<ReportError> for WorkflowError {
    fn from(e: ReportError) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<LabelError> for WorkflowError {
    fn from(e: LabelError) -> Self {
        match e {
            LabelError::MissingView(_) => Self::Validation(format!("MissingView: {e}")),
            LabelError::ParallelPlanes { .. } | LabelError::Geometry { .. } => Self::Degenerate(e.to_string()),
        }
    }
}

impl From<PrescribeError> for WorkflowError {
    fn from(e: PrescribeError) -> Self {
        match e {
            PrescribeError::ParallelPlanes { .. }
            | PrescribeError::EmptyIntersection { .. }
            | PrescribeError::Geometry(_) => Self::Degenerate(e.to_string()),
            PrescribeError::MissingView(_) => Self::Validation(format!("MissingView: {e}")),
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<PhantomError> for WorkflowError {
    fn from(e: PhantomError) -> Self {
        match e {
            PhantomError::DegenerateGeometry(_) => Self::Degenerate(e.to_string()),
            PhantomError::Labels(l) => l.into(),
            _ => Self::Validation(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> WorkflowError {
    WorkflowError::Validation(format!("{}: {e}", path.display()))
}

fn create_dir(dir: &Path) -> Result<(), WorkflowError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), WorkflowError> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn read_manifest(path: &Path) -> Result<ExamManifest, WorkflowError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_manifest(&text).map_err(|e| match WorkflowError::from(e) {
        WorkflowError::Validation(msg) => WorkflowError::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_manifest(path: &Path, exam: &ExamManifest) -> Result<(), WorkflowError> {
    write_text(path, &serialize_manifest(exam))
}

fn plane_record(target: &str, plane: &Plane3D) -> PlaneRecord {
    let (p, n) = (plane.point(), plane.normal());
    PlaneRecord {
        target: target.to_string(),
        point: [p.x, p.y, p.z],
        normal: [n.x, n.y, n.z],
        score: 0.0,
        degenerate: false,
        anchor_index: None,
        theta_deg: None,
        phi_deg: None,
        line_offset_px: None,
        line_angle_deg: None,
    }
}

/// Writes a phantom exam: manifest, ground-truth planes through each view's
/// image center, clean labels and, when noise is configured, noisy labels.
pub fn cmd_phantom(config: &PhantomConfig, out: &Path) -> Result<PathBuf, WorkflowError> {
    let exam = generate(config)?;
    create_dir(out)?;
    let manifest = out.join(MANIFEST_FILE);
    write_manifest(&manifest, &exam.manifest)?;
    let planes = exam
        .manifest
        .views
        .iter()
        .map(|v| {
            let pose = v.target_pose();
            let plane = Plane3D::new(pose.center(), pose.normal()).expect("unit normal");
            plane_record(&v.id, &plane)
        })
        .collect();
    write_planes(
        &out.join(GROUND_TRUTH_FILE),
        &PlanesFile {
            exam_id: exam.manifest.exam_id.clone(),
            planes,
        },
    )?;
    hmap::write_label_dir(&out.join(LABEL_DIR), &exam.labels)?;
    if let Some(noisy) = &exam.noisy_labels {
        hmap::write_label_dir(&out.join(NOISY_LABEL_DIR), noisy)?;
    }
    let config_text = serde_json::to_string_pretty(config).expect("plain data serializes");
    write_text(&out.join("phantom.json"), &(config_text + "\n"))?;
    Ok(manifest)
}

/// Renders labels for every dependency edge and writes one HMAP file per
/// source view.
pub fn cmd_gen_labels(manifest: &Path, alpha: f64, out: &Path) -> Result<LabelSet, WorkflowError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(WorkflowError::Validation(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let exam = read_manifest(manifest)?;
    let labels = gen_labels(&exam, &exam.dependency_map(), alpha)?;
    hmap::write_label_dir(out, &labels)?;
    Ok(labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrescribeOptions {
    /// Targets to prescribe; every target of the dependency table when empty.
    pub targets: Vec<String>,
    pub search: SearchConfig,
    pub overlays: bool,
}

impl Default for PrescribeOptions {
    fn default() -> Self {
        Self {
            targets: Vec::new(),
            search: SearchConfig::default(),
            overlays: true,
        }
    }
}

/// Prescribes each target from the label directory and writes
/// `planes.json`, plus one overlay per source slice. Overlays draw the
/// prescribed line in red, and the line of the target's own pose in green
/// when the manifest has that view.
pub fn cmd_prescribe(
    manifest: &Path,
    labels: &Path,
    options: &PrescribeOptions,
    out: &Path,
) -> Result<PlanesFile, WorkflowError> {
    let exam = read_manifest(manifest)?;
    let deps = exam.dependency_map();
    let targets: Vec<String> = if options.targets.is_empty() {
        deps.targets().map(str::to_string).collect()
    } else {
        options.targets.clone()
    };
    if let Some(t) = targets.iter().find(|t| deps.sources_of(t).is_none()) {
        return Err(PrescribeError::UnknownTarget(t.clone()).into());
    }
    let label_set = hmap::read_label_dir(labels, &exam, &deps)?;

    create_dir(out)?;
    let overlay_dir = out.join(OVERLAY_DIR);
    if options.overlays {
        create_dir(&overlay_dir)?;
    }
    let mut planes = Vec::with_capacity(targets.len());
    for target in &targets {
        let result = prescribe_target(&exam, &label_set, &deps, target, &options.search)?;
        if options.overlays {
            let truth = exam.view(target).map(|v| geom::pose_to_plane(v.target_pose()));
            for hit in &result.segments {
                let pose = &exam.view(&hit.view).expect("source exists").slices[hit.slice];
                let heatmap = label_set
                    .heatmap(&hit.view, hit.slice, target)
                    .expect("labels were read for every source");
                let mut lines = Vec::new();
                if let Some(gt) = truth
                    .and_then(|gt| geom::intersect_planes(&gt, &geom::pose_to_plane(pose)).ok())
                    .and_then(|l| geom::line3d_to_line2d(&l, pose).ok())
                {
                    lines.push((gt, LineLabel::Truth));
                }
                if let Some(line) = hit.line {
                    lines.push((line, LineLabel::Auto));
                }
                let path = overlay_dir.join(format!("{target}_{}_{:02}.ppm", hit.view, hit.slice));
                render_overlay(Background::Raster(heatmap), &lines)
                    .write_ppm(&path)
                    .map_err(|e| io_error(&path, e))?;
            }
        }
        planes.push(PlaneRecord::from_result(target, &result));
    }
    let file = PlanesFile {
        exam_id: exam.exam_id.clone(),
        planes,
    };
    write_planes(&out.join(PLANES_FILE), &file)?;
    Ok(file)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

/// Scores prescribed planes against the target poses of their ground-truth
/// manifests. Each `(planes, manifest)` pair is one exam.
pub fn cmd_evaluate(
    pairs: &[(PathBuf, PathBuf)],
    out: Option<&Path>,
    format: ReportFormat,
) -> Result<MetricsReport, WorkflowError> {
    if pairs.is_empty() {
        return Err(WorkflowError::Validation("no planes to evaluate".into()));
    }
    let mut cases = Vec::new();
    for (planes_path, manifest_path) in pairs {
        let planes = read_planes(planes_path)?;
        let exam = read_manifest(manifest_path)?;
        if planes.exam_id != exam.exam_id {
            return Err(WorkflowError::Validation(format!(
                "exam id mismatch: planes for {} against manifest of {}",
                planes.exam_id, exam.exam_id
            )));
        }
        for rec in &planes.planes {
            let view = exam.view(&rec.target).ok_or_else(|| {
                WorkflowError::Validation(format!("MissingView: {} is not in the manifest", rec.target))
            })?;
            let m = evaluate(&rec.plane()?, view.target_pose());
            cases.push(CaseRow::new(&exam.exam_id, &rec.target, m));
        }
    }
    let grouped: Vec<(&str, _)> = cases
        .iter()
        .map(|c| {
            (
                c.target.as_str(),
                crate::metrics::PlaneMetrics {
                    normal_deviation_deg: c.normal_deviation_deg,
                    point_to_plane_mm: c.point_to_plane_mm,
                },
            )
        })
        .collect();
    let summary = aggregate(&grouped).map_err(|e| WorkflowError::Validation(e.to_string()))?;
    let report = MetricsReport { cases, summary };
    if let Some(path) = out {
        let text = match format {
            ReportFormat::Json => metrics_json(&report),
            ReportFormat::Csv => metrics_csv(&report.cases)?,
        };
        write_text(path, &text)?;
    }
    Ok(report)
}

/// L2 loss between two label directories, per HMAP file in `truth`, with
/// the mean over files last.
pub fn cmd_loss(truth: &Path, pred: &Path) -> Result<Vec<(String, f64)>, WorkflowError> {
    let mut names: Vec<String> = fs::read_dir(truth)
        .map_err(|e| io_error(truth, e))?
        .filter_map(|entry| entry.ok())
        .map(|entry| entry.file_name().to_string_lossy().into_owned())
        .filter(|name| name.ends_with(".hmap"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(WorkflowError::Validation(format!(
            "{}: no .hmap files",
            truth.display()
        )));
    }
    let mut out = Vec::with_capacity(names.len() + 1);
    for name in names {
        let t = hmap::read_heatmaps(&truth.join(&name))?;
        let p = hmap::read_heatmaps(&pred.join(&name))?;
        let loss = l2_loss_channels(&t, &p).map_err(|e| WorkflowError::Validation(format!("{name}: {}", e.0)))?;
        out.push((name, loss));
    }
    let mean = out.iter().map(|(_, l)| l).sum::<f64>() / out.len() as f64;
    out.push(("mean".to_string(), mean));
    Ok(out)
}
