//! Point-cloud loss family used to train the correction network and the
//! curvature-gradient score used to judge how bent an extracted plane is.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{align_plane_to_xy, depth_to_pointcloud, DepthImage, PlaneModel, Point3, PointCloud};
use crate::ransac::{fit_plane_ransac, RansacConfig};

/// Default scale of the combined loss.
pub const DEFAULT_LOSS_SCALE: f64 = 100_000.0;

pub const HISTOGRAM_BINS: usize = 10;

/// Aligned residual sums below this are treated as a perfectly flat plane.
pub const FLAT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub loss_x: f64,
    pub loss_y: f64,
    pub loss_z: f64,
    pub loss_rmse: f64,
    pub total: f64,
    pub s: f64,
    /// Number of point pairs that entered the sums.
    pub n: usize,
}

impl LossBreakdown {
    /// `s · rmse · |3 − e^lx − e^ly − e^lz|`.
    pub fn combine(loss_x: f64, loss_y: f64, loss_z: f64, loss_rmse: f64, s: f64) -> f64 {
        s * loss_rmse * (3.0 - loss_x.exp() - loss_y.exp() - loss_z.exp()).abs()
    }
}

/// Per-axis mean squared errors, log-depth RMSE and their combination.
///
/// Points are compared by position; pairs where either depth is zero are
/// dropped before averaging.
pub fn loss_components(gt: &PointCloud, pred: &PointCloud, s: f64) -> Result<LossBreakdown> {
    if gt.len() != pred.len() {
        return Err(Error::LengthMismatch {
            gt: gt.len(),
            pred: pred.len(),
        });
    }
    let (mut sx, mut sy, mut sz, mut slog) = (0.0, 0.0, 0.0, 0.0);
    let mut n = 0usize;
    for (g, p) in gt.points.iter().zip(&pred.points) {
        if g.z == 0.0 || p.z == 0.0 {
            continue;
        }
        sx += (g.x - p.x).powi(2);
        sy += (g.y - p.y).powi(2);
        sz += (g.z - p.z).powi(2);
        slog += (g.z.abs().ln() - p.z.abs().ln()).powi(2);
        n += 1;
    }
    if n == 0 {
        return Err(Error::NoComparablePoints);
    }
    let nf = n as f64;
    let (loss_x, loss_y, loss_z) = (sx / nf, sy / nf, sz / nf);
    let loss_rmse = (slog / nf).sqrt();
    Ok(LossBreakdown {
        loss_x,
        loss_y,
        loss_z,
        loss_rmse,
        total: LossBreakdown::combine(loss_x, loss_y, loss_z, loss_rmse, s),
        s,
        n,
    })
}

/// Dense per-pixel clouds of two images (invalid pixels become z = 0 points)
/// so that they correspond by position.
pub fn paired_clouds(gt: &DepthImage, pred: &DepthImage) -> Result<(PointCloud, PointCloud)> {
    if gt.width() != pred.width() || gt.height() != pred.height() {
        return Err(Error::LengthMismatch {
            gt: gt.data().len(),
            pred: pred.data().len(),
        });
    }
    let dense = |img: &DepthImage| {
        let intr = img.intrinsics();
        PointCloud::from_points(
            img.pixels()
                .map(|(px, raw)| intr.unproject(px.u, px.v, raw as f64 * intr.depth_scale))
                .collect(),
        )
    };
    Ok((dense(gt), dense(pred)))
}

pub fn image_losses(gt: &DepthImage, pred: &DepthImage, s: f64) -> Result<LossBreakdown> {
    let (g, p) = paired_clouds(gt, pred)?;
    loss_components(&g, &p, s)
}

/// Share of the absolute residual mass that lies below the plane after the
/// plane is aligned with XY: `Σ|z<0| / (Σ|z<0| + Σ|z≥0|)`.
///
/// Returns 0 for a perfectly flat point set.
pub fn curvature_gradient(plane_points: &PointCloud, plane: &PlaneModel) -> Result<f64> {
    curvature_gradient_banded(plane_points, plane, 0.0)
}

/// [`curvature_gradient`] where residuals with `|z| <= band` count as zero.
///
/// Points read back from an integer depth image cannot sit closer to a plane
/// than the depth quantum, so image-based evaluation passes one depth unit
/// as `band`; otherwise a quantized plane scores like random noise (≈ 0.5).
pub fn curvature_gradient_banded(plane_points: &PointCloud, plane: &PlaneModel, band: f64) -> Result<f64> {
    if plane_points.is_empty() {
        return Err(Error::EmptyInput("no plane points".into()));
    }
    let aligned = align_plane_to_xy(plane_points, plane)?;
    let (below, above) = aligned.points.iter().fold((0.0, 0.0), |(b, a), p| {
        if p.z.abs() <= band {
            (b, a)
        } else if p.z < 0.0 {
            (b - p.z, a)
        } else {
            (b, a + p.z)
        }
    });
    if below < FLAT_EPSILON && above < FLAT_EPSILON {
        return Ok(0.0);
    }
    Ok(below / (below + above))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneRecord {
    pub frame_id: String,
    pub curv_grad: f64,
    pub point_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFrame {
    pub frame_id: String,
    pub reason: String,
}

/// Ten equal bins over [0, 1]; 1.0 falls in the last bin.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram(pub [usize; HISTOGRAM_BINS]);

impl Histogram {
    pub fn bin_of(value: f64) -> usize {
        ((value * HISTOGRAM_BINS as f64).floor() as usize).min(HISTOGRAM_BINS - 1)
    }

    pub fn from_values<'a>(values: impl IntoIterator<Item = &'a f64>) -> Self {
        let mut h = Histogram::default();
        for &v in values {
            h.0[Self::bin_of(v)] += 1;
        }
        h
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// `other − self`, per bin.
    pub fn delta(&self, other: &Histogram) -> [i64; HISTOGRAM_BINS] {
        std::array::from_fn(|i| other.0[i] as i64 - self.0[i] as i64)
    }

    /// Fraction-weighted mean bin center; `None` for an empty histogram.
    pub fn mean_bin_center(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| {
            self.0
                .iter()
                .enumerate()
                .map(|(i, &c)| (i as f64 + 0.5) / HISTOGRAM_BINS as f64 * c as f64)
                .sum::<f64>()
                / total as f64
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub per_plane: Vec<PlaneRecord>,
    pub skipped: Vec<SkippedFrame>,
    pub histogram: Histogram,
    /// Population standard deviation of the per-plane gradients.
    pub std_dev: f64,
}

impl CurvatureReport {
    pub fn from_records(per_plane: Vec<PlaneRecord>, skipped: Vec<SkippedFrame>) -> Self {
        let values: Vec<f64> = per_plane.iter().map(|r| r.curv_grad).collect();
        CurvatureReport {
            histogram: Histogram::from_values(&values),
            std_dev: population_std(&values),
            per_plane,
            skipped,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.per_plane.is_empty())
            .then(|| self.per_plane.iter().map(|r| r.curv_grad).sum::<f64>() / self.per_plane.len() as f64)
    }
}

pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Curvature gradient of the largest constrained plane of one frame, with a
/// dead band of one depth unit.
pub fn frame_curvature(img: &DepthImage, ransac: &RansacConfig) -> Result<(f64, usize)> {
    let pcd = depth_to_pointcloud(img);
    let plane = fit_plane_ransac(&pcd, ransac)?;
    let support = pcd.select(&plane.inliers);
    let band = img.intrinsics().depth_scale;
    Ok((curvature_gradient_banded(&support, &plane, band)?, support.len()))
}

/// Scores every frame; frames without a constrained plane are listed in
/// `skipped` and left out of the histogram. Output order follows input order.
pub fn evaluate_plane_set(frames: &[(String, DepthImage)], ransac: &RansacConfig) -> Result<CurvatureReport> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("no frames to evaluate".into()));
    }
    let results: Vec<_> = frames
        .par_iter()
        .map(|(id, img)| (id, frame_curvature(img, ransac)))
        .collect();
    let mut per_plane = Vec::new();
    let mut skipped = Vec::new();
    for (id, r) in results {
        match r {
            Ok((curv_grad, point_count)) => per_plane.push(PlaneRecord {
                frame_id: id.clone(),
                curv_grad,
                point_count,
            }),
            Err(e) => skipped.push(SkippedFrame {
                frame_id: id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    Ok(CurvatureReport::from_records(per_plane, skipped))
}

/// Signed residual of each point to `plane`; handy for tests and reports.
pub fn residuals(points: &[Point3], plane: &PlaneModel) -> Vec<f64> {
    points.iter().map(|p| plane.signed_distance(p)).collect()
}
