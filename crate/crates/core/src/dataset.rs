//! Ground-truth generation: the floor of each raw frame is located with the
//! loose/tight extraction and replaced by the tight plane, then the cloud is
//! written back to a depth image.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{
    depth_to_pointcloud, pointcloud_to_depth_by_provenance, project_points_to_plane, CameraIntrinsics, DepthImage,
    PlaneModel, PointCloud,
};
use crate::io::{self, INTRINSICS_FILE};
use crate::ransac::{two_stage_ground_extraction, GroundExtraction, RansacConfig};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const MANIFEST_VERSION: &str = "tofplane-manifest/1";

/// Everything produced while rectifying one frame.
#[derive(Debug, Clone)]
pub struct Rectification {
    pub image: DepthImage,
    pub extraction: GroundExtraction,
    /// Orthogonal projections of the loose inliers onto the tight plane.
    pub ideal_plane: PointCloud,
    /// Non-floor points plus the rectified floor, each on its source pixel ray.
    pub rectified: PointCloud,
    /// Indices into `rectified` of the floor points.
    pub floor_indices: Vec<usize>,
}

/// Slides each point of `ideal` along `plane` onto the ray of its source
/// pixel. Points whose ray never meets the plane in front of the camera are
/// dropped.
pub fn resample_onto_source_rays(ideal: &PointCloud, plane: &PlaneModel, intr: &CameraIntrinsics) -> PointCloud {
    let Some(pixels) = &ideal.pixel_index else {
        return ideal.clone();
    };
    let (points, pixels) = pixels
        .iter()
        .filter_map(|&px| {
            let ray = intr.ray(px.u, px.v);
            plane.ray_depth(&ray).map(|z| (ray * z, px))
        })
        .unzip();
    PointCloud::with_pixels(points, pixels)
}

pub fn rectify_frame_detailed(img: &DepthImage, loose: &RansacConfig, tight: &RansacConfig) -> Result<Rectification> {
    let intr = img.intrinsics();
    let pcd = depth_to_pointcloud(img);
    let extraction = two_stage_ground_extraction(&pcd, loose, tight)?;

    let floor = pcd.select(extraction.loose_inliers());
    let ideal_plane = project_points_to_plane(&floor, extraction.tight_plane());

    let mut is_floor = vec![false; pcd.len()];
    for &i in extraction.loose_inliers() {
        is_floor[i] = true;
    }
    let remaining: Vec<usize> = (0..pcd.len()).filter(|&i| !is_floor[i]).collect();
    let mut rectified = pcd.select(&remaining);
    let resampled = resample_onto_source_rays(&ideal_plane, extraction.tight_plane(), intr);
    let floor_start = rectified.len();
    rectified.points.extend_from_slice(&resampled.points);
    if let (Some(dst), Some(src)) = (rectified.pixel_index.as_mut(), resampled.pixel_index.as_ref()) {
        dst.extend_from_slice(src);
    }
    let floor_indices = (floor_start..rectified.len()).collect();

    let image = pointcloud_to_depth_by_provenance(&rectified, intr);
    Ok(Rectification {
        image,
        extraction,
        ideal_plane,
        rectified,
        floor_indices,
    })
}

/// Replaces the MPI-curved floor of `img` with the tight plane.
pub fn rectify_frame(img: &DepthImage, loose: &RansacConfig, tight: &RansacConfig) -> Result<DepthImage> {
    rectify_frame_detailed(img, loose, tight).map(|r| r.image)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameStatus {
    Ok,
    SkippedNoPlane,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub raw_path: String,
    /// Unset unless the ground truth was written.
    pub gt_path: Option<String>,
    pub intrinsics_ref: String,
    pub loose_cfg: RansacConfig,
    pub tight_cfg: RansacConfig,
    pub seed: u64,
    pub status: FrameStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestHeader {
    version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub version: String,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn count(&self, status: FrameStatus) -> usize {
        self.entries.iter().filter(|e| e.status == status).count()
    }

    /// Header line with the version, then one JSON record per frame.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&ManifestHeader {
            version: self.version.clone(),
        })
        .expect("header serialize");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: ManifestHeader = serde_json::from_str(lines.next().unwrap_or("{}"))?;
        let entries = lines.map(serde_json::from_str).collect::<std::result::Result<_, _>>()?;
        Ok(DatasetManifest {
            version: header.version,
            entries,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text).map_err(|e| Error::format(path, e))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }
}

/// Per-frame seed: the first 8 bytes of SHA-256 over the global seed and the
/// file name, so a frame's result does not depend on processing order.
pub fn derive_seed(global_seed: u64, file_name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global_seed.to_le_bytes());
    h.update(file_name.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone)]
pub struct DatasetOptions {
    pub loose: RansacConfig,
    pub tight: RansacConfig,
    pub seed: u64,
    /// Defaults to `<input_dir>/intrinsics.json`.
    pub intrinsics: Option<PathBuf>,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            loose: RansacConfig::loose(),
            tight: RansacConfig::tight(),
            seed: 0,
            intrinsics: None,
        }
    }
}

fn process_frame(
    name: &str,
    input_dir: &Path,
    output_dir: &Path,
    intr: &CameraIntrinsics,
    intrinsics_ref: &str,
    opts: &DatasetOptions,
) -> ManifestEntry {
    let seed = derive_seed(opts.seed, name);
    let raw_path = input_dir.join(name);
    let gt_path = output_dir.join(name);
    let mut entry = ManifestEntry {
        raw_path: raw_path.display().to_string(),
        gt_path: None,
        intrinsics_ref: intrinsics_ref.to_string(),
        loose_cfg: opts.loose.with_seed(seed),
        tight_cfg: opts.tight.with_seed(seed),
        seed,
        status: FrameStatus::Failed,
        error: None,
    };
    let result = io::read_depth_png(&raw_path, intr)
        .and_then(|img| rectify_frame(&img, &entry.loose_cfg, &entry.tight_cfg))
        .and_then(|gt| io::write_depth_png(&gt_path, &gt));
    match result {
        Ok(()) => {
            entry.status = FrameStatus::Ok;
            entry.gt_path = Some(gt_path.display().to_string());
        }
        Err(Error::NoConstrainedPlane) => {
            entry.status = FrameStatus::SkippedNoPlane;
        }
        Err(e) => {
            entry.error = Some(e.to_string());
        }
    }
    entry
}

/// Rectifies every depth PNG of `input_dir` into `output_dir`, writing the
/// ground-truth images, a copy of the intrinsics and `manifest.jsonl`.
///
/// Frames are processed in parallel on the current rayon pool; the manifest
/// is ordered by file name.
pub fn build_dataset(input_dir: &Path, output_dir: &Path, opts: &DatasetOptions) -> Result<DatasetManifest> {
    let names = io::list_depth_pngs(input_dir)?;
    if names.is_empty() {
        return Err(Error::EmptyInput(format!("no depth images in {}", input_dir.display())));
    }
    let (intr_path, intr) = io::resolve_intrinsics(input_dir, opts.intrinsics.as_deref())?;
    opts.loose.validate()?;
    opts.tight.validate()?;
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;

    let intrinsics_ref = intr_path.display().to_string();
    let entries: Vec<ManifestEntry> = names
        .par_iter()
        .map(|name| process_frame(name, input_dir, output_dir, &intr, &intrinsics_ref, opts))
        .collect();

    io::write_intrinsics(&output_dir.join(INTRINSICS_FILE), &intr)?;
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION.to_string(),
        entries,
    };
    manifest.write(&output_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
