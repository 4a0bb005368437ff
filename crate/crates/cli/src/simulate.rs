use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tofplane::geometry::CameraIntrinsics;
use tofplane::io::{self, INTRINSICS_FILE};
use tofplane::synth::{intrinsics_for, render_scene, CameraPose, SceneSpec, SyntheticFrame};

use crate::config::RunConfig;
use crate::Failure;

pub const TRUTH_DIR: &str = "truth";

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CameraSpec {
    Intrinsics(CameraIntrinsics),
    FieldOfView {
        width: u32,
        height: u32,
        hfov_deg: f64,
        depth_scale: f64,
    },
}

impl CameraSpec {
    fn intrinsics(&self) -> tofplane::Result<CameraIntrinsics> {
        match *self {
            CameraSpec::Intrinsics(i) => i.validate().map(|_| i),
            CameraSpec::FieldOfView {
                width,
                height,
                hfov_deg,
                depth_scale,
            } => intrinsics_for(width, height, hfov_deg, depth_scale),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct NamedScene {
    pub name: String,
    /// Renders `name_000.png`, `name_001.png`, ... with seeds `seed`, `seed + 1`, ...
    #[serde(default)]
    pub copies: Option<usize>,
    #[serde(flatten)]
    pub spec: SceneSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub camera: CameraSpec,
    #[serde(default)]
    pub pose: CameraPose,
    pub scenes: Vec<NamedScene>,
}

#[derive(Serialize)]
struct FloorSidecar {
    normal: [f64; 3],
    d: f64,
    floor_pixels: usize,
}

fn usage(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

/// Expands `copies` into concrete (stem, spec) jobs.
fn jobs(spec: &SimulationSpec) -> Result<Vec<(String, SceneSpec)>, Failure> {
    let mut out = Vec::new();
    for scene in &spec.scenes {
        if scene.name.is_empty() || scene.name.contains(['/', '\\']) {
            return Err(Failure::Usage(format!("invalid scene name {:?}", scene.name)));
        }
        match scene.copies {
            None => out.push((scene.name.clone(), scene.spec.clone())),
            Some(0) => {
                return Err(Failure::Usage(format!(
                    "scene {}: copies must be at least 1",
                    scene.name
                )))
            }
            Some(n) => out.extend((0..n).map(|k| {
                let mut s = scene.spec.clone();
                s.seed = s.seed.wrapping_add(k as u64);
                (format!("{}_{k:03}", scene.name), s)
            })),
        }
    }
    let mut seen = BTreeSet::new();
    if let Some((dup, _)) = out.iter().find(|(n, _)| !seen.insert(n.clone())) {
        return Err(Failure::Usage(format!("duplicate frame name {dup}")));
    }
    if out.is_empty() {
        return Err(Failure::Usage("scene list is empty".into()));
    }
    Ok(out)
}

fn write_frame(out: &Path, stem: &str, frame: &SyntheticFrame) -> Result<(), Failure> {
    io::write_depth_png(&out.join(format!("{stem}.png")), &frame.image)?;
    let truth = out.join(TRUTH_DIR);
    let img = &frame.image;
    io::write_mask_png(
        &truth.join(format!("{stem}.mask.png")),
        img.width(),
        img.height(),
        &frame.floor_mask,
    )?;
    let n = frame.analytic_floor.normal;
    let sidecar = FloorSidecar {
        normal: [n.x, n.y, n.z],
        d: frame.analytic_floor.d,
        floor_pixels: frame.floor_pixel_count(),
    };
    let path = truth.join(format!("{stem}.floor.json"));
    let mut text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| usage(&path, e))
}

pub fn simulate(cfg: &RunConfig) -> Result<(), Failure> {
    let spec_path = cfg.require_input()?;
    let out = cfg.require_output()?;
    let text = fs::read_to_string(spec_path).map_err(|e| usage(spec_path, e))?;
    let spec: SimulationSpec = serde_json::from_str(&text).map_err(|e| usage(spec_path, e))?;
    let intr = spec.camera.intrinsics()?;
    let jobs = jobs(&spec)?;

    let frames: Vec<_> = jobs
        .par_iter()
        .map(|(stem, scene)| render_scene(scene, &intr, &spec.pose).map_err(|e| Failure::Usage(format!("{stem}: {e}"))))
        .collect::<Result<_, _>>()?;

    let truth = out.join(TRUTH_DIR);
    fs::create_dir_all(&truth).map_err(|e| usage(&truth, e))?;
    io::write_intrinsics(&out.join(INTRINSICS_FILE), &intr)?;
    for ((stem, _), frame) in jobs.iter().zip(&frames) {
        write_frame(out, stem, frame)?;
        println!(
            "{stem}.png  valid {}  floor {}",
            frame.image.valid_count(),
            frame.floor_pixel_count()
        );
    }
    Ok(())
}
