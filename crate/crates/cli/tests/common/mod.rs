#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tofplane::geometry::{pointcloud_to_depth, CameraIntrinsics, PointCloud};
use tofplane::io::{self, INTRINSICS_FILE};
use tofplane::synth::{intrinsics_for, render_scene, CameraPose, SceneSpec};

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn tofplane(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_tofplane"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Metric thresholds matching the synthetic scenes' meter units.
pub const RANSAC_FLAGS: [&str; 10] = [
    "--loose-th",
    "0.1",
    "--loose-angle",
    "20",
    "--tight-th",
    "0.03",
    "--tight-angle",
    "15",
    "--iterations",
    "300",
];

pub fn with_ransac<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(RANSAC_FLAGS).collect()
}

pub fn small_intrinsics() -> CameraIntrinsics {
    intrinsics_for(64, 48, 70.0, 0.001).unwrap()
}

/// Writes `n` bowed-floor frames with 5 mm range noise plus intrinsics into `dir`.
pub fn write_bowed_set(dir: &Path, n: usize, bow: f64, intr: &CameraIntrinsics) {
    write_scene_set(dir, n, bow, 0.005, intr);
}

pub fn write_scene_set(dir: &Path, n: usize, bow: f64, noise: f64, intr: &CameraIntrinsics) {
    fs::create_dir_all(dir).unwrap();
    io::write_intrinsics(&dir.join(INTRINSICS_FILE), intr).unwrap();
    for i in 0..n {
        let spec = SceneSpec::bowed_floor(bow, noise, 100 + i as u64);
        let f = render_scene(&spec, intr, &CameraPose::default()).unwrap();
        io::write_depth_png(&dir.join(format!("frame_{i:03}.png")), &f.image).unwrap();
    }
}

/// A frame that sees only a fronto-parallel wall.
pub fn write_wall(dir: &Path, name: &str, intr: &CameraIntrinsics) {
    let pts = (0..intr.height)
        .flat_map(|v| (0..intr.width).map(move |u| (u, v)))
        .map(|(u, v)| intr.unproject(u, v, 2.5))
        .collect();
    let img = pointcloud_to_depth(&PointCloud::from_points(pts), intr);
    io::write_depth_png(&dir.join(name), &img).unwrap();
}

/// Copies every frame of `src` into `dst` with each depth value doubled.
pub fn write_doubled(src: &Path, dst: &Path, intr: &CameraIntrinsics) {
    fs::create_dir_all(dst).unwrap();
    io::write_intrinsics(&dst.join(INTRINSICS_FILE), intr).unwrap();
    for name in io::list_depth_pngs(src).unwrap() {
        let img = io::read_depth_png(&src.join(&name), intr).unwrap();
        let data = img
            .data()
            .iter()
            .map(|&d| d.checked_mul(2).expect("depth fits after doubling"))
            .collect();
        let doubled = tofplane::geometry::DepthImage::new(data, *intr).unwrap();
        io::write_depth_png(&dst.join(&name), &doubled).unwrap();
    }
}

/// All regular files under `dir` (recursive), sorted, with their bytes.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

pub fn count_png(dir: &Path) -> usize {
    io::list_depth_pngs(dir).unwrap().len()
}
