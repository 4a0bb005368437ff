//! Shared fixtures for the pipeline benchmarks.

use tofplane::geometry::{depth_to_pointcloud, DepthImage, PointCloud};
use tofplane::ransac::RansacConfig;
use tofplane::synth::{intrinsics_for, render_scene, CameraPose, SceneSpec};

/// QVGA bowed-floor frame with 5 mm range noise.
pub fn bowed_frame(seed: u64) -> DepthImage {
    let intr = intrinsics_for(320, 240, 70.0, 0.001).expect("valid intrinsics");
    render_scene(
        &SceneSpec::bowed_floor(0.08, 0.005, seed),
        &intr,
        &CameraPose::default(),
    )
    .expect("camera above floor")
    .image
}

pub fn bowed_cloud(seed: u64) -> PointCloud {
    depth_to_pointcloud(&bowed_frame(seed))
}

/// Metric loose/tight settings for the synthetic scenes.
pub fn stages() -> (RansacConfig, RansacConfig) {
    (RansacConfig::new(0.1, 20.0), RansacConfig::new(0.03, 15.0))
}
