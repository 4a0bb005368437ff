//! Planar multipath-interference correction for pulse-based ToF cameras.
//!
//! MPI bends large planar surfaces, most visibly the floor, into curved
//! sheets. This crate turns raw depth frames into rectified ground truth by
//! locating the floor with an axis-constrained two-stage RANSAC and replacing
//! it with its best planar approximation. It also provides the point-cloud
//! loss family used to train a correction network on those pairs, the
//! curvature-gradient score used to evaluate the result, and a synthetic
//! scene generator for testing.
//!
//! ```
//! use tofplane::prelude::*;
//!
//! let intr = synth::intrinsics_for(64, 48, 70.0, 0.001).unwrap();
//! let frame = render_scene(&SceneSpec::bowed_floor(0.08, 0.005, 1), &intr, &CameraPose::default()).unwrap();
//! let loose = RansacConfig::new(0.1, 20.0).with_iterations(200);
//! let tight = RansacConfig::new(0.03, 15.0).with_iterations(200);
//! let gt = rectify_frame(&frame.image, &loose, &tight).unwrap();
//! assert!(gt.valid_count() <= frame.image.valid_count());
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod ransac;
pub mod synth;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::dataset::{build_dataset, rectify_frame, DatasetManifest, DatasetOptions, FrameStatus};
    pub use crate::error::{Error, Result};
    pub use crate::geometry::{
        align_plane_to_xy, depth_to_pointcloud, pointcloud_to_depth, project_points_to_plane, CameraIntrinsics,
        DepthImage, Pixel, PlaneModel, Point3, PointCloud,
    };
    pub use crate::metrics::{curvature_gradient, evaluate_plane_set, loss_components, CurvatureReport, LossBreakdown};
    pub use crate::ransac::{fit_plane_ransac, two_stage_ground_extraction, RansacConfig};
    pub use crate::synth::{self, render_scene, CameraPose, SceneSpec};
}
