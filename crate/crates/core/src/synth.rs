//! Synthetic ToF frames: a square floor patch whose surface curls up towards
//! its corners (the geometric symptom of multipath interference), optional
//! box clutter, and Gaussian range noise.
//!
//! The world frame is X right, Y forward, Z up. The floor surface is
//! `z = floor_height + bow(x, y)` for `|x|, |y| ≤ extent / 2`.

use nalgebra::{Isometry3, Rotation3, Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthImage, PlaneModel, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BowProfile {
    #[default]
    Quadratic,
    Quartic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutterBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl ClutterBox {
    /// Slab test; nearest positive ray parameter.
    fn hit(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        for k in 0..3 {
            if dir[k].abs() < 1e-15 {
                if origin[k] < self.min[k] || origin[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            let a = (self.min[k] - origin[k]) / dir[k];
            let b = (self.max[k] - origin[k]) / dir[k];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        if t0 > t1 || t1 <= 0.0 {
            return None;
        }
        Some(if t0 > 0.0 { t0 } else { t1 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// World height of the undistorted floor.
    pub floor_height: f64,
    /// Peak upward deviation of the curl, reached at the patch corners.
    pub bow_amplitude: f64,
    #[serde(default)]
    pub bow_profile: BowProfile,
    /// Standard deviation of the range noise, truncated at 4σ.
    pub noise_sigma: f64,
    #[serde(default)]
    pub clutter: Vec<ClutterBox>,
    /// Side length of the square floor patch.
    pub extent: f64,
    pub seed: u64,
}

impl SceneSpec {
    /// 4 m floor patch at height 0 with the given curl and noise.
    pub fn bowed_floor(bow_amplitude: f64, noise_sigma: f64, seed: u64) -> Self {
        SceneSpec {
            floor_height: 0.0,
            bow_amplitude,
            bow_profile: BowProfile::Quadratic,
            noise_sigma,
            clutter: Vec::new(),
            extent: 4.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScene(m.to_string()));
        if !self.floor_height.is_finite() {
            return bad("floor_height must be finite");
        }
        if !(self.bow_amplitude >= 0.0 && self.bow_amplitude.is_finite()) {
            return bad("bow_amplitude must be non-negative");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative");
        }
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return bad("extent must be positive");
        }
        if self.clutter.iter().any(|b| (0..3).any(|k| !(b.min[k] < b.max[k]))) {
            return bad("clutter box with min >= max");
        }
        Ok(())
    }

    /// Curl height above the flat floor at world `(x, y)`.
    pub fn bow(&self, x: f64, y: f64) -> f64 {
        let rho = (x * x + y * y).sqrt() / (self.extent / std::f64::consts::SQRT_2);
        let rho2 = rho * rho;
        match self.bow_profile {
            BowProfile::Quadratic => self.bow_amplitude * rho2,
            BowProfile::Quartic => self.bow_amplitude * rho2 * rho2,
        }
    }

    fn on_patch(&self, x: f64, y: f64) -> bool {
        let h = self.extent / 2.0;
        x.abs() <= h && y.abs() <= h
    }

    /// First intersection of a downward ray with the curled floor.
    fn floor_hit(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        if dir.z >= -1e-12 {
            return None;
        }
        // Surface lies between floor_height and floor_height + bow_amplitude.
        let mut lo = ((self.floor_height + self.bow_amplitude - origin.z) / dir.z).max(0.0);
        let mut hi = (self.floor_height - origin.z) / dir.z;
        let gap = |t: f64| {
            let p = origin + dir * t;
            p.z - self.floor_height - self.bow(p.x, p.y)
        };
        if self.bow_amplitude > 0.0 {
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if gap(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let p = origin + dir * hi;
        self.on_patch(p.x, p.y).then_some(hi)
    }
}

/// Camera placement: position in the world plus a downward pitch and a roll
/// about the optical axis. Zero pitch looks along world +Y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: [f64; 3],
    pub pitch_deg: f64,
    #[serde(default)]
    pub roll_deg: f64,
}

impl Default for CameraPose {
    /// Robot-height camera behind the patch, tilted slightly down.
    fn default() -> Self {
        CameraPose {
            position: [0.0, -2.2, 0.8],
            pitch_deg: 12.0,
            roll_deg: 0.0,
        }
    }
}

impl CameraPose {
    /// Camera-to-world transform (camera frame: X right, Y down, Z forward).
    pub fn camera_to_world(&self) -> Isometry3<f64> {
        // Level camera: x_c → x_w, y_c → −z_w, z_c → y_w.
        let level = Rotation3::from_matrix_unchecked(nalgebra::Matrix3::new(
            1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, //
            0.0, -1.0, 0.0,
        ));
        let pitch = Rotation3::from_axis_angle(&Vector3::x_axis(), -self.pitch_deg.to_radians());
        let roll = Rotation3::from_axis_angle(&Vector3::z_axis(), self.roll_deg.to_radians());
        let r = pitch * level * roll;
        Isometry3::from_parts(
            Translation3::from(Vector3::from(self.position)),
            UnitQuaternion::from_rotation_matrix(&r),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFrame {
    pub image: DepthImage,
    /// Un-curled floor in the camera frame, normal oriented towards +Y (down).
    pub analytic_floor: PlaneModel,
    /// Row-major; true where the stored depth comes from the floor.
    pub floor_mask: Vec<bool>,
}

impl SyntheticFrame {
    pub fn floor_pixel_count(&self) -> usize {
        self.floor_mask.iter().filter(|&&m| m).count()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Hit {
    Floor,
    Clutter,
}

/// Ray-casts every pixel; deterministic in `spec.seed`.
pub fn render_scene(spec: &SceneSpec, intr: &CameraIntrinsics, pose: &CameraPose) -> Result<SyntheticFrame> {
    spec.validate()?;
    intr.validate()?;
    let iso = pose.camera_to_world();
    let origin = iso.translation.vector;
    if origin.z <= spec.floor_height {
        return Err(Error::CameraBelowFloor);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise =
        Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).map_err(|e| Error::InvalidScene(e.to_string()))?;
    let clip = 4.0 * spec.noise_sigma;

    let mut image = DepthImage::zeros(*intr);
    let mut floor_mask = vec![false; intr.pixel_count()];
    for v in 0..intr.height {
        for u in 0..intr.width {
            // Drawn for every pixel so the noise field does not depend on geometry.
            let n = if spec.noise_sigma > 0.0 {
                noise.sample(&mut rng).clamp(-clip, clip)
            } else {
                let _: f64 = rng.random();
                0.0
            };
            let ray_c = intr.ray(u, v);
            let dir = iso.rotation * ray_c;

            let mut best: Option<(f64, Hit)> = spec.floor_hit(&origin, &dir).map(|t| (t, Hit::Floor));
            for b in &spec.clutter {
                if let Some(t) = b.hit(&origin, &dir) {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, Hit::Clutter));
                    }
                }
            }
            let Some((t, hit)) = best else { continue };
            // Ray parameter equals optical-axis depth because ray_c.z = 1;
            // the noise is along the ray.
            let z = t + n / ray_c.norm();
            let raw = (z / intr.depth_scale).round();
            if !(raw >= 1.0 && raw <= u16::MAX as f64) {
                continue;
            }
            image.set(u, v, raw as u16);
            if hit == Hit::Floor {
                floor_mask[v as usize * intr.width as usize + u as usize] = true;
            }
        }
    }

    let up_c = iso.rotation.inverse() * Vector3::z();
    let floor = PlaneModel::from_normal(up_c, origin.z - spec.floor_height)?;
    let analytic_floor = if floor.normal.y < 0.0 { floor.flipped() } else { floor };

    Ok(SyntheticFrame {
        image,
        analytic_floor,
        floor_mask,
    })
}

/// Pinhole intrinsics with the principal point at the image center.
pub fn intrinsics_for(width: u32, height: u32, hfov_deg: f64, depth_scale: f64) -> Result<CameraIntrinsics> {
    let f = width as f64 / 2.0 / (hfov_deg.to_radians() / 2.0).tan();
    CameraIntrinsics::new(
        f,
        f,
        (width as f64 - 1.0) / 2.0,
        (height as f64 - 1.0) / 2.0,
        width,
        height,
        depth_scale,
    )
}

/// Points of the masked pixels, in camera coordinates.
pub fn masked_points(img: &DepthImage, mask: &[bool]) -> Vec<Point3> {
    img.pixels()
        .zip(mask)
        .filter(|((_, raw), &m)| m && *raw != 0)
        .map(|((px, raw), _)| {
            img.intrinsics()
                .unproject(px.u, px.v, raw as f64 * img.intrinsics().depth_scale)
        })
        .collect()
}
