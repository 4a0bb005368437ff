//! Pinhole camera geometry: depth image <-> point cloud, orthogonal projection
//! onto planes and rigid alignment of a plane with the XY coordinate plane.
//!
//! The camera frame is image-style: +X right, +Y down, +Z forward along the
//! optical axis. Stored depth is the optical-axis depth (z), not the ray length.

use nalgebra::{Isometry3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = Vector3<f64>;

/// Pinhole intrinsics plus the metric size of one stored depth unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Meters per stored depth unit.
    pub depth_scale: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32, depth_scale: f64) -> Result<Self> {
        let intr = CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            depth_scale,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidIntrinsics(m.to_string()));
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return bad("focal lengths must be positive");
        }
        if !(self.depth_scale > 0.0 && self.depth_scale.is_finite()) {
            return bad("depth_scale must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image dimensions must be nonzero");
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return bad("cx outside image");
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad("cy outside image");
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Ray through pixel `(u, v)` scaled so that its z component is 1.
    pub fn ray(&self, u: u32, v: u32) -> Point3 {
        Point3::new((u as f64 - self.cx) / self.fx, (v as f64 - self.cy) / self.fy, 1.0)
    }

    /// Back-projects pixel `(u, v)` at optical-axis depth `z` meters.
    pub fn unproject(&self, u: u32, v: u32, z: f64) -> Point3 {
        self.ray(u, v) * z
    }

    /// Nearest pixel hit by `p`, or `None` when behind the camera or out of frame.
    pub fn project(&self, p: &Point3) -> Option<Pixel> {
        if !(p.z > 0.0) {
            return None;
        }
        let u = (self.fx * p.x / p.z + self.cx).round();
        let v = (self.fy * p.y / p.z + self.cy).round();
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some(Pixel::new(u as u32, v as u32))
    }

    /// Quantizes a metric depth to storage units, clamped to `1..=u16::MAX`.
    pub fn quantize(&self, z: f64) -> u16 {
        (z / self.depth_scale).round().clamp(1.0, u16::MAX as f64) as u16
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pixel {
    pub u: u32,
    pub v: u32,
}

impl Pixel {
    pub fn new(u: u32, v: u32) -> Self {
        Pixel { u, v }
    }
}

/// Row-major 16-bit depth map; 0 marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    data: Vec<u16>,
    intrinsics: CameraIntrinsics,
}

impl DepthImage {
    pub fn new(data: Vec<u16>, intrinsics: CameraIntrinsics) -> Result<Self> {
        intrinsics.validate()?;
        if data.len() != intrinsics.pixel_count() {
            return Err(Error::InvalidImage(format!(
                "expected {}x{} = {} pixels, got {}",
                intrinsics.width,
                intrinsics.height,
                intrinsics.pixel_count(),
                data.len()
            )));
        }
        Ok(DepthImage { data, intrinsics })
    }

    pub fn zeros(intrinsics: CameraIntrinsics) -> Self {
        DepthImage {
            data: vec![0; intrinsics.pixel_count()],
            intrinsics,
        }
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn width(&self) -> u32 {
        self.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.intrinsics.height
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u16> {
        self.data
    }

    fn offset(&self, u: u32, v: u32) -> usize {
        v as usize * self.intrinsics.width as usize + u as usize
    }

    pub fn get(&self, u: u32, v: u32) -> u16 {
        self.data[self.offset(u, v)]
    }

    pub fn set(&mut self, u: u32, v: u32, value: u16) {
        let i = self.offset(u, v);
        self.data[i] = value;
    }

    /// Metric depth of a pixel, `None` when invalid.
    pub fn depth_m(&self, u: u32, v: u32) -> Option<f64> {
        match self.get(u, v) {
            0 => None,
            raw => Some(raw as f64 * self.intrinsics.depth_scale),
        }
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| d != 0).count()
    }

    pub fn pixels(&self) -> impl Iterator<Item = (Pixel, u16)> + '_ {
        let w = self.intrinsics.width;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, &d)| (Pixel::new(i as u32 % w, i as u32 / w), d))
    }
}

/// Ordered 3D points in meters, optionally tagged with their source pixel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub pixel_index: Option<Vec<Pixel>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Point3>) -> Self {
        PointCloud {
            points,
            pixel_index: None,
        }
    }

    pub fn with_pixels(points: Vec<Point3>, pixels: Vec<Pixel>) -> Self {
        assert_eq!(points.len(), pixels.len(), "one pixel per point");
        PointCloud {
            points,
            pixel_index: Some(pixels),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sub-cloud of the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            pixel_index: self
                .pixel_index
                .as_ref()
                .map(|px| indices.iter().map(|&i| px[i]).collect()),
        }
    }

    pub fn pixel(&self, i: usize) -> Option<Pixel> {
        self.pixel_index.as_ref().map(|px| px[i])
    }

    fn map_points(&self, f: impl Fn(&Point3) -> Point3) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(f).collect(),
            pixel_index: self.pixel_index.clone(),
        }
    }

    pub fn transformed(&self, iso: &Isometry3<f64>) -> PointCloud {
        self.map_points(|p| iso.transform_vector(p) + iso.translation.vector)
    }
}

/// Plane `a·x + b·y + c·z + d = 0` with unit normal `(a, b, c)`, plus the
/// indices of the points it was fitted to.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneModel {
    pub normal: Vector3<f64>,
    pub d: f64,
    pub inliers: Vec<usize>,
}

impl PlaneModel {
    /// Normalizes `(a, b, c, d)` so the normal has unit length.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Self::from_normal(Vector3::new(a, b, c), d)
    }

    pub fn from_normal(normal: Vector3<f64>, d: f64) -> Result<Self> {
        let norm = normal.norm();
        if !(norm > 1e-12) || !norm.is_finite() || !d.is_finite() {
            return Err(Error::InvalidPlane);
        }
        Ok(PlaneModel {
            normal: normal / norm,
            d: d / norm,
            inliers: Vec::new(),
        })
    }

    /// Plane with unit `normal` through `point`.
    pub fn through_point(normal: Vector3<f64>, point: &Point3) -> Result<Self> {
        let n = normal.try_normalize(1e-12).ok_or(Error::InvalidPlane)?;
        Ok(PlaneModel {
            normal: n,
            d: -n.dot(point),
            inliers: Vec::new(),
        })
    }

    pub fn with_inliers(mut self, inliers: Vec<usize>) -> Self {
        self.inliers = inliers;
        self
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.normal.x, self.normal.y, self.normal.z, self.d]
    }

    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal.dot(p) + self.d
    }

    pub fn is_unit(&self) -> bool {
        (self.normal.norm_squared() - 1.0).abs() <= 1e-9
    }

    /// Same plane with the normal flipped.
    pub fn flipped(&self) -> PlaneModel {
        PlaneModel {
            normal: -self.normal,
            d: -self.d,
            inliers: self.inliers.clone(),
        }
    }

    /// Optical-axis depth at which `ray` (z component 1) meets the plane.
    pub fn ray_depth(&self, ray: &Point3) -> Option<f64> {
        let denom = self.normal.dot(ray);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = -self.d / denom;
        (t > 0.0 && t.is_finite()).then_some(t * ray.z)
    }

    pub fn transformed(&self, iso: &Isometry3<f64>) -> PlaneModel {
        let n = iso.rotation * self.normal;
        PlaneModel {
            normal: n,
            d: self.d - n.dot(&iso.translation.vector),
            inliers: self.inliers.clone(),
        }
    }
}

/// One point per valid pixel, in row-major order, with pixel provenance.
pub fn depth_to_pointcloud(img: &DepthImage) -> PointCloud {
    let intr = img.intrinsics();
    let mut points = Vec::with_capacity(img.valid_count());
    let mut pixels = Vec::with_capacity(points.capacity());
    for (px, raw) in img.pixels() {
        if raw == 0 {
            continue;
        }
        points.push(intr.unproject(px.u, px.v, raw as f64 * intr.depth_scale));
        pixels.push(px);
    }
    PointCloud::with_pixels(points, pixels)
}

/// Z-buffered rasterization: each point lands on its nearest pixel and the
/// smallest depth wins. Points behind the camera or out of frame are dropped.
pub fn pointcloud_to_depth(pcd: &PointCloud, intr: &CameraIntrinsics) -> DepthImage {
    let mut zbuf = vec![f64::INFINITY; intr.pixel_count()];
    for p in &pcd.points {
        if let Some(px) = intr.project(p) {
            let slot = &mut zbuf[px.v as usize * intr.width as usize + px.u as usize];
            if p.z < *slot {
                *slot = p.z;
            }
        }
    }
    finish_zbuffer(&zbuf, intr)
}

/// Like [`pointcloud_to_depth`] but writes each point to its recorded source
/// pixel instead of re-projecting it. Falls back to projection for clouds
/// without provenance.
pub fn pointcloud_to_depth_by_provenance(pcd: &PointCloud, intr: &CameraIntrinsics) -> DepthImage {
    let Some(pixels) = &pcd.pixel_index else {
        return pointcloud_to_depth(pcd, intr);
    };
    let mut zbuf = vec![f64::INFINITY; intr.pixel_count()];
    for (p, px) in pcd.points.iter().zip(pixels) {
        if !(p.z > 0.0) || px.u >= intr.width || px.v >= intr.height {
            continue;
        }
        let slot = &mut zbuf[px.v as usize * intr.width as usize + px.u as usize];
        if p.z < *slot {
            *slot = p.z;
        }
    }
    finish_zbuffer(&zbuf, intr)
}

fn finish_zbuffer(zbuf: &[f64], intr: &CameraIntrinsics) -> DepthImage {
    let data = zbuf
        .iter()
        .map(|&z| if z.is_finite() { intr.quantize(z) } else { 0 })
        .collect();
    DepthImage {
        data,
        intrinsics: *intr,
    }
}

/// Orthogonal projection `p - (n·p + d) n` of every point; order and pixel
/// provenance are preserved.
pub fn project_points_to_plane(pcd: &PointCloud, plane: &PlaneModel) -> PointCloud {
    let n = plane.normal;
    pcd.map_points(|p| p - n * (n.dot(p) + plane.d))
}

/// Rigid transform that rotates the plane normal onto +Z by the minimal
/// rotation and then shifts the plane onto `z = 0`.
pub fn plane_alignment(plane: &PlaneModel) -> Result<Isometry3<f64>> {
    let norm = plane.normal.norm();
    if !(norm > 1e-12) || !norm.is_finite() {
        return Err(Error::InvalidPlane);
    }
    let n = plane.normal / norm;
    let d = plane.d / norm;
    let z = Vector3::z();
    let rotation = if n.dot(&z) < -1.0 + 1e-15 {
        Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI)
    } else {
        Rotation3::rotation_between(&n, &z).unwrap_or_else(Rotation3::identity)
    };
    // Rotated plane is z + d = 0.
    Ok(Isometry3::from_parts(
        Translation3::new(0.0, 0.0, d),
        UnitQuaternion::from_rotation_matrix(&rotation),
    ))
}

/// Moves the cloud so that `plane` becomes the XY plane with its normal on +Z.
/// After alignment each point's z equals its signed distance to the plane.
pub fn align_plane_to_xy(pcd: &PointCloud, plane: &PlaneModel) -> Result<PointCloud> {
    let iso = plane_alignment(plane)?;
    Ok(pcd.transformed(&iso))
}
