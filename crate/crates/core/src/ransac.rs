//! Axis-constrained RANSAC plane fitting and the loose/tight two-stage
//! ground-floor extraction.
//!
//! Candidates whose normal is further than `max_axis_angle` from `axis` are
//! rejected before their inliers are counted. Every round draws its sample
//! from its own ChaCha stream keyed by `(seed, round)`, so rounds are scored
//! in parallel and the result does not depend on the thread count.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PlaneModel, Point3, PointCloud};

pub const DEFAULT_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    /// Inlier band half-width, in the cloud's linear unit.
    pub distance_threshold: f64,
    /// Maximum angle between the plane normal and `axis`, in degrees.
    pub max_axis_angle: f64,
    pub axis: [f64; 3],
    pub iterations: usize,
    pub seed: u64,
}

impl RansacConfig {
    pub fn new(distance_threshold: f64, max_axis_angle: f64) -> Self {
        RansacConfig {
            distance_threshold,
            max_axis_angle,
            axis: [0.0, 1.0, 0.0],
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
        }
    }

    /// First-stage settings of the planar correction algorithm (th 1.7, 20°).
    pub fn loose() -> Self {
        Self::new(1.7, 20.0)
    }

    /// Second-stage settings of the planar correction algorithm (th 1.3, 15°).
    pub fn tight() -> Self {
        Self::new(1.3, 15.0)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_axis(mut self, axis: [f64; 3]) -> Self {
        self.axis = axis;
        self
    }

    pub fn axis_vector(&self) -> Vector3<f64> {
        Vector3::from(self.axis)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.distance_threshold > 0.0 && self.distance_threshold.is_finite()) {
            return bad("distance_threshold must be positive");
        }
        if !(self.max_axis_angle > 0.0 && self.max_axis_angle <= 90.0) {
            return bad("max_axis_angle must be in (0, 90]");
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if (self.axis_vector().norm() - 1.0).abs() > 1e-9 {
            return bad("axis must be unit length");
        }
        Ok(())
    }

    fn min_axis_cosine(&self) -> f64 {
        self.max_axis_angle.to_radians().cos()
    }
}

/// Winning candidate of the consensus stage, before least-squares refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct Consensus {
    pub plane: PlaneModel,
    pub round: usize,
    pub sample: [usize; 3],
}

impl Consensus {
    pub fn inlier_count(&self) -> usize {
        self.plane.inliers.len()
    }
}

fn triple_count(n: usize) -> u128 {
    let n = n as u128;
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

/// Plane through three points, oriented towards `axis`; `None` when collinear.
pub fn plane_from_triple(a: &Point3, b: &Point3, c: &Point3, axis: &Vector3<f64>) -> Option<PlaneModel> {
    let e1 = b - a;
    let e2 = c - a;
    let cross = e1.cross(&e2);
    let norm = cross.norm();
    if !(norm > 1e-12 * e1.norm() * e2.norm()) {
        return None;
    }
    let mut n = cross / norm;
    if n.dot(axis) < 0.0 {
        n = -n;
    }
    Some(PlaneModel {
        normal: n,
        d: -n.dot(a),
        inliers: Vec::new(),
    })
}

fn count_inliers(points: &[Point3], plane: &PlaneModel, threshold: f64) -> usize {
    points
        .iter()
        .filter(|p| plane.signed_distance(p).abs() <= threshold)
        .count()
}

pub fn inliers_of(points: &[Point3], plane: &PlaneModel, threshold: f64) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| plane.signed_distance(p).abs() <= threshold)
        .map(|(i, _)| i)
        .collect()
}

fn sample_triple(seed: u64, round: usize, n: usize) -> [usize; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round as u64);
    let idx = index::sample(&mut rng, n, 3);
    [idx.index(0), idx.index(1), idx.index(2)]
}

/// Scores candidate planes and returns the one with the most inliers; ties go
/// to the earliest round.
///
/// When `cfg.iterations` is at least the number of distinct point triples,
/// every triple is enumerated once in lexicographic order instead of sampled.
pub fn consensus(pcd: &PointCloud, cfg: &RansacConfig) -> Result<Consensus> {
    cfg.validate()?;
    let points = &pcd.points;
    let n = points.len();
    if n < 3 {
        return Err(Error::DegenerateInput);
    }
    let axis = cfg.axis_vector();
    let min_cos = cfg.min_axis_cosine();

    let exhaustive = cfg.iterations as u128 >= triple_count(n);
    let samples: Vec<[usize; 3]> = if exhaustive {
        let mut all = Vec::with_capacity(triple_count(n) as usize);
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    all.push([i, j, k]);
                }
            }
        }
        all
    } else {
        (0..cfg.iterations)
            .into_par_iter()
            .map(|r| sample_triple(cfg.seed, r, n))
            .collect()
    };

    let best = samples
        .par_iter()
        .enumerate()
        .filter_map(|(round, s)| {
            let plane = plane_from_triple(&points[s[0]], &points[s[1]], &points[s[2]], &axis)?;
            if plane.normal.dot(&axis) < min_cos {
                return None;
            }
            let count = count_inliers(points, &plane, cfg.distance_threshold);
            Some((count, round, plane))
        })
        .reduce_with(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });

    let (_, round, plane) = best.ok_or(Error::NoConstrainedPlane)?;
    let inliers = inliers_of(points, &plane, cfg.distance_threshold);
    Ok(Consensus {
        plane: plane.with_inliers(inliers),
        round,
        sample: samples[round],
    })
}

/// Total least-squares plane: through the centroid, normal along the
/// smallest-eigenvalue eigenvector of the scatter matrix.
pub fn least_squares_plane(points: &[Point3]) -> Option<PlaneModel> {
    if points.len() < 3 {
        return None;
    }
    let centroid = points.iter().sum::<Point3>() / points.len() as f64;
    let scatter = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let q = p - centroid;
        acc + q * q.transpose()
    });
    let eig = SymmetricEigen::new(scatter);
    let (imin, _) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    let normal: Vector3<f64> = eig.eigenvectors.column(imin).into_owned();
    PlaneModel::through_point(normal, &centroid).ok()
}

/// Constrained RANSAC followed by one least-squares refit on the consensus
/// inliers and a final inlier recount under the refit plane.
///
/// The refit is discarded in favour of the consensus plane if it breaks the
/// axis constraint.
pub fn fit_plane_ransac(pcd: &PointCloud, cfg: &RansacConfig) -> Result<PlaneModel> {
    let best = consensus(pcd, cfg)?;
    let axis = cfg.axis_vector();
    let support: Vec<Point3> = best.plane.inliers.iter().map(|&i| pcd.points[i]).collect();
    let refit = least_squares_plane(&support).map(|p| if p.normal.dot(&axis) < 0.0 { p.flipped() } else { p });
    match refit {
        Some(plane) if plane.normal.dot(&axis) >= cfg.min_axis_cosine() => {
            let inliers = inliers_of(&pcd.points, &plane, cfg.distance_threshold);
            Ok(plane.with_inliers(inliers))
        }
        _ => Ok(best.plane),
    }
}

/// Result of the loose/tight extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundExtraction {
    /// Permissive fit; its inliers include the MPI-curved floor points.
    pub loose: PlaneModel,
    /// Strict fit; its coefficients approximate the true floor.
    pub tight: PlaneModel,
}

impl GroundExtraction {
    pub fn loose_inliers(&self) -> &[usize] {
        &self.loose.inliers
    }

    pub fn tight_plane(&self) -> &PlaneModel {
        &self.tight
    }
}

/// Runs the loose then the tight fit, both on the full cloud.
pub fn two_stage_ground_extraction(
    pcd: &PointCloud,
    loose: &RansacConfig,
    tight: &RansacConfig,
) -> Result<GroundExtraction> {
    if loose.distance_threshold < tight.distance_threshold || loose.max_axis_angle < tight.max_axis_angle {
        log::warn!(
            "loose stage (th {}, {}°) is stricter than tight stage (th {}, {}°)",
            loose.distance_threshold,
            loose.max_axis_angle,
            tight.distance_threshold,
            tight.max_axis_angle
        );
    }
    let loose = fit_plane_ransac(pcd, loose)?;
    let tight = fit_plane_ransac(pcd, tight)?;
    Ok(GroundExtraction { loose, tight })
}
