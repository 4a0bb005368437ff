//! Acceptance suite. Runs every primary criterion at its stated tolerance and
//! budget, prints one PASS/FAIL line each, and exits non-zero if any failed.

mod common;

use std::fs;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::{Isometry3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tofplane::dataset::rectify_frame;
use tofplane::geometry::{depth_to_pointcloud, pointcloud_to_depth, PlaneModel, Point3, PointCloud};
use tofplane::metrics::{curvature_gradient, evaluate_plane_set, image_losses, LossBreakdown, DEFAULT_LOSS_SCALE};
use tofplane::ransac::{consensus, RansacConfig};
use tofplane::synth::{intrinsics_for, render_scene, BowProfile, CameraPose, ClutterBox, SceneSpec};
use tofplane::Error;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(start: Instant, budget: Duration, detail: String) -> Outcome {
    let took = start.elapsed();
    check(
        took < budget,
        format!("{detail}, {:.2}s of {}s", took.as_secs_f64(), budget.as_secs()),
    )
}

fn round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0;
    let mut pixels = 0;
    for i in 0..100 {
        let (w, h) = (rng.random_range(48..=160), rng.random_range(36..=120));
        let intr = intrinsics_for(w, h, rng.random_range(50.0..90.0), 0.001).unwrap();
        let mut spec = SceneSpec::bowed_floor(rng.random_range(0.0..0.1), rng.random_range(0.0..0.01), i);
        if rng.random_bool(0.5) {
            spec.bow_profile = BowProfile::Quartic;
        }
        if rng.random_bool(0.5) {
            let x = rng.random_range(-1.0..0.5);
            spec.clutter.push(ClutterBox {
                min: [x, 0.3, 0.0],
                max: [x + 0.5, 1.0, rng.random_range(0.2..1.0)],
            });
        }
        let pose = CameraPose {
            position: [0.0, -2.2, rng.random_range(0.4..1.5)],
            pitch_deg: rng.random_range(5.0..30.0),
            roll_deg: rng.random_range(-5.0..5.0),
        };
        let img = render_scene(&spec, &intr, &pose).unwrap().image;
        let back = pointcloud_to_depth(&depth_to_pointcloud(&img), &intr);
        for (a, b) in img.data().iter().zip(back.data()) {
            if *a != 0 {
                pixels += 1;
                worst = worst.max((*a as i32 - *b as i32).abs());
            }
        }
    }
    let detail = format!("100 frames, {pixels} valid pixels, max |diff| {worst}");
    check(worst <= 1, detail.clone())?;
    within_budget(start, Duration::from_secs(10), detail)
}

/// Best constrained inlier count over all triples, computed independently.
fn brute_force_best(points: &[Point3], th: f64, angle_deg: f64) -> Option<usize> {
    let cos_min = angle_deg.to_radians().cos();
    let mut best: Option<usize> = None;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            for k in j + 1..points.len() {
                let (a, b, c) = (points[i], points[j], points[k]);
                let n = (b - a).cross(&(c - a));
                if n.norm() <= 1e-12 * (b - a).norm() * (c - a).norm() {
                    continue;
                }
                let n = n.normalize();
                if n.y.abs() < cos_min {
                    continue;
                }
                let d = -n.dot(&a);
                let count = points.iter().filter(|p| (n.dot(p) + d).abs() <= th).count();
                best = Some(best.map_or(count, |b| b.max(count)));
            }
        }
    }
    best
}

fn ransac_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    let mut unsatisfiable = 0;
    for case in 0..200 {
        let n = rng.random_range(3..=12);
        let on_plane = rng.random_range(0..=n);
        let (y0, tilt) = (rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5));
        let pts: Vec<Point3> = (0..n)
            .map(|i| {
                let (x, z) = (rng.random_range(-2.0..2.0), rng.random_range(0.5..4.0));
                let y = if i < on_plane {
                    y0 + tilt * x + rng.random_range(-0.02..0.02)
                } else {
                    rng.random_range(-2.0..2.0)
                };
                Point3::new(x, y, z)
            })
            .collect();
        let cfg = RansacConfig::new(0.05, 20.0).with_iterations(220).with_seed(case);
        let expect = brute_force_best(&pts, 0.05, 20.0);
        let got = match consensus(&PointCloud::from_points(pts), &cfg) {
            Ok(c) => Some(c.inlier_count()),
            Err(Error::NoConstrainedPlane | Error::DegenerateInput) => None,
            Err(e) => return Err(format!("case {case}: {e}")),
        };
        unsatisfiable += usize::from(expect.is_none());
        mismatches += usize::from(got != expect);
    }
    let detail = format!("200 clouds ({unsatisfiable} without a constrained plane), {mismatches} mismatches");
    check(mismatches == 0, detail.clone())?;
    within_budget(start, Duration::from_secs(30), detail)
}

fn rectification_efficacy() -> Outcome {
    let start = Instant::now();
    let intr = intrinsics_for(128, 96, 70.0, 0.001).unwrap();
    let loose = RansacConfig::new(0.1, 20.0).with_iterations(300);
    let tight = RansacConfig::new(0.03, 15.0).with_iterations(300);
    let mut raw = Vec::new();
    let mut rectified = Vec::new();
    for i in 0..50u64 {
        let img = render_scene(
            &SceneSpec::bowed_floor(0.08, 0.005, 1000 + i),
            &intr,
            &CameraPose::default(),
        )
        .unwrap()
        .image;
        let gt =
            rectify_frame(&img, &loose.with_seed(i), &tight.with_seed(i)).map_err(|e| format!("frame {i}: {e}"))?;
        raw.push((format!("{i}"), img));
        rectified.push((format!("{i}"), gt));
    }
    let before = evaluate_plane_set(&raw, &loose).unwrap();
    let after = evaluate_plane_set(&rectified, &loose).unwrap();
    let (b, a) = (before.mean().unwrap_or(f64::NAN), after.mean().unwrap_or(f64::NAN));
    let detail = format!(
        "raw mean {b:.4} ({} planes), rectified mean {a:.4} ({} planes)",
        before.per_plane.len(),
        after.per_plane.len()
    );
    check(b > 0.25 && a < 0.05 && after.per_plane.len() == 50, detail.clone())?;
    within_budget(start, Duration::from_secs(120), detail)
}

fn loss_laws() -> Outcome {
    let intr = small_intrinsics();
    let dir = tempfile::tempdir().unwrap();
    let (gt, doubled, out) = (
        dir.path().join("gt"),
        dir.path().join("doubled"),
        dir.path().join("out"),
    );
    write_bowed_set(&gt, 5, 0.08, &intr);
    write_doubled(&gt, &doubled, &intr);

    let read_rows = |pred: &std::path::Path| -> Result<Vec<serde_json::Value>, String> {
        let r = tofplane(&["losses", "--input", p(&gt), "--predicted", p(pred), "--output", p(&out)]);
        if r.code != 0 {
            return Err(format!("losses exited {}: {}", r.code, r.stderr));
        }
        let text = fs::read_to_string(out.join("losses.jsonl")).unwrap();
        Ok(text.lines().map(|l| serde_json::from_str(l).unwrap()).collect())
    };
    let self_rows = read_rows(&gt)?;
    let self_max = self_rows
        .iter()
        .map(|v| v["total"].as_f64().unwrap())
        .fold(0.0, f64::max);
    let dbl_rows = read_rows(&doubled)?;
    let dbl_err = dbl_rows
        .iter()
        .map(|v| (v["loss_rmse"].as_f64().unwrap() - 2f64.ln()).abs())
        .fold(0.0, f64::max);

    // Recompute the total from its components on perturbed pairs.
    let mut worst_rel: f64 = 0.0;
    for i in 0..20u64 {
        let a = render_scene(&SceneSpec::bowed_floor(0.08, 0.005, i), &intr, &CameraPose::default()).unwrap();
        let b = render_scene(
            &SceneSpec::bowed_floor(0.02, 0.01, i + 50),
            &intr,
            &CameraPose::default(),
        )
        .unwrap();
        let l: LossBreakdown = image_losses(&a.image, &b.image, DEFAULT_LOSS_SCALE).unwrap();
        let again = l.s * l.loss_rmse * (3.0 - l.loss_x.exp() - l.loss_y.exp() - l.loss_z.exp()).abs();
        worst_rel = worst_rel.max((l.total - again).abs() / again.abs().max(f64::MIN_POSITIVE));
    }
    check(
        self_rows.len() == 5 && self_max == 0.0 && dbl_rows.len() == 5 && dbl_err <= 1e-6 && worst_rel <= 1e-9,
        format!("self total max {self_max}, |rmse - ln 2| max {dbl_err:.2e}, total recompute rel err {worst_rel:.2e}"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (raw, gt, rep) = (dir.path().join("raw"), dir.path().join("gt"), dir.path().join("rep"));
    write_bowed_set(&raw, 6, 0.08, &small_intrinsics());
    write_wall(&raw, "wall.png", &small_intrinsics());

    let mut snaps = Vec::new();
    for jobs in ["1", "4", "4"] {
        let mut gen = with_ransac(&["generate-gt", "--input", p(&raw), "--output", p(&gt), "--seed", "7"]);
        gen.extend(["--jobs", jobs]);
        let g = tofplane(&gen);
        let mut eval = with_ransac(&[
            "evaluate",
            "--input",
            p(&raw),
            "--predicted",
            p(&gt),
            "--output",
            p(&rep),
        ]);
        eval.extend(["--seed", "7", "--jobs", jobs]);
        let e = tofplane(&eval);
        if g.code != 0 || e.code != 0 {
            return Err(format!("exit codes generate-gt {} evaluate {}", g.code, e.code));
        }
        snaps.push((snapshot(&gt), snapshot(&rep), g.stdout, e.stdout));
    }
    let files = snaps[0].0.len() + snaps[0].1.len();
    check(
        snaps.windows(2).all(|w| w[0] == w[1]),
        format!("3 runs (jobs 1/4/4), {files} output files byte-identical"),
    )
}

fn random_plane_and_points(rng: &mut ChaCha8Rng) -> (PlaneModel, Vec<Point3>) {
    let n = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let plane = PlaneModel::from_normal(n + Vector3::new(0.0, 0.05, 0.0), rng.random_range(-2.0..2.0)).unwrap();
    let n = plane.normal;
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let (u, v) = (n.cross(&helper).normalize(), n.cross(&n.cross(&helper).normalize()));
    let pts = (0..rng.random_range(10..200))
        .map(|_| {
            let h = rng.random_range(-0.2..0.2);
            -n * plane.d + u * rng.random_range(-3.0..3.0) + v * rng.random_range(-3.0..3.0) + n * h
        })
        .collect();
    (plane, pts)
}

fn curvature_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut inv, mut mirror) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (plane, pts) = random_plane_and_points(&mut rng);
        let iso = Isometry3::new(
            Vector3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ),
            Vector3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            ),
        );
        let pcd = PointCloud::from_points(pts.clone());
        let g = curvature_gradient(&pcd, &plane).unwrap();
        let moved = curvature_gradient(&pcd.transformed(&iso), &plane.transformed(&iso)).unwrap();
        let mirrored = pts
            .iter()
            .map(|q| q - plane.normal * (2.0 * plane.signed_distance(q)))
            .collect();
        let gm = curvature_gradient(&PointCloud::from_points(mirrored), &plane).unwrap();
        inv = inv.max((g - moved).abs());
        mirror = mirror.max((g + gm - 1.0).abs());
    }
    check(
        inv < 1e-9 && mirror < 1e-9,
        format!("100 planes, rigid max |dg| {inv:.2e}, mirror max |g + g' - 1| {mirror:.2e}"),
    )
}

fn main() {
    let criteria: [Criterion; 6] = [
        ("round-trip projection", round_trip),
        ("ransac oracle equivalence", ransac_equivalence),
        ("rectification efficacy", rectification_efficacy),
        ("loss identity and scale laws", loss_laws),
        ("determinism", determinism),
        ("curvature gradient properties", curvature_properties),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
