use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use tofplane::dataset::{build_dataset, DatasetOptions, FrameStatus};
use tofplane::io;
use tofplane::metrics::{evaluate_plane_set, image_losses, CurvatureReport, LossBreakdown};

use crate::config::RunConfig;
use crate::report;
use crate::Failure;

pub fn generate_gt(cfg: &RunConfig) -> Result<(), Failure> {
    let input = cfg.require_input()?;
    let output = cfg.require_output()?;
    let opts = DatasetOptions {
        loose: cfg.loose,
        tight: cfg.tight,
        seed: cfg.seed,
        intrinsics: cfg.intrinsics.clone(),
    };
    let manifest = build_dataset(input, output, &opts)?;
    for e in &manifest.entries {
        let name = Path::new(&e.raw_path)
            .file_name()
            .map_or(e.raw_path.as_str(), |n| n.to_str().unwrap_or("?"));
        let status = serde_json::to_value(e.status).expect("status serializes");
        match &e.error {
            Some(err) => println!("{:<16} {name}: {err}", status.as_str().unwrap_or("")),
            None => println!("{:<16} {name}", status.as_str().unwrap_or("")),
        }
    }
    let ok = manifest.count(FrameStatus::Ok);
    println!(
        "{ok} ok, {} skipped_no_plane, {} failed",
        manifest.count(FrameStatus::SkippedNoPlane),
        manifest.count(FrameStatus::Failed)
    );
    if ok == 0 {
        return Err(Failure::Semantic("no frame produced ground truth".into()));
    }
    Ok(())
}

fn evaluate_dir(dir: &Path, cfg: &RunConfig) -> Result<CurvatureReport, Failure> {
    let (_, intr) = io::resolve_intrinsics(dir, cfg.intrinsics.as_deref())?;
    let frames = io::load_frames(dir, &intr)?;
    Ok(evaluate_plane_set(&frames, &cfg.loose.with_seed(cfg.seed))?)
}

pub fn evaluate(cfg: &RunConfig) -> Result<(), Failure> {
    let input = cfg.require_input()?;
    cfg.loose.validate()?;
    let mut sets = vec![("input", input, evaluate_dir(input, cfg)?)];
    if let Some(pred) = cfg.predicted.as_deref() {
        sets.push(("predicted", pred, evaluate_dir(pred, cfg)?));
    }
    let view: Vec<_> = sets.iter().map(|(n, d, r)| (*n, *d, r)).collect();
    let summary = report::curvature_summary(&view);
    print!("{summary}");

    if let Some(out) = cfg.output.as_deref() {
        fs::create_dir_all(out).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
        let write = |name: String, text: &str| {
            let path = out.join(name);
            fs::write(&path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
        };
        for (name, _, r) in &sets {
            write(format!("curvature_{name}.jsonl"), &report::curvature_jsonl(r))?;
        }
        write("summary.txt".into(), &summary)?;
    }
    if sets.iter().all(|(_, _, r)| r.per_plane.is_empty()) {
        return Err(Failure::Semantic("no frame contained a constrained plane".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct LossLine<'a> {
    frame: &'a str,
    #[serde(flatten)]
    losses: &'a LossBreakdown,
}

pub fn losses(cfg: &RunConfig) -> Result<(), Failure> {
    let gt_dir = cfg.require_input()?;
    let pred_dir = cfg.require_predicted()?;
    let (_, intr) = io::resolve_intrinsics(gt_dir, cfg.intrinsics.as_deref())?;
    let gt_names: BTreeSet<String> = io::list_depth_pngs(gt_dir)?.into_iter().collect();
    let pred_names: BTreeSet<String> = io::list_depth_pngs(pred_dir)?.into_iter().collect();
    for name in gt_names.difference(&pred_names) {
        eprintln!("unmatched in {}: {name}", gt_dir.display());
    }
    for name in pred_names.difference(&gt_names) {
        eprintln!("unmatched in {}: {name}", pred_dir.display());
    }
    let pairs: Vec<&String> = gt_names.intersection(&pred_names).collect();
    if pairs.is_empty() {
        return Err(Failure::Semantic(
            "no frame names shared between the two directories".into(),
        ));
    }

    let results: Vec<(String, tofplane::Result<LossBreakdown>)> = pairs
        .par_iter()
        .map(|name| {
            let r = io::read_depth_png(&gt_dir.join(name), &intr)
                .and_then(|gt| Ok((gt, io::read_depth_png(&pred_dir.join(name), &intr)?)))
                .and_then(|(gt, pred)| image_losses(&gt, &pred, cfg.scale_s));
            (name.to_string(), r)
        })
        .collect();
    let mut rows = Vec::new();
    for (name, r) in results {
        match r {
            Ok(l) => rows.push((name, l)),
            Err(e) => eprintln!("{name}: {e}"),
        }
    }
    print!("{}", report::loss_table(&rows));

    if let Some(out) = cfg.output.as_deref() {
        fs::create_dir_all(out).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
        let mut text = String::new();
        for (name, l) in &rows {
            text.push_str(&serde_json::to_string(&LossLine { frame: name, losses: l }).expect("loss serializes"));
            text.push('\n');
        }
        let path = out.join("losses.jsonl");
        fs::write(&path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    if rows.is_empty() {
        return Err(Failure::Semantic("no pair had comparable pixels".into()));
    }
    Ok(())
}
