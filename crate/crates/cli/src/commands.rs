//! Subcommand logic. All paths are deterministic for a fixed config + seed:
//! pixels draw from per-(frame, pixel) RNG substreams and maps export in
//! sorted key order, so repeated runs are byte-identical.

use std::path::{Path, PathBuf};

use serde::Serialize;

use semvox::fusion::FusionStrategy;
use semvox::map::{Frame, FrameObservations, MapError, SemanticVoxelMap, UpdateSummary};
use semvox::metrics::{evaluate, EvalReport, MetricsError};
use semvox::sim::{generate_trajectory, rasterize_gt, simulate_frame, ObservationKind};
use semvox::types::{CameraIntrinsics, VoxelKey};

use crate::config::ExperimentConfig;
use crate::io;
use crate::CliError;

pub fn cmd_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let scene = cfg.scene()?;
    let intr = cfg.intrinsics()?;
    let model = cfg.sensor_model(cfg.seed);
    let kind = cfg.observation_kind()?;
    let trajectory =
        generate_trajectory(&cfg.trajectory()).map_err(|e| CliError::Scene(e.to_string()))?;

    io::write_poses(&out_dir.join("poses.txt"), &trajectory)?;
    io::write_intrinsics(&out_dir.join("intrinsics.txt"), &intr)?;
    io::write_voxels(
        &out_dir.join("gt_voxels.txt"),
        &rasterize_gt(&scene, cfg.voxel_size),
    )?;

    let w = intr.width;
    let h = intr.height;
    for (i, tp) in trajectory.iter().enumerate() {
        let (frame, outliers) = simulate_frame(
            &scene,
            tp,
            &intr,
            &model,
            cfg.fusion.mc_samples,
            i as u64,
            kind,
        );
        let depth_f32: Vec<f32> = frame.depth.iter().map(|&d| d as f32).collect();
        io::write_tensor(&io::depth_path(out_dir, i), &[h, w], &depth_f32)?;
        let (dims, data) = match &frame.observations {
            FrameObservations::McSamples {
                num_samples,
                num_classes,
                data,
            } => (
                vec![*num_samples as u32, *num_classes as u32, h, w],
                data.iter().map(|&v| v as f32).collect::<Vec<f32>>(),
            ),
            FrameObservations::MeanVariance { num_classes, data } => (
                vec![2, *num_classes as u32, h, w],
                data.iter().map(|&v| v as f32).collect(),
            ),
        };
        io::write_tensor(&io::obs_path(out_dir, i), &dims, &data)?;
        io::write_outliers(&io::outlier_path(out_dir, i), w, &outliers)?;
    }
    Ok(())
}

fn load_frame(
    dir: &Path,
    index: usize,
    timestamp: f64,
    pose: semvox::types::Pose<f64>,
    intr: &CameraIntrinsics<f64>,
    kind: ObservationKind,
) -> Result<Frame<f64>, CliError> {
    let id = io::frame_id(index);
    let with_frame = |msg: String| CliError::MalformedFrame(format!("frame {id}: {msg}"));

    let (ddims, depth) = io::read_tensor(&io::depth_path(dir, index))?;
    if ddims != [intr.height, intr.width] {
        return Err(with_frame(format!(
            "depth dims {ddims:?} do not match intrinsics {}x{}",
            intr.width, intr.height
        )));
    }
    let (odims, odata) = io::read_tensor(&io::obs_path(dir, index))?;
    if odims.len() != 4 || odims[2] != intr.height || odims[3] != intr.width {
        return Err(with_frame(format!("observation dims {odims:?} invalid")));
    }
    let data: Vec<f64> = odata.iter().map(|&v| v as f64).collect();
    let observations = match kind {
        ObservationKind::MeanVariance => {
            if odims[0] != 2 {
                return Err(with_frame(format!(
                    "expected [2,K,H,W] mean-variance tensor, got leading dim {}",
                    odims[0]
                )));
            }
            FrameObservations::MeanVariance {
                num_classes: odims[1] as usize,
                data,
            }
        }
        ObservationKind::McSamples => FrameObservations::McSamples {
            num_samples: odims[0] as usize,
            num_classes: odims[1] as usize,
            data,
        },
    };
    Ok(Frame {
        timestamp,
        pose,
        intrinsics: *intr,
        depth: depth.iter().map(|&d| d as f64).collect(),
        observations,
    })
}

pub fn cmd_fuse(
    cfg: &ExperimentConfig,
    dataset: &Path,
    strategy: FusionStrategy,
    out: &Path,
) -> Result<UpdateSummary, CliError> {
    let poses = io::read_poses(&dataset.join("poses.txt"))?;
    let intr = io::read_intrinsics(&dataset.join("intrinsics.txt"))?;
    let kind = cfg.observation_kind()?;
    let mut map = SemanticVoxelMap::new(
        cfg.scene.num_classes,
        cfg.voxel_size,
        strategy,
        cfg.fusion_config(),
    )
    .with_stride(cfg.observations.stride);

    let mut total = UpdateSummary::default();
    for (i, tp) in poses.iter().enumerate() {
        let frame = load_frame(dataset, i, tp.timestamp, tp.pose, &intr, kind)?;
        let summary = map.integrate_frame(&frame).map_err(|e| match e {
            MapError::OrderViolation { .. } => {
                CliError::OrderViolation(format!("frame {}: {e}", io::frame_id(i)))
            }
            MapError::MalformedFrame(_) => {
                CliError::MalformedFrame(format!("frame {}: {e}", io::frame_id(i)))
            }
        })?;
        total.voxels_touched = map.num_cells();
        total.pixels_used += summary.pixels_used;
        total.pixels_skipped += summary.pixels_skipped;
    }
    let labels: Vec<(VoxelKey, usize)> = map
        .export_labels()
        .into_iter()
        .map(|(k, l, _)| (k, l))
        .collect();
    io::write_voxels(out, &labels)?;
    Ok(total)
}

#[derive(Serialize)]
struct JsonReport<'a> {
    strategy: &'a str,
    num_classes: usize,
    per_class_iou: &'a [Option<f64>],
    miou: f64,
    accuracy: f64,
    confusion: &'a [u64],
    gt_voxels: u64,
    pred_voxels: u64,
    matched_voxels: u64,
}

fn metrics_err(e: MetricsError) -> CliError {
    match e {
        MetricsError::EmptyGroundTruth => CliError::EmptyGroundTruth,
        other => CliError::LabelMismatch(other.to_string()),
    }
}

pub fn eval_report(
    cfg: &ExperimentConfig,
    map_path: &Path,
    gt_path: &Path,
) -> Result<EvalReport, CliError> {
    let pred = io::read_voxels(map_path)?;
    let gt = io::read_voxels(gt_path)?;
    evaluate(cfg.scene.num_classes, &pred, &gt).map_err(metrics_err)
}

pub fn cmd_eval(
    cfg: &ExperimentConfig,
    map_path: &Path,
    gt_path: &Path,
    strategy: &str,
    json_out: Option<&Path>,
) -> Result<String, CliError> {
    let report = eval_report(cfg, map_path, gt_path)?;
    if let Some(path) = json_out {
        let json = serde_json::to_string_pretty(&JsonReport {
            strategy,
            num_classes: report.num_classes,
            per_class_iou: &report.per_class_iou,
            miou: report.miou,
            accuracy: report.accuracy,
            confusion: &report.confusion,
            gt_voxels: report.gt_voxels,
            pred_voxels: report.pred_voxels,
            matched_voxels: report.matched_voxels,
        })
        .expect("report serialization cannot fail");
        std::fs::write(path, json + "\n")
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    let mut out = io::csv_header(cfg.scene.num_classes);
    out.push_str(&io::csv_row(strategy, &report));
    Ok(out)
}

pub fn cmd_compare(cfg: &ExperimentConfig, out_dir: &Path) -> Result<String, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let dataset = out_dir.join("dataset");
    cmd_simulate(cfg, &dataset)?;
    let gt_path = dataset.join("gt_voxels.txt");

    let mut csv = io::csv_header(cfg.scene.num_classes);
    for strategy in cfg.strategy_list() {
        let map_path: PathBuf = out_dir.join(format!("map_{}.txt", strategy.name()));
        cmd_fuse(cfg, &dataset, strategy, &map_path)?;
        let report = eval_report(cfg, &map_path, &gt_path)?;
        csv.push_str(&io::csv_row(strategy.name(), &report));
    }
    let csv_path = out_dir.join("comparison.csv");
    std::fs::write(&csv_path, &csv)
        .map_err(|e| CliError::Io(format!("{}: {e}", csv_path.display())))?;
    Ok(csv)
}
