//! Dataset and result file formats.
//!
//! Tensors use a tiny raw format: magic `SFTEN1` (6 bytes), `u8` dtype
//! (1 = f32), `u8` ndims, `u32` little-endian dims, then the row-major f32
//! little-endian payload. Everything else is line-oriented ASCII. Floats are
//! printed with Rust's shortest-roundtrip formatting so write→read→write is
//! byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use semvox::sim::TimedPose;
use semvox::types::{CameraIntrinsics, Pose, VoxelKey};

use crate::CliError;

const MAGIC: &[u8; 6] = b"SFTEN1";
const DTYPE_F32: u8 = 1;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn write_tensor(path: &Path, dims: &[u32], data: &[f32]) -> Result<(), CliError> {
    let expected: usize = dims.iter().map(|&d| d as usize).product();
    assert_eq!(expected, data.len(), "tensor payload does not match dims");
    let mut buf = Vec::with_capacity(8 + 4 * dims.len() + 4 * data.len());
    buf.extend_from_slice(MAGIC);
    buf.push(DTYPE_F32);
    buf.push(dims.len() as u8);
    for &d in dims {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for &v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| io_err(path, e))
}

pub fn read_tensor(path: &Path) -> Result<(Vec<u32>, Vec<f32>), CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let malformed = |msg: &str| CliError::MalformedFrame(format!("{}: {msg}", path.display()));
    if bytes.len() < 8 || &bytes[..6] != MAGIC {
        return Err(malformed("bad magic"));
    }
    if bytes[6] != DTYPE_F32 {
        return Err(malformed("unsupported dtype"));
    }
    let ndims = bytes[7] as usize;
    let header = 8 + 4 * ndims;
    if bytes.len() < header {
        return Err(malformed("truncated dims"));
    }
    let dims: Vec<u32> = (0..ndims)
        .map(|i| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()))
        .collect();
    let count: usize = dims.iter().map(|&d| d as usize).product();
    if bytes.len() != header + 4 * count {
        return Err(malformed("payload size does not match dims"));
    }
    let data = bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((dims, data))
}

pub fn frame_id(index: usize) -> String {
    format!("{index:05}")
}

pub fn depth_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("depth_{}.ten", frame_id(index)))
}

pub fn obs_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("obs_{}.ten", frame_id(index)))
}

pub fn outlier_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("outliers_{}.txt", frame_id(index)))
}

pub fn write_poses(path: &Path, poses: &[TimedPose]) -> Result<(), CliError> {
    let mut out = String::new();
    for (i, tp) in poses.iter().enumerate() {
        let [tx, ty, tz] = tp.pose.translation();
        let [qx, qy, qz, qw] = tp.pose.rotation_xyzw();
        writeln!(
            out,
            "{} {} {tx} {ty} {tz} {qx} {qy} {qz} {qw}",
            frame_id(i),
            tp.timestamp
        )
        .unwrap();
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_poses(path: &Path) -> Result<Vec<TimedPose>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut poses = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let malformed =
            |msg: String| CliError::MalformedFrame(format!("{} line {}: {msg}", path.display(), ln + 1));
        if fields.len() != 9 {
            return Err(malformed(format!("expected 9 fields, got {}", fields.len())));
        }
        let nums: Vec<f64> = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| malformed(e.to_string()))?;
        let pose = Pose::new([nums[1], nums[2], nums[3]], [nums[4], nums[5], nums[6], nums[7]])
            .map_err(|e| malformed(e.to_string()))?;
        poses.push(TimedPose {
            timestamp: nums[0],
            pose,
        });
    }
    Ok(poses)
}

pub fn write_intrinsics(path: &Path, intr: &CameraIntrinsics<f64>) -> Result<(), CliError> {
    let line = format!(
        "{} {} {} {} {} {}\n",
        intr.fx, intr.fy, intr.cx, intr.cy, intr.width, intr.height
    );
    fs::write(path, line).map_err(|e| io_err(path, e))
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let malformed = |msg: String| CliError::MalformedFrame(format!("{}: {msg}", path.display()));
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != 6 {
        return Err(malformed(format!("expected 6 fields, got {}", fields.len())));
    }
    let parse = |s: &str| s.parse::<f64>().map_err(|e| malformed(e.to_string()));
    CameraIntrinsics::new(
        parse(fields[0])?,
        parse(fields[1])?,
        parse(fields[2])?,
        parse(fields[3])?,
        fields[4].parse().map_err(|e: std::num::ParseIntError| malformed(e.to_string()))?,
        fields[5].parse().map_err(|e: std::num::ParseIntError| malformed(e.to_string()))?,
    )
    .map_err(|e| malformed(e.to_string()))
}

/// `ix iy iz label` per line; used for both GT and exported maps.
pub fn write_voxels(path: &Path, voxels: &[(VoxelKey, usize)]) -> Result<(), CliError> {
    let mut out = String::new();
    for (key, label) in voxels {
        writeln!(out, "{} {} {} {label}", key.ix, key.iy, key.iz).unwrap();
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_voxels(path: &Path) -> Result<Vec<(VoxelKey, usize)>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut voxels = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let malformed =
            |msg: String| CliError::MalformedFrame(format!("{} line {}: {msg}", path.display(), ln + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(malformed(format!("expected 4 fields, got {}", fields.len())));
        }
        let coord = |s: &str| s.parse::<i64>().map_err(|e| malformed(e.to_string()));
        let key = VoxelKey::new(coord(fields[0])?, coord(fields[1])?, coord(fields[2])?);
        let label = fields[3]
            .parse::<usize>()
            .map_err(|e| malformed(e.to_string()))?;
        voxels.push((key, label));
    }
    Ok(voxels)
}

/// Outlier debug sidecar: one `u v` line per outlier pixel.
pub fn write_outliers(path: &Path, width: u32, flags: &[bool]) -> Result<(), CliError> {
    let mut out = String::new();
    for (px, &flag) in flags.iter().enumerate() {
        if flag {
            writeln!(out, "{} {}", px as u32 % width, px as u32 / width).unwrap();
        }
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}


/// CSV row: strategy, per-class IoU (4 decimals, `na` when the class is
/// absent from both maps), mIoU, accuracy.
pub fn csv_header(num_classes: usize) -> String {
    let mut s = String::from("strategy");
    for c in 0..num_classes {
        write!(s, ",iou_{c}").unwrap();
    }
    s.push_str(",miou,accuracy\n");
    s
}

pub fn csv_row(strategy: &str, report: &semvox::metrics::EvalReport) -> String {
    let mut s = String::from(strategy);
    for iou in &report.per_class_iou {
        match iou {
            Some(v) => write!(s, ",{v:.4}").unwrap(),
            None => s.push_str(",na"),
        }
    }
    write!(s, ",{:.4},{:.4}\n", report.miou, report.accuracy).unwrap();
    s
}
