//! Score grids on disk: little-endian `f32` cells (`i` fastest) plus a JSON
//! sidecar holding the placement and band.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::voxel::{GridSpec, ScoreGrid};
use crate::{Error, Point3, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    resolution: usize,
    origin: [f64; 3],
    voxel_size: f64,
    v_boundary: f64,
    epsilon: f64,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_score_grid(grid: &ScoreGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(grid.scores().len() * 4);
    for s in grid.scores() {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let spec = grid.spec();
    let sidecar = Sidecar {
        resolution: spec.resolution,
        origin: [spec.origin.x, spec.origin.y, spec.origin.z],
        voxel_size: spec.voxel_size,
        v_boundary: grid.v_boundary(),
        epsilon: grid.epsilon(),
    };
    let sp = sidecar_path(path);
    fs::write(&sp, serde_json::to_string_pretty(&sidecar).expect("serializable")).map_err(|e| Error::io(&sp, e))
}

/// Every failure is reported as [`Error::ScoreLoad`].
pub fn read_score_grid(path: impl AsRef<Path>) -> Result<ScoreGrid> {
    let path = path.as_ref();
    let sp = sidecar_path(path);
    let json = fs::read_to_string(&sp).map_err(|e| Error::ScoreLoad(format!("{}: {e}", sp.display())))?;
    let sc: Sidecar = serde_json::from_str(&json).map_err(|e| Error::ScoreLoad(format!("{}: {e}", sp.display())))?;
    let spec = GridSpec::new(sc.resolution, Point3::from(sc.origin), sc.voxel_size)
        .map_err(|e| Error::ScoreLoad(format!("{}: {e}", sp.display())))?;
    let bytes = fs::read(path).map_err(|e| Error::ScoreLoad(format!("{}: {e}", path.display())))?;
    if bytes.len() != spec.cell_count() * 4 {
        return Err(Error::ScoreLoad(format!(
            "{}: {} bytes, expected {} for a {}³ grid",
            path.display(),
            bytes.len(),
            spec.cell_count() * 4,
            spec.resolution
        )));
    }
    let scores = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    ScoreGrid::new(spec, scores, sc.v_boundary, sc.epsilon).map_err(|e| Error::ScoreLoad(format!("{}: {e}", path.display())))
}
