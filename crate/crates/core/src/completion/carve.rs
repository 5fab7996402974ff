//! Ray carving with Amanatides–Woo cell stepping.

use rayon::prelude::*;

use super::{Label, LabelGrid, ViewFrame};
use crate::views::DepthImage;
use crate::voxel::GridSpec;
use crate::{Point3, RigidTransform, Vector3};

/// One grid cell pierced by a ray over `[t_enter, t_exit]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellCrossing {
    pub index: usize,
    pub t_enter: f64,
    pub t_exit: f64,
}

/// Cells crossed by `origin + t·dir` for `t ∈ [0, t_end]`, in order along
/// the ray. `dir` need not be normalized; `t` is in units of its length.
pub fn traverse_grid(spec: &GridSpec, origin: &Point3, dir: &Vector3, t_end: f64) -> Vec<CellCrossing> {
    let mut out = Vec::new();
    let inv = dir.map(|c| 1.0 / c);
    let Some((t0, t1)) = spec.bounds().ray_interval(origin, &inv, 0.0, t_end) else {
        return out;
    };
    if t1 <= t0 {
        return out;
    }
    let n = spec.resolution as i64;
    let h = spec.voxel_size;
    let entry = origin + dir * t0;
    let mut cell = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_next = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        let c = ((entry[a] - spec.origin[a]) / h).floor() as i64;
        cell[a] = c.clamp(0, n - 1);
        if dir[a] > 0.0 {
            step[a] = 1;
            let boundary = spec.origin[a] + (cell[a] + 1) as f64 * h;
            t_next[a] = (boundary - origin[a]) / dir[a];
            t_delta[a] = h / dir[a];
        } else if dir[a] < 0.0 {
            step[a] = -1;
            let boundary = spec.origin[a] + cell[a] as f64 * h;
            t_next[a] = (boundary - origin[a]) / dir[a];
            t_delta[a] = -h / dir[a];
        }
    }
    let mut t_enter = t0;
    loop {
        let axis = if t_next[0] <= t_next[1] && t_next[0] <= t_next[2] {
            0
        } else if t_next[1] <= t_next[2] {
            1
        } else {
            2
        };
        let t_exit = t_next[axis].min(t1);
        let index = (cell[0] + n * (cell[1] + n * cell[2])) as usize;
        if t_exit > t_enter {
            out.push(CellCrossing { index, t_enter, t_exit });
        }
        if t_exit >= t1 {
            break;
        }
        cell[axis] += step[axis];
        if cell[axis] < 0 || cell[axis] >= n {
            break;
        }
        t_enter = t_exit;
        t_next[axis] += t_delta[axis];
    }
    out
}

/// Labels from one depth image whose camera sits at `pose` in the grid frame.
///
/// Cells left of the measured range are Empty, the cell holding the surface
/// point is Occupied, everything behind stays Unknown. Misses carve up to
/// the camera's maximum range.
pub fn carve_into(labels: &mut LabelGrid, depth: &DepthImage, pose: &RigidTransform) {
    let spec = *labels.spec();
    let cam = &depth.camera;
    let origin = pose.origin();
    let partial = (0..cam.height)
        .into_par_iter()
        .fold(
            || LabelGrid::unknown(spec),
            |mut acc, v| {
                for u in 0..cam.width {
                    let dir = pose.transform_vector(&cam.pixel_direction(u, v));
                    let (range, hit) = match depth.get(u, v) {
                        Some(d) => (d, true),
                        None => (cam.max_range, false),
                    };
                    for c in traverse_grid(&spec, &origin, &dir, range) {
                        if c.t_exit < range {
                            acc.observe(c.index, Label::Empty);
                        } else if hit {
                            acc.observe(c.index, Label::Occupied);
                        } else {
                            acc.observe(c.index, Label::Empty);
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || LabelGrid::unknown(spec),
            |mut a, b| {
                a.merge(&b);
                a
            },
        );
    labels.merge(&partial);
}

pub fn ray_carve(view: &ViewFrame) -> LabelGrid {
    let mut labels = LabelGrid::unknown(*view.spec());
    carve_into(&mut labels, &view.depth, &view.camera.pose);
    labels
}
