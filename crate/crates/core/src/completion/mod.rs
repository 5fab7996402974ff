//! From partial views to occupancy scores: ray carving, the occlusion-shadow
//! baseline, two-view fusion and externally computed score grids.

mod carve;
mod score_file;

pub use carve::{carve_into, ray_carve, traverse_grid, CellCrossing};
pub use score_file::{read_score_grid, write_score_grid};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::views::{depth_to_cloud, CameraModel, DepthImage};
use crate::voxel::{voxelize_cloud, BinaryGrid, GridSpec, ScoreGrid};
use crate::{Error, RigidTransform, Result};

/// Ordered so that merging two observations is `max`: a surface hit beats
/// a carved ray, which beats no information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Label {
    Unknown = 0,
    Empty = 1,
    Occupied = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid {
    spec: GridSpec,
    labels: Vec<Label>,
}

impl LabelGrid {
    pub fn unknown(spec: GridSpec) -> Self {
        Self {
            labels: vec![Label::Unknown; spec.cell_count()],
            spec,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Label {
        self.labels[self.spec.linear(i, j, k)]
    }

    /// Raises the label at `index` to at least `label`.
    pub fn observe(&mut self, index: usize, label: Label) {
        let cell = &mut self.labels[index];
        *cell = (*cell).max(label);
    }

    pub fn merge(&mut self, other: &LabelGrid) {
        debug_assert_eq!(self.spec, other.spec);
        for (a, &b) in self.labels.iter_mut().zip(&other.labels) {
            *a = (*a).max(b);
        }
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// `1.0` for Occupied, `0.0` for Empty and exactly `v_boundary` for Unknown.
    pub fn to_scores(&self, v_boundary: f64, epsilon: f64) -> Result<ScoreGrid> {
        let unknown = v_boundary as f32;
        let scores = self
            .labels
            .iter()
            .map(|l| match l {
                Label::Occupied => 1.0,
                Label::Empty => 0.0,
                Label::Unknown => unknown,
            })
            .collect();
        ScoreGrid::new(self.spec, scores, v_boundary, epsilon)
    }
}

/// A partial view: the depth capture, the camera placed in the grid's
/// frame, and the captured surface voxelized into that grid.
///
/// For a view built in its own image frame the camera pose is the identity.
#[derive(Debug, Clone)]
pub struct ViewFrame {
    pub grid: BinaryGrid,
    pub camera: CameraModel,
    pub depth: DepthImage,
}

impl ViewFrame {
    /// Builds a view in the camera's own frame, voxelizing the back-projected
    /// depth into `spec`.
    pub fn in_image_frame(depth: &DepthImage, spec: &GridSpec) -> Result<Self> {
        let depth = depth.reposed(RigidTransform::identity());
        let cloud = depth_to_cloud(&depth);
        let grid = if cloud.is_empty() {
            BinaryGrid::empty(*spec)
        } else {
            match voxelize_cloud(&cloud, spec) {
                Ok(v) => v.grid,
                Err(Error::EmptyResult(_)) => BinaryGrid::empty(*spec),
                Err(e) => return Err(e),
            }
        };
        Ok(Self {
            grid,
            camera: depth.camera,
            depth,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        self.grid.spec()
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (&self.camera, &self.depth.camera);
        if a.width != b.width || a.height != b.height || a.vertical_fov_deg != b.vertical_fov_deg || a.max_range != b.max_range {
            return Err(Error::InvalidArgument("view camera does not match its depth image".into()));
        }
        Ok(())
    }
}

/// Score band used when labels are mapped to scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBand {
    pub v_boundary: f64,
    pub epsilon: f64,
}

impl Default for ScoreBand {
    fn default() -> Self {
        Self {
            v_boundary: crate::voxel::DEFAULT_V_BOUNDARY,
            epsilon: crate::voxel::DEFAULT_EPSILON,
        }
    }
}

/// A second view together with the transform taking its frame into the
/// primary view's frame.
#[derive(Debug, Clone, Copy)]
pub struct SecondaryView<'a> {
    pub view: &'a ViewFrame,
    pub registration: &'a RigidTransform,
}

pub trait Completer: Send + Sync {
    /// Scores in the primary view's grid.
    fn complete(&self, primary: &ViewFrame, secondary: Option<SecondaryView<'_>>) -> Result<ScoreGrid>;
}

/// Labels from carving the view plus its own voxelized surface.
fn view_labels(view: &ViewFrame) -> LabelGrid {
    let mut labels = ray_carve(view);
    for (idx, &bit) in view.grid.bits().iter().enumerate() {
        if bit {
            labels.observe(idx, Label::Occupied);
        }
    }
    labels
}

/// Single-view baseline: the uncertain set is exactly the occlusion shadow.
pub fn shadow_complete(view: &ViewFrame, band: ScoreBand) -> Result<ScoreGrid> {
    view_labels(view).to_scores(band.v_boundary, band.epsilon)
}

/// Carves both views into the primary grid and combines labels per cell.
pub fn fuse_labels(primary: &ViewFrame, secondary: &ViewFrame, registration: &RigidTransform) -> LabelGrid {
    let mut labels = view_labels(primary);
    let pose = registration.compose(&secondary.camera.pose);
    carve_into(&mut labels, &secondary.depth, &pose);
    // The secondary's own surface voxels live in its frame; re-bin their
    // centers into the primary grid.
    let spec = *primary.spec();
    for c in secondary.grid.occupied_centers() {
        if let Some([i, j, k]) = spec.cell_of(&registration.transform_point(&c)) {
            labels.observe(spec.linear(i, j, k), Label::Occupied);
        }
    }
    labels
}

pub fn fuse_views(primary: &ViewFrame, secondary: &ViewFrame, registration: &RigidTransform, band: ScoreBand) -> Result<ScoreGrid> {
    fuse_labels(primary, secondary, registration).to_scores(band.v_boundary, band.epsilon)
}

/// Carving overrides a completer where a ray proved the space empty.
pub fn apply_carving(scores: &ScoreGrid, labels: &LabelGrid) -> Result<ScoreGrid> {
    if !scores.spec().approx_eq(labels.spec(), 1e-9) {
        return Err(Error::SpecMismatch("score grid and carving labels differ in placement".into()));
    }
    let out = scores
        .scores()
        .iter()
        .zip(labels.labels())
        .map(|(&s, &l)| if l == Label::Empty { 0.0 } else { s })
        .collect();
    scores.with_scores(out)
}

/// Loads a stored score grid and checks it against the primary view.
pub fn file_complete(primary: &ViewFrame, path: impl AsRef<Path>) -> Result<ScoreGrid> {
    let grid = read_score_grid(path)?;
    let want = primary.spec();
    if !grid.spec().approx_eq(want, 1e-6) {
        return Err(Error::SpecMismatch(format!(
            "stored grid is {}³ at {:?} with voxel {}, view grid is {}³ at {:?} with voxel {}",
            grid.spec().resolution,
            grid.spec().origin,
            grid.spec().voxel_size,
            want.resolution,
            want.origin,
            want.voxel_size
        )));
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ShadowCompleter {
    pub band: ScoreBand,
}

impl Completer for ShadowCompleter {
    fn complete(&self, primary: &ViewFrame, secondary: Option<SecondaryView<'_>>) -> Result<ScoreGrid> {
        match secondary {
            None => shadow_complete(primary, self.band),
            Some(s) => fuse_views(primary, s.view, s.registration, self.band),
        }
    }
}

/// Reads a precomputed grid; the views only supply the expected placement.
#[derive(Debug, Clone)]
pub struct FileCompleter {
    pub path: PathBuf,
}

impl Completer for FileCompleter {
    fn complete(&self, primary: &ViewFrame, _secondary: Option<SecondaryView<'_>>) -> Result<ScoreGrid> {
        file_complete(primary, &self.path)
    }
}
