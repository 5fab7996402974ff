//! One (mesh, pose) pair: shared first-view setup, then one trial per scenario.

use std::path::Path;
use std::time::Instant;

use nbv_core::completion::{
    apply_carving, fuse_labels, ray_carve, Completer, FileCompleter, ScoreBand, SecondaryView, ShadowCompleter, ViewFrame,
};
use nbv_core::marching_cubes::marching_cubes;
use nbv_core::metrics::{hausdorff_one_direction, jaccard};
use nbv_core::nbv::{next_best_view, target_pose};
use nbv_core::noise::perturb_registration;
use nbv_core::segmentation::{band_filter, extract_above_plane, ransac_plane};
use nbv_core::views::{depth_to_cloud, look_at, CameraModel, DepthImage, Scene};
use nbv_core::voxel::{fit_spec, threshold_grid, uncertain_voxels, voxelize_mesh_solid, BinaryGrid, GridSpec, ScoreGrid};
use nbv_core::{transform_cloud, Error, Point3, PointCloud, RigidTransform, TriangleMesh, Vector3};
use serde::Serialize;

use crate::config::{CompleterChoice, Scenario, SecondViewMode, SuiteConfig};
use crate::scene::{
    antipode, pick_table_height, robot_base_under, sample_sphere, sample_viewpoint, synthesize_scene, trial_seed, Stream, TabletopScene,
};

/// Fewest segmented points accepted as an object.
const MIN_OBJECT_POINTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCategory {
    Segmentation,
    RenderMiss,
    EmptyMesh,
    Completer,
    Internal,
}

impl FailureCategory {
    pub fn name(self) -> &'static str {
        match self {
            Self::Segmentation => "segmentation",
            Self::RenderMiss => "render_miss",
            Self::EmptyMesh => "empty_mesh",
            Self::Completer => "completer",
            Self::Internal => "internal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub category: FailureCategory,
    pub message: String,
}

impl TrialFailure {
    fn new(category: FailureCategory, message: impl Into<String>) -> Self {
        Self {
            category,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrialSeeds {
    pub scene: u64,
    pub first_view: u64,
    pub random_view: u64,
    pub ransac: u64,
    pub hausdorff: u64,
    pub noise: u64,
}

impl TrialSeeds {
    pub fn derive(master: u64, mesh: usize, pose: usize) -> Self {
        let s = |st| trial_seed(master, mesh, pose, st);
        Self {
            scene: s(Stream::Scene),
            first_view: s(Stream::FirstView),
            random_view: s(Stream::RandomView),
            ransac: s(Stream::Ransac),
            hausdorff: s(Stream::Hausdorff),
            noise: s(Stream::Noise),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub mesh: String,
    pub mesh_index: usize,
    pub pose: usize,
    pub scenario: Scenario,
    pub noisy: bool,
    /// Viewpoints captured.
    pub renders: usize,
    pub jaccard: Option<f64>,
    pub hausdorff_mm: Option<f64>,
    /// Chosen direction in the first camera's frame.
    pub v_nbv: Option<Vector3>,
    /// The uncertain set was degenerate and the opposite view was used.
    pub nbv_fallback: bool,
    /// Torso limits moved the camera off the requested height.
    pub nbv_clamped: bool,
    pub table_height: f64,
    pub seeds: TrialSeeds,
    pub failure: Option<TrialFailure>,
    /// Not part of the deterministic report.
    pub wall_clock_s: f64,
}

impl TrialResult {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

/// A named object, already scaled to the grip width.
#[derive(Debug, Clone)]
pub struct MeshEntry {
    pub name: String,
    pub mesh: TriangleMesh,
}

/// A posed camera in the world plus the robot base carrying it.
#[derive(Debug, Clone, Copy)]
struct Rig {
    camera: RigidTransform,
    base: RigidTransform,
}

impl Rig {
    fn looking_at(eye: &Point3, target: &Point3) -> Result<Self, TrialFailure> {
        Ok(Self {
            camera: look_at(eye, target).map_err(|e| TrialFailure::new(FailureCategory::Internal, e.to_string()))?,
            base: robot_base_under(eye, target),
        })
    }

    /// Camera pose relative to the base.
    fn head(&self) -> RigidTransform {
        self.base.inverse().compose(&self.camera)
    }
}

/// Everything shared by the scenarios of one (mesh, pose) pair.
pub struct PairSetup {
    pub mesh: String,
    pub mesh_index: usize,
    pub pose: usize,
    pub seeds: TrialSeeds,
    pub scene: TabletopScene,
    object_scene: Scene,
    template: CameraModel,
    first: Rig,
    /// Segmented object centroid, world frame.
    segmented_centroid: Point3,
    pub spec: GridSpec,
    pub primary: ViewFrame,
    pub ground_truth: BinaryGrid,
    /// Object mesh in the first camera's frame.
    pub ground_truth_mesh: TriangleMesh,
}

fn internal(e: Error) -> TrialFailure {
    TrialFailure::new(FailureCategory::Internal, e.to_string())
}

/// Synthesizes the scene, captures and segments the first view, and fixes
/// the grid every scenario of the pair is scored in.
pub fn prepare_pair(cfg: &SuiteConfig, entry: &MeshEntry, mesh_index: usize, pose: usize) -> Result<PairSetup, TrialFailure> {
    let seeds = TrialSeeds::derive(cfg.seed, mesh_index, pose);
    let height = pick_table_height(&cfg.table_heights, seeds.scene);
    let scene = synthesize_scene(&entry.mesh, height, seeds.scene).map_err(internal)?;
    let center = scene.object_center();
    let template = cfg.camera.model();
    let eye = sample_viewpoint(&center, cfg.d_optimal, cfg.robot.camera_height_range(), seeds.first_view);
    let first = Rig::looking_at(&eye, &center)?;
    let camera = template.with_pose(first.camera);

    // The sensor sees the table too; segmentation runs in the robot frame.
    let full = Scene::new(&scene.scene).render(&camera);
    if full.valid_count() == 0 {
        return Err(TrialFailure::new(FailureCategory::RenderMiss, "first view saw nothing"));
    }
    let world_to_robot = first.base.inverse();
    let cloud_robot = transform_cloud(&depth_to_cloud(&full), &world_to_robot.compose(&first.camera));
    let band = band_filter(&cloud_robot, &cfg.segmentation);
    let fit = ransac_plane(&band, &cfg.segmentation, seeds.ransac)
        .map_err(|e| TrialFailure::new(FailureCategory::Segmentation, e.to_string()))?;
    let object_robot = extract_above_plane(&band, &fit.plane, cfg.segmentation.above_margin);
    if object_robot.len() < MIN_OBJECT_POINTS {
        return Err(TrialFailure::new(
            FailureCategory::Segmentation,
            format!("only {} points above the support plane", object_robot.len()),
        ));
    }
    let segmented_centroid = first.base.transform_point(&object_robot.centroid().expect("non-empty"));
    let robot_to_camera = first.head().inverse();
    let object_cam: PointCloud = transform_cloud(&object_robot, &robot_to_camera);
    let spec = fit_spec(&object_cam.bounds().expect("non-empty"), cfg.resolution, cfg.grid_padding).map_err(internal)?;

    // Occupancy and carving come from the object alone (a perfect instance mask).
    let object_scene = Scene::new(&scene.object);
    let object_depth = object_scene.render(&camera);
    if object_depth.valid_count() == 0 {
        return Err(TrialFailure::new(FailureCategory::RenderMiss, "object not visible from the first view"));
    }
    let primary = ViewFrame::in_image_frame(&object_depth, &spec).map_err(internal)?;

    let ground_truth_mesh = scene.object.transformed(&first.camera.inverse());
    let ground_truth = voxelize_mesh_solid(&ground_truth_mesh, &spec);
    Ok(PairSetup {
        mesh: entry.name.clone(),
        mesh_index,
        pose,
        seeds,
        scene,
        object_scene,
        template,
        first,
        segmented_centroid,
        spec,
        primary,
        ground_truth,
        ground_truth_mesh,
    })
}

/// Per-trial score file for the file completer.
pub fn score_file_name(mesh: &str, pose: usize, scenario: Scenario) -> String {
    format!("{mesh}_{pose:03}_{scenario}.bin")
}

fn complete(
    cfg: &SuiteConfig,
    setup: &PairSetup,
    scenario: Scenario,
    secondary: Option<SecondaryView<'_>>,
) -> Result<ScoreGrid, TrialFailure> {
    let band = ScoreBand {
        v_boundary: cfg.v_boundary,
        epsilon: cfg.epsilon,
    };
    let fail = |e: Error| TrialFailure::new(FailureCategory::Completer, e.to_string());
    match cfg.completer_choice().expect("validated config") {
        CompleterChoice::Shadow => ShadowCompleter { band }.complete(&setup.primary, secondary).map_err(fail),
        CompleterChoice::File(dir) => {
            let path = dir.join(score_file_name(&setup.mesh, setup.pose, scenario));
            let scores = FileCompleter { path }.complete(&setup.primary, secondary).map_err(fail)?;
            let labels = match secondary {
                None => ray_carve(&setup.primary),
                Some(s) => fuse_labels(&setup.primary, s.view, s.registration),
            };
            apply_carving(&scores, &labels).map_err(fail)
        }
    }
}

struct SecondChoice {
    rig: Rig,
    v_nbv: Option<Vector3>,
    fallback: bool,
    clamped: bool,
}

fn choose_second(cfg: &SuiteConfig, setup: &PairSetup, scenario: Scenario) -> Result<SecondChoice, TrialFailure> {
    let center = setup.scene.object_center();
    let eye1 = setup.first.camera.origin();
    let opposite = || Rig::looking_at(&antipode(&center, &eye1), &center);
    let plain = |rig| SecondChoice {
        rig,
        v_nbv: None,
        fallback: false,
        clamped: false,
    };
    match scenario {
        Scenario::Random => {
            let seed = setup.seeds.random_view;
            let eye = match cfg.second_view {
                SecondViewMode::Sphere => sample_sphere(&center, cfg.d_optimal, seed),
                SecondViewMode::Robot => sample_viewpoint(&center, cfg.d_optimal, cfg.robot.camera_height_range(), seed),
            };
            Ok(plain(Rig::looking_at(&eye, &center)?))
        }
        Scenario::Opposite => Ok(plain(opposite()?)),
        Scenario::NextBestView => {
            let scores = complete(cfg, setup, Scenario::SingleView, None)?;
            let uncertain = uncertain_voxels(&scores);
            let v_cam = match next_best_view(&uncertain, &setup.primary.camera) {
                Ok(v) => v,
                Err(Error::DegenerateSet(_)) | Err(Error::DegenerateInput(_)) => {
                    return Ok(SecondChoice {
                        fallback: true,
                        ..plain(opposite()?)
                    })
                }
                Err(e) => return Err(internal(e)),
            };
            let robot = setup.first.base;
            let v_robot = robot.inverse().transform_vector(&setup.first.camera.transform_vector(&v_cam));
            let centroid_robot = robot.inverse().transform_point(&setup.segmented_centroid);
            let sol = target_pose(&v_robot, &centroid_robot, &cfg.robot, cfg.d_optimal).map_err(internal)?;
            let eye = match cfg.second_view {
                SecondViewMode::Sphere => setup.segmented_centroid + robot.transform_vector(&sol.v_nbv) * cfg.d_optimal,
                SecondViewMode::Robot => robot.transform_point(&sol.camera_position(&cfg.robot)),
            };
            Ok(SecondChoice {
                rig: Rig::looking_at(&eye, &setup.segmented_centroid)?,
                v_nbv: Some(v_cam),
                fallback: false,
                clamped: sol.clamped,
            })
        }
        Scenario::SingleView | Scenario::SameView => unreachable!("single-capture scenario"),
    }
}

/// Secondary view in its own frame, on a grid of the primary's voxel size
/// centered on what it saw.
fn secondary_frame(setup: &PairSetup, depth: &DepthImage) -> Result<ViewFrame, TrialFailure> {
    let local = depth.reposed(RigidTransform::identity());
    let cloud = depth_to_cloud(&local);
    let b = cloud
        .bounds()
        .ok_or_else(|| TrialFailure::new(FailureCategory::RenderMiss, "second view saw nothing"))?;
    let edge = setup.spec.edge_length();
    let spec = GridSpec::new(setup.spec.resolution, b.center() - Vector3::repeat(edge / 2.0), setup.spec.voxel_size)
        .map_err(internal)?;
    ViewFrame::in_image_frame(&local, &spec).map_err(internal)
}

fn result_row(setup: &PairSetup, scenario: Scenario, noisy: bool) -> TrialResult {
    TrialResult {
        mesh: setup.mesh.clone(),
        mesh_index: setup.mesh_index,
        pose: setup.pose,
        scenario,
        noisy,
        renders: 1,
        jaccard: None,
        hausdorff_mm: None,
        v_nbv: None,
        nbv_fallback: false,
        nbv_clamped: false,
        table_height: setup.scene.table_height,
        seeds: setup.seeds,
        failure: None,
        wall_clock_s: 0.0,
    }
}

/// Runs one scenario on a prepared pair. `noisy` perturbs the registration
/// of two-view scenarios with the configured odometry noise.
pub fn run_scenario(cfg: &SuiteConfig, setup: &PairSetup, scenario: Scenario, noisy: bool, mesh_dir: Option<&Path>) -> TrialResult {
    let start = Instant::now();
    let mut row = result_row(setup, scenario, noisy);
    if let Err(f) = scenario_body(cfg, setup, scenario, noisy, mesh_dir, &mut row) {
        row.failure = Some(f);
    }
    row.wall_clock_s = start.elapsed().as_secs_f64();
    row
}

fn scenario_body(
    cfg: &SuiteConfig,
    setup: &PairSetup,
    scenario: Scenario,
    noisy: bool,
    mesh_dir: Option<&Path>,
    row: &mut TrialResult,
) -> Result<(), TrialFailure> {
    let identity = RigidTransform::identity();
    let scores = match scenario {
        Scenario::SingleView => complete(cfg, setup, scenario, None)?,
        Scenario::SameView => complete(
            cfg,
            setup,
            scenario,
            Some(SecondaryView {
                view: &setup.primary,
                registration: &identity,
            }),
        )?,
        _ => {
            let second = choose_second(cfg, setup, scenario)?;
            row.v_nbv = second.v_nbv;
            row.nbv_fallback = second.fallback;
            row.nbv_clamped = second.clamped;
            row.renders = 2;
            let depth = setup.object_scene.render(&setup.template.with_pose(second.rig.camera));
            if depth.valid_count() == 0 {
                return Err(TrialFailure::new(FailureCategory::RenderMiss, "object not visible from the second view"));
            }
            let view = secondary_frame(setup, &depth)?;
            let registration = if noisy {
                let model = cfg.noise.expect("noisy trials need a noise model").with_seed(setup.seeds.noise);
                let motion = setup.first.base.inverse().compose(&second.rig.base);
                let perturbed = perturb_registration(&motion, &model).map_err(internal)?;
                setup.first.head().inverse().compose(&perturbed).compose(&second.rig.head())
            } else {
                setup.first.camera.inverse().compose(&second.rig.camera)
            };
            complete(
                cfg,
                setup,
                scenario,
                Some(SecondaryView {
                    view: &view,
                    registration: &registration,
                }),
            )?
        }
    };

    let predicted = threshold_grid(&scores);
    row.jaccard = Some(jaccard(&predicted, &setup.ground_truth).map_err(internal)?);
    let mesh = marching_cubes(&scores, scores.v_boundary());
    if let Some(dir) = mesh_dir {
        write_meshes(dir, setup, scenario, noisy, &mesh)?;
    }
    if mesh.is_empty() {
        return Err(TrialFailure::new(FailureCategory::EmptyMesh, "prediction has no surface"));
    }
    let d = hausdorff_one_direction(&mesh, &setup.ground_truth_mesh, cfg.hausdorff_samples, setup.seeds.hausdorff)
        .map_err(internal)?;
    row.hausdorff_mm = Some(d * 1000.0);
    Ok(())
}

fn write_meshes(dir: &Path, setup: &PairSetup, scenario: Scenario, noisy: bool, mesh: &TriangleMesh) -> Result<(), TrialFailure> {
    let stem = format!("{}_{:03}", setup.mesh, setup.pose);
    let io = |e: Error| TrialFailure::new(FailureCategory::Internal, e.to_string());
    let gt = dir.join(format!("{stem}_gt.obj"));
    if !gt.exists() {
        nbv_core::mesh_io::save_mesh(&setup.ground_truth_mesh, &gt).map_err(io)?;
    }
    if !mesh.is_empty() {
        let suffix = if noisy { "_noisy" } else { "" };
        nbv_core::mesh_io::save_mesh(mesh, dir.join(format!("{stem}_{scenario}{suffix}.obj"))).map_err(io)?;
    }
    Ok(())
}

/// Every requested scenario of one pair; a failed setup fails them all.
pub fn run_pair(cfg: &SuiteConfig, entry: &MeshEntry, mesh_index: usize, pose: usize, mesh_dir: Option<&Path>) -> Vec<TrialResult> {
    let start = Instant::now();
    let variants: Vec<(Scenario, bool)> = cfg
        .scenarios
        .iter()
        .flat_map(|&s| {
            let noisy = cfg.noise.is_some() && s.is_two_view();
            std::iter::once((s, false)).chain(noisy.then_some((s, true)))
        })
        .collect();
    match prepare_pair(cfg, entry, mesh_index, pose) {
        Ok(setup) => variants
            .into_iter()
            .map(|(s, noisy)| run_scenario(cfg, &setup, s, noisy, mesh_dir))
            .collect(),
        Err(f) => {
            let seeds = TrialSeeds::derive(cfg.seed, mesh_index, pose);
            let elapsed = start.elapsed().as_secs_f64();
            variants
                .into_iter()
                .map(|(scenario, noisy)| TrialResult {
                    mesh: entry.name.clone(),
                    mesh_index,
                    pose,
                    scenario,
                    noisy,
                    renders: 1,
                    jaccard: None,
                    hausdorff_mm: None,
                    v_nbv: None,
                    nbv_fallback: false,
                    nbv_clamped: false,
                    table_height: pick_table_height(&cfg.table_heights, seeds.scene),
                    seeds,
                    failure: Some(f.clone()),
                    wall_clock_s: elapsed,
                })
                .collect()
        }
    }
}

/// One scenario of one pair.
pub fn run_trial(cfg: &SuiteConfig, entry: &MeshEntry, mesh_index: usize, pose: usize, scenario: Scenario, noisy: bool) -> TrialResult {
    let one = SuiteConfig {
        scenarios: vec![scenario],
        noise: if noisy { cfg.noise } else { None },
        ..cfg.clone()
    };
    run_pair(&one, entry, mesh_index, pose, None)
        .into_iter()
        .find(|r| r.noisy == noisy)
        .expect("requested variant is always produced")
}
