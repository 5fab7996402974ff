use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use nbv_core::binvox::write_binvox;
use nbv_core::completion::{read_score_grid, write_score_grid, Completer, ScoreBand, SecondaryView, ShadowCompleter, ViewFrame};
use nbv_core::marching_cubes::marching_cubes;
use nbv_core::mesh_io::{load_mesh, save_mesh};
use nbv_core::nbv::{next_best_view, target_pose, RobotGeometry};
use nbv_core::views::{depth_to_cloud, level_orientation, look_at, read_depth_raw, render_depth, write_depth_png, write_depth_raw, CameraModel};
use nbv_core::voxel::{fit_spec, threshold_grid, uncertain_voxels, voxelize_cloud, voxelize_mesh_solid};
use nbv_core::{Point3, PointCloud, RigidTransform, Vector3};
use nbv_harness::cloud_io::{read_xyz, write_xyz};
use nbv_harness::suite::summary_table;
use nbv_harness::{run_suite, ConfigError, SuiteConfig, SuiteError};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "nbv", version, about = "Next-best-view reconstruction toolkit")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a depth view of a mesh and back-project it to a cloud.
    Render(RenderArgs),
    /// Complete one or two depth views into an occupancy score grid.
    Complete(CompleteArgs),
    /// Choose the next view from a score grid.
    Nbv(NbvArgs),
    /// Run a scenario suite from a config file.
    Evaluate(EvaluateArgs),
    /// Voxelize a mesh (solid) or a point cloud into a .binvox file.
    Voxelize(VoxelizeArgs),
}

#[derive(Args)]
struct CameraArgs {
    #[arg(long, default_value_t = 320)]
    width: u32,
    #[arg(long, default_value_t = 240)]
    height: u32,
    /// Vertical field of view, degrees.
    #[arg(long, default_value_t = 60.0)]
    fov: f64,
    #[arg(long, default_value_t = 4.0)]
    max_range: f64,
}

impl CameraArgs {
    fn model(&self) -> CameraModel {
        CameraModel {
            width: self.width,
            height: self.height,
            vertical_fov_deg: self.fov,
            max_range: self.max_range,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Camera position, `x,y,z` in the mesh frame.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    eye: Point3,
    /// Point the camera looks at; defaults to the mesh's bounding-box center.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    target: Option<Point3>,
    #[command(flatten)]
    camera: CameraArgs,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// File stem for the outputs.
    #[arg(long, default_value = "view")]
    name: String,
}

#[derive(Args)]
struct CompleteArgs {
    /// Primary view (raw depth with its .json sidecar).
    #[arg(long)]
    depth: PathBuf,
    /// Optional second view; registered through the sidecar poses.
    #[arg(long)]
    second: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    resolution: usize,
    /// Grid padding, fraction of the cloud's largest extent.
    #[arg(long, default_value_t = 0.25)]
    padding: f64,
    #[arg(long, default_value_t = 0.5)]
    v_boundary: f64,
    #[arg(long, default_value_t = 0.025)]
    epsilon: f64,
    /// Score grid output (.bin plus .json sidecar).
    #[arg(long)]
    out: PathBuf,
    /// Also write the thresholded surface as a mesh (.obj/.off/.stl).
    #[arg(long)]
    mesh: Option<PathBuf>,
}

#[derive(Args)]
struct NbvArgs {
    /// Score grid in the current camera's frame.
    #[arg(long)]
    scores: PathBuf,
    /// Robot geometry JSON; defaults apply when omitted.
    #[arg(long)]
    robot: Option<PathBuf>,
    /// Camera pose in the robot frame as JSON; defaults to a level camera
    /// at the base camera height looking along +x.
    #[arg(long)]
    camera_pose: Option<PathBuf>,
    #[arg(long, default_value_t = 0.6)]
    d_optimal: f64,
    /// Write the solution here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "nbv-out")]
    out_dir: PathBuf,
    /// Worker threads, 0 for all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct VoxelizeArgs {
    #[arg(long, conflicts_with = "cloud", required_unless_present = "cloud")]
    mesh: Option<PathBuf>,
    /// `x y z` text cloud.
    #[arg(long)]
    cloud: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    resolution: usize,
    #[arg(long, default_value_t = 0.05)]
    padding: f64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_point(s: &str) -> Result<Point3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, z] => Ok(Point3::new(x, y, z)),
        _ => Err(format!("expected x,y,z, got {} values", v.len())),
    }
}

fn render(a: &RenderArgs) -> anyhow::Result<()> {
    let mesh = load_mesh(&a.mesh)?;
    let target = match a.target {
        Some(t) => t,
        None => mesh.bounds().context("mesh is empty")?.center(),
    };
    let camera = a.camera.model().with_pose(look_at(&a.eye, &target)?);
    camera.validate()?;
    let img = render_depth(&mesh, &camera);
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let base = a.out_dir.join(&a.name);
    write_depth_png(&img, base.with_extension("png"))?;
    write_depth_raw(&img, base.with_extension("raw"))?;
    write_xyz(&depth_to_cloud(&img), base.with_extension("xyz"))?;
    println!("{} of {} pixels hit; wrote {}.{{png,raw,json,xyz}}", img.valid_count(), camera.pixel_count(), base.display());
    Ok(())
}

fn complete(a: &CompleteArgs) -> anyhow::Result<()> {
    let primary_depth = read_depth_raw(&a.depth)?;
    let local = primary_depth.reposed(RigidTransform::identity());
    let cloud = depth_to_cloud(&local);
    let bounds = cloud.bounds().context("primary view has no valid depth")?;
    let spec = fit_spec(&bounds, a.resolution, a.padding)?;
    let primary = ViewFrame::in_image_frame(&primary_depth, &spec)?;
    let completer = ShadowCompleter {
        band: ScoreBand {
            v_boundary: a.v_boundary,
            epsilon: a.epsilon,
        },
    };
    let scores = match &a.second {
        None => completer.complete(&primary, None)?,
        Some(p) => {
            let second_depth = read_depth_raw(p)?;
            let registration = primary_depth.camera.pose.inverse().compose(&second_depth.camera.pose);
            let second_local = second_depth.reposed(RigidTransform::identity());
            let b = depth_to_cloud(&second_local).bounds().context("second view has no valid depth")?;
            let second_spec = fit_spec(&b, a.resolution, a.padding)?;
            let second = ViewFrame::in_image_frame(&second_local, &second_spec)?;
            completer.complete(
                &primary,
                Some(SecondaryView {
                    view: &second,
                    registration: &registration,
                }),
            )?
        }
    };
    write_score_grid(&scores, &a.out)?;
    let occupied = threshold_grid(&scores).count();
    let uncertain = uncertain_voxels(&scores).len();
    println!("{}³ grid: {occupied} occupied, {uncertain} uncertain; wrote {}", spec.resolution, a.out.display());
    if let Some(m) = &a.mesh {
        let surface = marching_cubes(&scores, scores.v_boundary());
        save_mesh(&surface, m)?;
        println!("surface: {} triangles in {}", surface.faces().len(), m.display());
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| nbv_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| {
        nbv_core::Error::Parse {
            path: path.to_path_buf(),
            location: format!("line {}", e.line()),
            message: e.to_string(),
        }
        .into()
    })
}

#[derive(Serialize)]
struct NbvOutput {
    /// Direction in the score grid's (camera) frame.
    v_nbv_camera: Vector3,
    /// Object centroid in the robot frame.
    centroid: Point3,
    uncertain_voxels: usize,
    solution: nbv_core::nbv::NbvSolution,
}

fn nbv(a: &NbvArgs) -> anyhow::Result<()> {
    let scores = read_score_grid(&a.scores)?;
    let robot: RobotGeometry = match &a.robot {
        Some(p) => read_json(p)?,
        None => RobotGeometry::default(),
    };
    let head = match &a.camera_pose {
        Some(p) => read_json(p)?,
        None => RigidTransform::new(level_orientation().rotation, Vector3::new(0.0, 0.0, robot.base_camera_height)),
    };
    let uncertain = uncertain_voxels(&scores);
    let camera = CameraModel::default();
    let v_cam = next_best_view(&uncertain, &camera)?;
    // Centroid of what is believed occupied, else of the uncertain set.
    let occupied = threshold_grid(&scores).occupied_centers();
    let pts = if occupied.is_empty() { &uncertain.centroids } else { &occupied };
    let centroid_cam = PointCloud::new(pts.clone())?.centroid().context("no voxels to aim at")?;
    let centroid = head.transform_point(&centroid_cam);
    let solution = target_pose(&head.transform_vector(&v_cam), &centroid, &robot, a.d_optimal)?;
    let out = NbvOutput {
        v_nbv_camera: v_cam,
        centroid,
        uncertain_voxels: uncertain.len(),
        solution,
    };
    let text = serde_json::to_string_pretty(&out)?;
    match &a.out {
        Some(p) => std::fs::write(p, text).map_err(|e| nbv_core::Error::Io {
            path: p.clone(),
            source: e,
        })?,
        None => println!("{text}"),
    }
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> anyhow::Result<()> {
    let mut cfg = SuiteConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let out = run_suite(&cfg, &a.out_dir, a.jobs)?;
    print!("{}", summary_table(&out.aggregates));
    println!("wrote {}", a.out_dir.display());
    Ok(())
}

fn voxelize(a: &VoxelizeArgs) -> anyhow::Result<()> {
    let grid = match (&a.mesh, &a.cloud) {
        (Some(m), _) => {
            let mesh = load_mesh(m)?;
            let spec = fit_spec(&mesh.bounds().context("mesh is empty")?, a.resolution, a.padding)?;
            voxelize_mesh_solid(&mesh, &spec)
        }
        (None, Some(c)) => {
            let cloud = read_xyz(c)?;
            let spec = fit_spec(&cloud.bounds().context("cloud is empty")?, a.resolution, a.padding)?;
            voxelize_cloud(&cloud, &spec)?.grid
        }
        (None, None) => bail!("either --mesh or --cloud is required"),
    };
    write_binvox(&grid, &a.out)?;
    println!("{} of {} voxels set; wrote {}", grid.count(), grid.spec().cell_count(), a.out.display());
    Ok(())
}

/// 2: bad config or usage, 3: file I/O or unreadable input, 4: anything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    let core = |c: &nbv_core::Error| match c {
        nbv_core::Error::Io { .. } | nbv_core::Error::Parse { .. } | nbv_core::Error::ScoreLoad(_) => 3,
        nbv_core::Error::InvalidArgument(_) => 2,
        _ => 4,
    };
    if e.downcast_ref::<ConfigError>().is_some() {
        2
    } else if let Some(c) = e.downcast_ref::<nbv_core::Error>() {
        core(c)
    } else if let Some(s) = e.downcast_ref::<SuiteError>() {
        match s {
            SuiteError::Core(c) => core(c),
            SuiteError::Write { .. } => 3,
            SuiteError::Pool(_) => 4,
        }
    } else {
        4
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let r = match &cli.command {
        Command::Render(a) => render(a),
        Command::Complete(a) => complete(a),
        Command::Nbv(a) => nbv(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Voxelize(a) => voxelize(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
