//! Whole-suite runs and report files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use nbv_core::mesh_io::load_mesh;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Scenario, SuiteConfig};
use crate::scene::{procedural_meshes, GRIP_WIDTH};
use crate::trial::{run_pair, MeshEntry, TrialResult};

pub const TRIALS_CSV: &str = "trials.csv";
pub const REPORT_JSON: &str = "report.json";

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error(transparent)]
    Core(#[from] nbv_core::Error),
    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Mesh files (scaled to the grip width) followed by procedural objects.
pub fn load_meshes(cfg: &SuiteConfig) -> Result<Vec<MeshEntry>, SuiteError> {
    let mut out = Vec::new();
    for path in &cfg.meshes {
        let mesh = load_mesh(path)?.scale_to_grip_width(GRIP_WIDTH)?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "mesh".into());
        out.push(MeshEntry { name: stem, mesh });
    }
    if let Some(p) = &cfg.procedural_meshes {
        for (name, mesh) in procedural_meshes(p.count, p.seed) {
            out.push(MeshEntry {
                name,
                mesh: mesh.scale_to_grip_width(GRIP_WIDTH)?,
            });
        }
    }
    // Names key the output files; make repeats distinct.
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for e in &mut out {
        let n = seen.entry(e.name.clone()).or_insert(0);
        if *n > 0 {
            e.name = format!("{}_{}", e.name, n);
        }
        *n += 1;
    }
    Ok(out)
}

/// Runs every (mesh, pose) pair, `jobs` at a time (0 = all cores), and
/// returns rows sorted by (mesh, pose, scenario, noisy).
pub fn run_trials(cfg: &SuiteConfig, meshes: &[MeshEntry], jobs: usize, mesh_dir: Option<&Path>) -> Result<Vec<TrialResult>, SuiteError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SuiteError::Pool(e.to_string()))?;
    let pairs: Vec<(usize, usize)> = (0..meshes.len())
        .flat_map(|m| (0..cfg.poses_per_mesh).map(move |p| (m, p)))
        .collect();
    let mut rows: Vec<TrialResult> = pool.install(|| {
        pairs
            .par_iter()
            .flat_map_iter(|&(m, p)| {
                let rows = run_pair(cfg, &meshes[m], m, p, mesh_dir);
                log::debug!("{} pose {p}: {} trials", meshes[m].name, rows.len());
                rows
            })
            .collect()
    });
    rows.sort_by_key(|r| (r.mesh_index, r.pose, r.scenario, r.noisy));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub scenario: Scenario,
    pub noisy: bool,
    pub trials: usize,
    pub failures: usize,
    pub failures_by_category: BTreeMap<&'static str, usize>,
    /// Rows with a Jaccard value (empty-mesh failures still have one).
    pub jaccard_count: usize,
    pub mean_jaccard: Option<f64>,
    pub hausdorff_count: usize,
    pub mean_hausdorff_mm: Option<f64>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn aggregate(rows: &[TrialResult]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(Scenario, bool), Vec<&TrialResult>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.scenario, r.noisy)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((scenario, noisy), rs)| {
            let mut by_cat = BTreeMap::new();
            for f in rs.iter().filter_map(|r| r.failure.as_ref()) {
                *by_cat.entry(f.category.name()).or_insert(0) += 1;
            }
            let j: Vec<f64> = rs.iter().filter_map(|r| r.jaccard).collect();
            let h: Vec<f64> = rs.iter().filter_map(|r| r.hausdorff_mm).collect();
            Aggregate {
                scenario,
                noisy,
                trials: rs.len(),
                failures: rs.iter().filter(|r| !r.ok()).count(),
                failures_by_category: by_cat,
                jaccard_count: j.len(),
                mean_jaccard: mean(&j),
                hausdorff_count: h.len(),
                mean_hausdorff_mm: mean(&h),
            }
        })
        .collect()
}

/// Mean Jaccard of a scenario, if any row has one.
pub fn mean_jaccard(aggs: &[Aggregate], scenario: Scenario, noisy: bool) -> Option<f64> {
    aggs.iter()
        .find(|a| a.scenario == scenario && a.noisy == noisy)
        .and_then(|a| a.mean_jaccard)
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    mesh: &'a str,
    pose: usize,
    scenario: &'a str,
    noisy: bool,
    status: &'a str,
    failure: &'a str,
    renders: usize,
    jaccard: Option<f64>,
    hausdorff_mm: Option<f64>,
    v_nbv_x: Option<f64>,
    v_nbv_y: Option<f64>,
    v_nbv_z: Option<f64>,
    nbv_fallback: bool,
    nbv_clamped: bool,
    table_height: f64,
    seed_scene: u64,
    seed_first_view: u64,
    seed_random_view: u64,
    seed_ransac: u64,
    seed_hausdorff: u64,
    seed_noise: u64,
}

/// One CSV row per trial. Carries no wall-clock data, so reruns are
/// byte-identical.
pub fn trials_csv(rows: &[TrialResult]) -> Result<String, SuiteError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        let status = if r.ok() { "ok" } else { "failed" };
        let failure = r.failure.as_ref().map_or("", |f| f.category.name());
        w.serialize(CsvRow {
            mesh: &r.mesh,
            pose: r.pose,
            scenario: r.scenario.name(),
            noisy: r.noisy,
            status,
            failure,
            renders: r.renders,
            jaccard: r.jaccard,
            hausdorff_mm: r.hausdorff_mm,
            v_nbv_x: r.v_nbv.map(|v| v.x),
            v_nbv_y: r.v_nbv.map(|v| v.y),
            v_nbv_z: r.v_nbv.map(|v| v.z),
            nbv_fallback: r.nbv_fallback,
            nbv_clamped: r.nbv_clamped,
            table_height: r.table_height,
            seed_scene: r.seeds.scene,
            seed_first_view: r.seeds.first_view,
            seed_random_view: r.seeds.random_view,
            seed_ransac: r.seeds.ransac,
            seed_hausdorff: r.seeds.hausdorff,
            seed_noise: r.seeds.noise,
        })
        .map_err(|e| SuiteError::Write {
            path: TRIALS_CSV.into(),
            message: e.to_string(),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| SuiteError::Write {
        path: TRIALS_CSV.into(),
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[derive(Debug, Serialize)]
pub struct Deterministic<'a> {
    pub seed: u64,
    pub meshes: Vec<&'a str>,
    pub poses_per_mesh: usize,
    pub resolution: usize,
    pub aggregates: Vec<Aggregate>,
    /// Failed rows with their messages, for triage.
    pub failures: Vec<FailureNote<'a>>,
}

#[derive(Debug, Serialize)]
pub struct FailureNote<'a> {
    pub mesh: &'a str,
    pub pose: usize,
    pub scenario: Scenario,
    pub noisy: bool,
    pub category: &'static str,
    pub message: &'a str,
}

#[derive(Debug, Serialize)]
pub struct Metadata {
    pub unix_time: u64,
    pub host: String,
    pub wall_clock_s: f64,
    pub jobs: usize,
    pub trial_wall_clock_s: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub deterministic: Deterministic<'a>,
    pub metadata: Metadata,
}

fn host_name() -> String {
    std::env::var("HOSTNAME")
        .ok()
        .or_else(|| std::fs::read_to_string("/etc/hostname").ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

pub fn deterministic_section<'a>(cfg: &SuiteConfig, meshes: &'a [MeshEntry], rows: &'a [TrialResult]) -> Deterministic<'a> {
    Deterministic {
        seed: cfg.seed,
        meshes: meshes.iter().map(|m| m.name.as_str()).collect(),
        poses_per_mesh: cfg.poses_per_mesh,
        resolution: cfg.resolution,
        aggregates: aggregate(rows),
        failures: rows
            .iter()
            .filter_map(|r| {
                r.failure.as_ref().map(|f| FailureNote {
                    mesh: &r.mesh,
                    pose: r.pose,
                    scenario: r.scenario,
                    noisy: r.noisy,
                    category: f.category.name(),
                    message: &f.message,
                })
            })
            .collect(),
    }
}

/// Outcome of [`run_suite`].
pub struct SuiteOutput {
    pub meshes: Vec<MeshEntry>,
    pub rows: Vec<TrialResult>,
    pub aggregates: Vec<Aggregate>,
}

/// Runs the suite and writes `trials.csv`, `report.json` and, when asked,
/// per-trial meshes under `out_dir/meshes`.
pub fn run_suite(cfg: &SuiteConfig, out_dir: &Path, jobs: usize) -> Result<SuiteOutput, SuiteError> {
    let start = Instant::now();
    let write_err = |path: &Path, e: std::io::Error| SuiteError::Write {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    std::fs::create_dir_all(out_dir).map_err(|e| write_err(out_dir, e))?;
    let mesh_dir = out_dir.join("meshes");
    if cfg.write_meshes {
        std::fs::create_dir_all(&mesh_dir).map_err(|e| write_err(&mesh_dir, e))?;
    }
    let meshes = load_meshes(cfg)?;
    log::info!("{} meshes × {} poses, scenarios {:?}", meshes.len(), cfg.poses_per_mesh, cfg.scenarios);
    let rows = run_trials(cfg, &meshes, jobs, cfg.write_meshes.then_some(mesh_dir.as_path()))?;

    let csv_path = out_dir.join(TRIALS_CSV);
    std::fs::write(&csv_path, trials_csv(&rows)?).map_err(|e| write_err(&csv_path, e))?;

    let report = Report {
        deterministic: deterministic_section(cfg, &meshes, &rows),
        metadata: Metadata {
            unix_time: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            host: host_name(),
            wall_clock_s: start.elapsed().as_secs_f64(),
            jobs: if jobs == 0 { rayon::current_num_threads() } else { jobs },
            trial_wall_clock_s: rows.iter().map(|r| r.wall_clock_s).collect(),
        },
    };
    let json_path = out_dir.join(REPORT_JSON);
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&json_path, text).map_err(|e| write_err(&json_path, e))?;
    let aggregates = report.deterministic.aggregates.clone();
    drop(report);
    Ok(SuiteOutput { meshes, rows, aggregates })
}

/// Plain-text summary table, one line per scenario variant.
pub fn summary_table(aggs: &[Aggregate]) -> String {
    let mut s = format!(
        "{:<16} {:>5} {:>7} {:>8} {:>10} {:>14}\n",
        "scenario", "noisy", "trials", "failed", "jaccard", "hausdorff_mm"
    );
    let fmt = |v: Option<f64>, prec: usize| v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"));
    for a in aggs {
        s.push_str(&format!(
            "{:<16} {:>5} {:>7} {:>8} {:>10} {:>14}\n",
            a.scenario.name(),
            if a.noisy { "yes" } else { "no" },
            a.trials,
            a.failures,
            fmt(a.mean_jaccard, 4),
            fmt(a.mean_hausdorff_mm, 2)
        ));
    }
    s
}
