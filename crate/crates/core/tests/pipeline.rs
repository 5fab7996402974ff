//! End-to-end through the public API: render, carve, fuse, mesh, score.

use nbv_core::binvox::{read_binvox, write_binvox};
use nbv_core::completion::{fuse_views, read_score_grid, shadow_complete, write_score_grid, ScoreBand, ViewFrame};
use nbv_core::marching_cubes::marching_cubes;
use nbv_core::metrics::{hausdorff_one_direction, jaccard};
use nbv_core::nbv::next_best_view;
use nbv_core::views::{look_at, read_depth_png, read_depth_raw, render_depth, write_depth_png, write_depth_raw, CameraModel};
use nbv_core::voxel::{fit_spec, threshold_grid, uncertain_voxels, voxelize_mesh_solid};
use nbv_core::{shapes, Point3, RigidTransform, Vector3};

/// A view in its own camera frame, gridded around what it saw.
fn view_from(mesh: &nbv_core::TriangleMesh, eye: Point3) -> (ViewFrame, RigidTransform) {
    let target = mesh.bounds().unwrap().center();
    let pose = look_at(&eye, &target).unwrap();
    let depth = render_depth(mesh, &CameraModel::default().with_pose(pose));
    let cloud = nbv_core::views::depth_to_cloud(&depth.reposed(RigidTransform::identity()));
    let spec = fit_spec(&cloud.bounds().unwrap(), 40, 0.25).unwrap();
    (ViewFrame::in_image_frame(&depth, &spec).unwrap(), pose)
}

#[test]
fn two_views_beat_one_on_a_box() {
    let mesh = shapes::cuboid(Vector3::new(0.2, 0.12, 0.1));
    let (v1, p1) = view_from(&mesh, Point3::new(0.5, 0.2, 0.35));
    let (v2, p2) = view_from(&mesh, Point3::new(-0.5, -0.2, -0.35));
    let band = ScoreBand::default();

    let gt_mesh = mesh.transformed(&p1.inverse());
    let gt = voxelize_mesh_solid(&gt_mesh, v1.spec());
    let single = shadow_complete(&v1, band).unwrap();
    let fused = fuse_views(&v1, &v2, &p1.inverse().compose(&p2), band).unwrap();
    let j1 = jaccard(&threshold_grid(&single), &gt).unwrap();
    let j2 = jaccard(&threshold_grid(&fused), &gt).unwrap();
    assert!(j2 > j1 + 0.1, "fused {j2} vs single {j1}");
    assert!(j2 > 0.6, "{j2}");

    let surface = marching_cubes(&fused, 0.5);
    assert_eq!(surface.non_manifold_edges(), 0);
    let h = hausdorff_one_direction(&surface, &gt_mesh, 2000, 1).unwrap();
    assert!(h < 0.05, "{h}");

    // The uncertain set after one view is the shadow; a second view should
    // come from the side away from the first camera.
    let v = next_best_view(&uncertain_voxels(&single), &v1.camera).unwrap();
    let centroid = gt_mesh.bounds().unwrap().center();
    assert!(v.dot(&(v1.camera.position() - centroid)) < 0.0);
}

#[test]
fn artifacts_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = shapes::uv_sphere(0.1, 16, 32);
    let pose = look_at(&Point3::new(0.0, -0.5, 0.2), &Point3::origin()).unwrap();
    let depth = render_depth(&mesh, &CameraModel::default().with_pose(pose));

    write_depth_raw(&depth, dir.path().join("d.raw")).unwrap();
    let raw = read_depth_raw(dir.path().join("d.raw")).unwrap();
    // JSON floats may come back one ulp off.
    assert_eq!((raw.camera.width, raw.camera.height), (depth.camera.width, depth.camera.height));
    assert!((raw.camera.pose.translation - pose.translation).norm() < 1e-12);
    assert!(raw.camera.pose.rotation.angle_to(&pose.rotation) < 1e-9);
    assert!(raw.depth.iter().zip(&depth.depth).all(|(a, b)| (a - b).abs() < 1e-6));

    write_depth_png(&depth, dir.path().join("d.png")).unwrap();
    let png = read_depth_png(dir.path().join("d.png"), depth.camera).unwrap();
    assert!(png.depth.iter().zip(&depth.depth).all(|(a, b)| (a - b).abs() <= 0.0005 + 1e-12));

    let spec = fit_spec(&mesh.bounds().unwrap(), 40, 0.05).unwrap();
    let solid = voxelize_mesh_solid(&mesh, &spec);
    write_binvox(&solid, dir.path().join("s.binvox")).unwrap();
    let back = read_binvox(dir.path().join("s.binvox")).unwrap();
    assert_eq!(back.bits(), solid.bits());
    assert!(back.spec().approx_eq(&spec, 1e-6));

    let local = fit_spec(&mesh.transformed(&pose.inverse()).bounds().unwrap(), 40, 0.05).unwrap();
    let view = ViewFrame::in_image_frame(&depth, &local).unwrap();
    assert!(view.grid.count() > 0);
    let scores = shadow_complete(&view, ScoreBand::default()).unwrap();
    write_score_grid(&scores, dir.path().join("g.bin")).unwrap();
    let loaded = read_score_grid(dir.path().join("g.bin")).unwrap();
    assert_eq!(loaded.scores(), scores.scores());
}
