//! Geometric perception pipeline for uncertainty-driven next-best-view planning.
//!
//! The crate covers the full chain from a raw depth capture to a scored
//! reconstruction:
//!
//! - [`geometry`] and [`mesh`]: points, rigid transforms, planes, triangle meshes;
//!   [`mesh_io`] reads and writes OFF, OBJ and STL.
//! - [`voxel`] and [`binvox`]: occupancy-score grids, thresholding, the
//!   uncertain-voxel band and binvox files.
//! - [`segmentation`]: band filter, RANSAC support plane, above-plane extraction.
//! - [`views`]: pinhole depth rendering over a BVH, back-projection, panoramas.
//! - [`completion`]: ray carving, the occlusion-shadow and file-backed
//!   completers, two-view fusion, and [`marching_cubes`].
//! - [`nbv`]: PCA over uncertain voxels and the robot target pose.
//! - [`metrics`]: Jaccard, one-directional Hausdorff, SPL and E2ESPL.
//! - [`noise`]: seeded odometry noise for registration ablations.
//!
//! Quaternions are stored scalar-last (`[x, y, z, w]`) and rotations are
//! right-handed. Camera frames follow the optical convention: `+x` right,
//! `+y` down, `+z` along the optical axis. World frames are `z`-up.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binvox;
pub mod bvh;
pub mod completion;
pub mod error;
pub mod geometry;
pub mod marching_cubes;
pub mod mesh;
pub mod mesh_io;
pub mod metrics;
pub mod nbv;
pub mod noise;
pub mod segmentation;
pub mod shapes;
pub mod views;
pub mod voxel;

pub use error::{Error, Result};
pub use geometry::{transform_cloud, Aabb, Plane, PointCloud, RigidTransform};
pub use mesh::TriangleMesh;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
