//! Triangle meshes, analytic primitives, isosurface extraction, and mesh IO.

pub mod bvh;
pub mod io;
pub mod marching_cubes;
mod mc_tables;
pub mod mesh;
pub mod mesh_field;
pub mod primitive;

pub use io::{mesh_read, mesh_write, MeshFormat};
pub use marching_cubes::{marching_cubes, GRID_PADDING};
pub use mesh::{normalize_to_unit_cube, TriangleMesh};
pub use mesh_field::MeshField;
pub use primitive::{Primitive, PrimitiveShape};
