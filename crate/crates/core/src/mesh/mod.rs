//! Iso-surface extraction from the opacity field of a Gaussian cloud.

mod field;
mod tetra;
mod trimesh;

pub use field::{field_eval, OpacityField, FIELD_MAX};
pub use tetra::{extract_mesh, mesh_bounds, refine_edge, Lattice, MeshConfig, CUBE_TETS};
pub use trimesh::TriMesh;
