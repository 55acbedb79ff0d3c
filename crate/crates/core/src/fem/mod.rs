//! Small-strain plane-stress finite elements for masonry cells and walls.

mod banded;
mod element;
mod generator;
mod mesh;
mod solver;

pub use banded::{reverse_cuthill_mckee, BandLu, BandMatrix};
pub use element::{ElementKernel, Quad, GAUSS_POINTS};
pub use generator::{generate_flemish_rve, FlemishGeometry};
pub use mesh::{characteristic_lengths, structured_grid, uniform_grid, Mesh, BRICK, MORTAR};
pub use solver::{
    apply_boundary_strain, upscale_stress, Analysis, BoundaryDrive, ElementLaw, FieldState, MaterialModel,
    SolverConfig, StepInfo,
};
