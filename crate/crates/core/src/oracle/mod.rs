//! Independent high-accuracy reference solutions.

mod grid;
mod spectral;

pub use grid::{load_grid, save_grid, ReferenceGrid, GRID_MAGIC, GRID_VERSION};
pub use spectral::{frame_masses, solve_spectral, SpectralConfig};

pub(crate) use grid::fnv1a;
