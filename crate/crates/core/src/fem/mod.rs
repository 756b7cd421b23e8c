//! Linear-elastic finite elements on voxel meshes: assembly, band-limited
//! eigenmodes and strain recovery.

pub mod assembly;
pub mod eigen;
pub mod element;
pub mod modefile;
pub mod modes;
pub mod strain;

pub use assembly::{assemble, AssembledSystem};
pub use eigen::{solve_band, EigenOptions, EigenPairs};
pub use modefile::{read_modes, write_modes};
pub use modes::{check_modes, energy_fractions, solve_modes, ModeSet};
pub use strain::{nodal_strain, strain_field, StrainTensor};
