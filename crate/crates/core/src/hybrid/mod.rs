//! Hybrid states: a finite discrete register tensored with two resource
//! qumodes whose state on every branch is an exact Gaussian.

pub mod gaussian;
pub mod grid;
pub mod mixed;
pub mod quadrature;
pub mod state;

pub use gaussian::{asymptotic_window_gain, overlap_closed_form, GaussianPair};
pub use grid::{grid_oracle_evolve, GridSpec, GridWavefunction};
pub use mixed::MixedHybridState;
pub use state::{
    BranchedHybridState, DenseHermitian, DiagonalGenerator, Generator, HomodyneWindow, ReflectionGenerator,
    RegisterLayout,
};
