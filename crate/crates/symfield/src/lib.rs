//! Learning Hamiltonian vector fields from small noisy trajectory datasets.
//!
//! The learner is a vector-valued kernel ridge regression whose matrix-valued
//! kernel encodes structural side information: a symplectic kernel makes every
//! function in the hypothesis space an exact Hamiltonian field, and an odd
//! kernel makes it odd symmetric. Both constraints together give the odd
//! symplectic kernel, which preserves energy along learned trajectories and
//! generalizes across the phase space from a handful of noisy samples.
//!
//! Modules:
//! * [`kernels`] — closed-form scalar and matrix-valued kernels
//! * [`systems`] — benchmark Hamiltonian systems (harmonic oscillator, pendulum)
//! * [`simulate`] — fixed-step integration, dataset generation, rollouts
//! * [`regression`] — block Gram assembly and the regularized solve
//! * [`tune`] — k-fold cross-validation grid search for `(sigma, lambda)`
//! * [`evaluate`] — odd-error statistics, Hamiltonian constancy, field grids
//! * [`repro`] — end-to-end benchmark experiment recipes

pub mod error;
pub mod evaluate;
pub mod kernels;
pub mod regression;
pub mod repro;
pub mod simulate;
pub mod systems;
pub mod tune;

pub use error::{Error, Result};
pub use kernels::{KernelFamily, KernelSpec};
pub use regression::{Dataset, DatasetMeta, TrainedModel};
pub use simulate::{Integrator, NoiseSpec, TrajectorySpec, VectorField};
pub use systems::HamiltonianSystem;
