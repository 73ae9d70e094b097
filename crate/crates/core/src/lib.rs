//! Numerics for inhomogeneous twisted gl(N|M) XXX spin chains and their
//! classical counterpart, the rational Ruijsenaars–Schneider model.
//!
//! Indexing convention throughout the crate: sites and letters are
//! 0-based (`0..L`, `0..K`). Basis states are ordered lexicographically with
//! site 0 most significant, so the linear index of `(a_0, …, a_{L-1})` is
//! `Σ a_j K^{L-1-j}`. Operators act on column vectors: `m[(out, in)]`.

pub mod bethe;
pub mod chain;
pub mod error;
pub mod io;
pub mod linalg;
pub mod rs;
pub mod spectral;
pub mod superlinalg;
pub mod tau;

pub use num_complex::Complex64 as C64;

pub use chain::{ChainSpec, SpectrumRecord, WeightSector};
pub use error::{Error, Result};
pub use rs::{LaxData, RSState};
pub use spectral::{SpectralSolution, SpectralSystem};
pub use superlinalg::{BasisState, GradedOperator, Grading};
pub use tau::{Kernel, Partition, TauData, TimeVector};

/// Dense complex matrix used for every operator in the crate.
pub type CMat = nalgebra::DMatrix<C64>;

/// Crate version, echoed into CLI reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
