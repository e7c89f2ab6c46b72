//! Spectral analysis of a four-sector Fock-space block operator matrix.

pub mod bands;
pub mod channel;
pub mod config;
pub mod determinant;
pub mod error;
pub mod fy;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod pencil;
pub mod roots;
pub mod verify;

pub use bands::{BandSet, Interval};
pub use channel::{BranchDecomposition, Channel, ChannelAnalysis, Disc12, EssentialSpectrum};
pub use config::{Closure, SpectralConfig};
pub use determinant::{CoeffMatrix, DeterminantEvaluator, Disc3};
pub use error::{Error, Result};
pub use model::{ModelProblem, Preset, TorusGrid};
