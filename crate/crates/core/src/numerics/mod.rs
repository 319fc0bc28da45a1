//! Quadrature, dense complex linear algebra, random streams and periodic
//! field synthesis.

pub mod fft;
pub mod linalg;
pub mod quad;
pub mod rng;

pub use fft::{spectral_synthesize, Fft, SpectralField};
pub use linalg::{gmres, log_det, solve_dense, DenseMatrix, GmresReport, Lu, REAL_DET_TOL};
pub use quad::{integrate_1d, integrate_real, Domain, QuadratureRule};
pub use rng::{Generator, RandomStream};
