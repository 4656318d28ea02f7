//! Deterministic numerical kernels: dense SPD factorization, adaptive
//! quadrature, bracketed root finding and seeded random streams.

mod linalg;
mod quad;
mod rng;
mod roots;

pub use linalg::{
    extremal_eigenvalues, factor_logdet, factor_logdet_with, spectral_norm, Cholesky, SpdMatrix,
    DEFAULT_PIVOT_TOL,
};
pub use quad::{adaptive_quad, adaptive_quad_with, QuadOptions, DEFAULT_QUAD_TOL};
pub use rng::{derive_stream, make_stream, RandomStream};
pub use roots::{root_find, DEFAULT_ROOT_TOL};
