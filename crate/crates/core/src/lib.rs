//! Weyl-Wigner calculus for Gaussian measures on truncated Wiener spaces.
//!
//! Functions on the Wiener space are expanded in products of Hermite
//! polynomials `psi_j` orthonormal for the centred Gaussian of variance
//! `h/2`. Symbols live on pairs `(x_j, xi_j)` and are quantized through
//! the Wigner functions of the basis, which gives operator matrices whose
//! spectra can be studied numerically.
//!
//! The modules follow the data flow:
//! [`basis`] and [`gaussian`] supply the orthonormal basis and quadrature,
//! [`wigner`] the Wigner functions, [`symbols`] the symbol classes,
//! [`quadform`] the quadratic forms and matrices, [`heat`] the heat
//! semigroup and anti-Wick forms, [`positivity`] the positivity results and
//! [`stochproj`] the stochastic projection experiments.

pub mod basis;
mod boxquad;
pub mod error;
pub mod gaussian;
pub mod heat;
pub mod linalg;
pub mod positivity;
pub mod quadform;
pub mod report;
pub mod stochproj;
pub mod symbols;
pub mod wigner;

pub use basis::{CalcContext, MultiIndex, TruncationSet};
pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use quadform::{HermiteExpansion, OperatorMatrix};
pub use symbols::{PhaseSpaceSymbol, PhiSpec, SymbolDescriptor, SymbolFamily};
