//! Truncated matrix models and transform calculus for t-deformed gaussian
//! algebras.
//!
//! The crate is organized bottom-up:
//!
//! - [`scalar`]: `f64` and the exact quadratic field `Q(√t)`.
//! - [`fock`]: word-indexed truncated t-Fock space and its vectors.
//! - [`operators`]: sparse creation, annihilation, gaussian and `c^t`
//!   operators, first quantization, vacuum moments, norm estimates.
//! - [`polynomials`]: Chebyshev polynomials, the families `u_k`, `v_k`, their
//!   relations, and the words-to-basis identity.
//! - [`series`]: truncated formal power series (composition, reversion).
//! - [`spectra`]: closed-form measures, Cauchy transforms, continued
//!   fractions, Stieltjes inversion, quadrature and Jacobi recovery.
//! - [`cfree`]: conditionally free mixed moments and convolutions.
//! - [`analysis`]: regime classification, eigenvectors, kernel recursion,
//!   the conjugation `S`, Khinchine operators and the large-`n` limit.
//! - [`cli`]: the batch command surface behind the `tgauss` binary.

pub mod analysis;
pub mod cfree;
pub mod cli;
pub mod error;
pub mod fock;
pub mod operators;
pub mod polynomials;
pub mod scalar;
pub mod series;
pub mod spectra;

pub use error::{Error, Result};
pub use fock::{enumerate_basis, inner_product, word_index, DeformParams, FockSpace, FockVector, Word};
pub use operators::SparseOperator;
pub use scalar::{parse_rational, ratio, Scalar, Surd};
