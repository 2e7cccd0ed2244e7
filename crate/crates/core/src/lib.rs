//! Numerics for the fractal uncertainty principle on discrete Cantor sets.
//!
//! A base `M` and an alphabet of `A` digits generate the Cantor sets
//! `C_k = { sum a_j M^j : a_j in alphabet }` inside `{0, .., M^k - 1}`. The
//! central quantity is the operator norm
//!
//! ```text
//! r_k = || 1_{C_k} F_N 1_{C_k} ||,   N = M^k,
//! ```
//!
//! where `F_N` is the unitary discrete Fourier transform. Its decay in `N`
//! is measured by the exponents `beta_k = -log r_k / (k log M)`.
//!
//! The crate is organised by subsystem:
//!
//! - [`cantor`]: alphabets and Cantor index sets.
//! - [`fourier`]: the unitary DFT (radix-`M` FFT) and the restricted operator.
//! - [`spectral`]: `r_k`, exponent lower bounds, the Gram matrix and its Schur bound.
//! - [`alphabets`]: the uniform probability space of alphabets, exponential sums,
//!   Lipschitz norms, tail probabilities and square-root-cancellation good sets.
//! - [`permutations`]: injective maps, the projection onto alphabets and
//!   length certificates for finite metric spaces.
//! - [`oqm`]: the open quantum baker's map and Gelfand spectral-radius estimates.
//! - [`experiments`]: theorem-level harnesses producing serialisable records.

pub mod alphabets;
pub mod cantor;
pub mod error;
pub mod experiments;
pub mod fourier;
pub mod linalg;
pub mod oqm;
pub mod permutations;
pub mod rng;
pub mod spectral;

pub use cantor::{Alphabet, CantorSet};
pub use error::{Error, ErrorKind, Result};

pub use num_complex::Complex64;

/// Size caps shared by every subsystem.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Limits {
    /// Largest admissible `N = M^k` for Cantor sets and transforms.
    pub n_cap: u64,
    /// Largest alphabet space that may be enumerated exactly.
    pub enumeration_cap: u64,
    /// Largest permutation space that may be enumerated exactly.
    pub permutation_cap: u64,
    /// Largest alphabet size accepted by the dense Gram eigensolver.
    pub dense_cap: usize,
    /// Largest `N` for which a dense open quantum map is materialised.
    pub oqm_dense_cap: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            n_cap: 1 << 40,
            enumeration_cap: 10_000_000,
            permutation_cap: 1_000_000,
            dense_cap: 512,
            oqm_dense_cap: 4096,
        }
    }
}

/// Formats a complex number as `re+imj`, the text form used in CSV output.
pub fn format_complex(z: Complex64) -> String {
    format!("{}{:+}j", z.re, z.im)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_text_form() {
        assert_eq!(format_complex(Complex64::new(1.0, -2.0)), "1-2j");
        assert_eq!(format_complex(Complex64::new(0.5, 0.25)), "0.5+0.25j");
    }
}
