//! Certificates for decomposing the inverse power map of GF(2^n) into
//! quadratic (Gold) and cubic power maps.
//!
//! The inverse `x -> x^(2^n - 2)` is a composition of power maps
//! `x -> x^(e_1)`, ..., `x -> x^(e_r)` whenever
//! `e_1 * ... * e_r ≡ -1 (mod 2^n - 1)`. This crate finds such products with
//! every `e_i` of binary weight two (`2^a + 1`) or three (`2^a + 2^b + 1`),
//! and checks them independently.
//!
//! - [`modarith`]: valuations, Jacobi symbols, primality, 2-Sylow logs
//! - [`factor`]: certified factorizations of `2^n - 1`
//! - [`good`]: the closed-form decomposition for `n` with `(n-1)/2^v = 2^k 3^s`
//! - [`lin2k`]: linear algebra over GF(2) and `Z/2^a`
//! - [`decompose`]: the general search driven by Legendre symbol patterns
//! - [`certify`]: certificate verification and the on-disk format
//! - [`sweep`]: batch runs over many `n`
//! - [`cli`]: the `goldcert` command line

pub mod certify;
pub mod cli;
pub mod decompose;
pub mod factor;
pub mod good;
pub mod lin2k;
pub mod modarith;
pub mod par;
pub mod sweep;

pub use certify::{verify, DecompositionCertificate, FactorKind, GoldFactor, Method};
pub use decompose::{decompose, DecomposeConfig, Decomposition, SelectionPolicy};
pub use factor::{factor_mersenne, FactorTable, MersenneFactorization};
pub use good::{good_witness, scan_good, theorem1_decomposition, GoodWitness};
pub use par::Execution;
