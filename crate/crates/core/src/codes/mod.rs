//! Binary linear code algebra: GF(2^m), BCH construction, systematic
//! generator/parity-check matrices, syndromes, and the automorphism
//! permutations of cyclic codes.

mod alist;
mod bch;
mod binmat;
mod gf2m;
mod perm;

pub use alist::{read_alist, write_alist, AlistError};
pub use bch::{bch, bch_build, hard_decision, pinned_primitive_poly, LinearCode};
pub use binmat::BinaryMatrix;
pub use gf2m::Gf2m;
pub use perm::{pg_enumerate, Permutation};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodeError {
    #[error("unsupported extension degree m={m}")]
    UnsupportedField { m: u32 },
    #[error("polynomial 0x{poly:X} is not primitive of degree {m}")]
    NonPrimitivePoly { m: u32, poly: u64 },
    #[error("matrix is rank deficient: rank {rank} < {rows} rows")]
    RankDeficient { rank: usize, rows: usize },
    #[error("parity-check matrix is not in systematic form")]
    NotSystematic,
    #[error("index map is not a bijection")]
    NotAPermutation,
    #[error("length {n} is not 2^m − 1 for a supported m")]
    NotCyclicLength { n: usize },
    #[error("no designed error count yields a ({n},{k}) code")]
    UnsupportedCode { n: usize, k: usize },
}
