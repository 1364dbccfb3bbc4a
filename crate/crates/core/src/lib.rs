//! Permutation-selection decoding of binary linear block codes.
//!
//! The pipeline: build a BCH code and its automorphism permutations, decode
//! noisy BPSK observations with belief propagation, and — instead of running
//! the decoder under every permutation — rank the permutations per received
//! word with a learned self-attention model and decode only the best one.
//!
//! Modules build on each other roughly bottom-up:
//! - [`codes`]: GF(2^m) algebra, BCH construction, permutation groups, alist I/O
//! - [`tanner`]: factor-graph view of H and 4-cycle statistics
//! - [`bp`]: sum-product decoding with optional per-edge weights
//! - [`channel`]: BPSK/AWGN simulation and training-batch generation
//! - [`nn`]: tape-based reverse-mode autodiff and Adam
//! - [`node_embed`]: random-walk node embeddings of the Tanner graph
//! - [`perm2vec`]: self-attention permutation embeddings
//! - [`gps`]: the permutation ranker and its training loop
//! - [`sim`]: Monte Carlo error-rate harness and strategy comparison

pub mod bp;
pub mod channel;
pub mod codes;
pub mod gps;
pub mod nn;
pub mod node_embed;
pub mod perm2vec;
pub mod sim;
pub mod tanner;

pub use codes::{bch, hard_decision, pg_enumerate, BinaryMatrix, LinearCode, Permutation};
