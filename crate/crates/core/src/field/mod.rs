//! Grids, field containers, quadrature, test functions and uniformly-local norms.

pub mod data;
pub mod grid;
pub mod io;
pub mod pairing;
pub mod quadrature;
pub mod testfn;
pub mod uloc;

pub use data::{outer, sym_contract, sym_index, GridField, Rank, SYM_MULT, SYM_PAIRS};
pub use grid::{GridSpec, TimeAxis};
pub use pairing::{pair, pair_divergence, pair_vector, Selector};
pub use testfn::{Cutoff, Profile, TestFunction, VectorKind, VectorTestFunction};
pub use uloc::{spacetime_uloc_norm, uloc_norm};
