//! Samplers and exact diagnostics for q-spin systems on graphs.
//!
//! A q-spin system is a graph together with a symmetric non-negative
//! interaction matrix `A` and a positive external-field vector `h`; the Gibbs
//! distribution weights a spin assignment by the product of `A` over edges and
//! `h` over vertices. This crate provides, at desk scale:
//!
//! - graph representation, generators, and edge-list I/O ([`graph`]),
//! - the hardcore, proper-coloring, and monomer-dimer models ([`spin`]),
//! - brute-force enumeration of the state space, conditional marginals, and
//!   variance functionals ([`exact`]),
//! - Glauber dynamics and the general s↔r down-up walk as samplers
//!   ([`glauber`]),
//! - exact transition matrices, spectral gaps, influence matrices, and
//!   spectral-independence profiles ([`spectral`]),
//! - closed-form gap bounds, thresholds, and mixing-time relations
//!   ([`bounds`]),
//! - partition-function estimation by self-reducible telescoping and
//!   fixed-schedule annealing ([`counting`]).
//!
//! Pinning sweeps, chain ensembles, and Monte Carlo loops are data-parallel
//! via rayon when the `parallel` feature (default) is enabled; every such
//! entry point also has an always-available sequential form, and results are
//! identical across modes.

pub mod bounds;
pub mod counting;
pub mod exact;
pub mod glauber;
pub mod graph;
pub mod par;
pub mod spectral;
pub mod spin;

mod error;

pub use error::{Error, Result};
pub use par::Parallelism;

/// Resource caps for enumeration-backed operations.
///
/// `enumeration` bounds the number of (vertex, spin) trials a pruned
/// backtracking search may spend; a full search of `q^n` configurations fits
/// whenever `q^n <= enumeration`. `matrix` bounds the state count of any
/// dense kernel, `si_exhaustive_n` the system size for exhaustive
/// spectral-independence sweeps, and `down_up_n` the system size for exact
/// down-up kernels (level distributions grow like `binom(n, s) * q^s`).
#[derive(Clone, Copy, Debug)]
pub struct Caps {
    pub enumeration: u64,
    pub matrix: usize,
    pub si_exhaustive_n: usize,
    pub down_up_n: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            enumeration: 1 << 22,
            matrix: 20_000,
            si_exhaustive_n: 10,
            down_up_n: 6,
        }
    }
}
