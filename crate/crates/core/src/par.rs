//! Execution-mode plumbing: data-parallel sweeps with a sequential fallback.
//!
//! Hot loops (pinning sweeps, chain ensembles, Monte Carlo blocks) take a
//! [`Parallelism`] argument. With the `parallel` feature enabled (default)
//! the `Rayon` mode fans work out over the global rayon pool; without it,
//! both modes run sequentially. Work is partitioned identically in both
//! modes, so results are bit-for-bit reproducible across them.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a data-parallel sweep should execute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    /// Rayon pool when the `parallel` feature is on; sequential otherwise.
    Rayon,
}

impl Default for Parallelism {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Rayon
        } else {
            Parallelism::Sequential
        }
    }
}

/// Maps `f` over `0..len`, collecting results in index order.
pub(crate) fn map_indexed<U, F>(mode: Parallelism, len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match mode {
        Parallelism::Sequential => (0..len).map(f).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => (0..len).into_par_iter().map(f).collect(),
        #[cfg(not(feature = "parallel"))]
        Parallelism::Rayon => (0..len).map(f).collect(),
    }
}

/// Fallible variant of [`map_indexed`]; the first error wins.
pub(crate) fn try_map_indexed<U, F>(
    mode: Parallelism,
    len: usize,
    f: F,
) -> crate::Result<Vec<U>>
where
    U: Send,
    F: Fn(usize) -> crate::Result<U> + Sync + Send,
{
    match mode {
        Parallelism::Sequential => (0..len).map(f).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => (0..len).into_par_iter().map(f).collect(),
        #[cfg(not(feature = "parallel"))]
        Parallelism::Rayon => (0..len).map(f).collect(),
    }
}
