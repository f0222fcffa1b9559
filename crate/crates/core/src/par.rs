//! Data-parallel helpers with a sequential fallback.
//!
//! Every fan-out in the crate goes through [`Execution`]. With the `parallel`
//! feature disabled, [`Execution::Parallel`] silently degrades to the
//! sequential path, so results never depend on the build configuration:
//! outputs are always collected in index order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this build can actually fan out.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Evaluates `f(0..n)` and returns the results in index order.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Applies `f` to every element mutably, returning per-element results in order.
    pub fn map_mut<E, T, F>(self, items: &mut [E], f: F) -> Vec<T>
    where
        E: Send,
        T: Send,
        F: Fn(usize, &mut E) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items
                .par_iter_mut()
                .enumerate()
                .map(|(i, e)| f(i, e))
                .collect();
        }
        items.iter_mut().enumerate().map(|(i, e)| f(i, e)).collect()
    }

    /// Applies `f` to every element immutably, returning results in order.
    pub fn map_ref<E, T, F>(self, items: &[E], f: F) -> Vec<T>
    where
        E: Sync,
        T: Send,
        F: Fn(usize, &E) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().enumerate().map(|(i, e)| f(i, e)).collect();
        }
        items.iter().enumerate().map(|(i, e)| f(i, e)).collect()
    }
}

/// SplitMix64 finalizer; derives independent child seeds from a parent seed.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
