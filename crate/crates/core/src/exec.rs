//! Execution strategy for the data-parallel inner loops.
//!
//! Every bulk operation in the crate (counting, evaluation, group scoring,
//! synthetic generation) takes an [`Execution`]. With the `parallel` feature
//! enabled, [`Execution::Parallel`] runs on the rayon global pool; without it
//! both variants run sequentially. Results never depend on the variant.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// True when the crate was compiled with rayon support.
pub fn is_parallel_available() -> bool {
    cfg!(feature = "parallel")
}

impl Execution {
    #[cfg(feature = "parallel")]
    fn parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Order-preserving map over a slice.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Order-preserving map over `0..count`.
    pub fn map_range<U, F>(self, count: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.parallel() {
            use rayon::prelude::*;
            return (0..count).into_par_iter().map(f).collect();
        }
        (0..count).map(f).collect()
    }

    /// Folds fixed-size chunks independently and merges the partial results.
    ///
    /// `merge` must be associative; chunk boundaries are the same for both
    /// variants so a commutative merge gives identical results.
    pub fn fold_chunks<'a, T, A, I, F, M>(self, items: &'a [T], chunk: usize, init: I, fold: F, merge: M) -> A
    where
        T: Sync,
        A: Send,
        I: Fn() -> A + Sync + Send,
        F: Fn(A, &'a [T]) -> A + Sync + Send,
        M: Fn(A, A) -> A + Sync + Send,
    {
        let chunk = chunk.max(1);
        #[cfg(feature = "parallel")]
        if self.parallel() {
            use rayon::prelude::*;
            return items
                .par_chunks(chunk)
                .map(|c| fold(init(), c))
                .reduce(&init, &merge);
        }
        items.chunks(chunk).fold(init(), |acc, c| merge(acc, fold(init(), c)))
    }

    pub fn sort_unstable_by<T, F>(self, items: &mut [T], cmp: F)
    where
        T: Send,
        F: Fn(&T, &T) -> std::cmp::Ordering + Sync,
    {
        #[cfg(feature = "parallel")]
        if self.parallel() {
            use rayon::prelude::*;
            items.par_sort_unstable_by(cmp);
            return;
        }
        items.sort_unstable_by(cmp);
    }
}
