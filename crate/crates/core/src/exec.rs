//! Execution strategy for the data-parallel loops.
//!
//! With the `parallel` feature (default) the hot loops can fan out over rayon;
//! without it every call site falls back to plain sequential iteration. Both
//! paths reduce partial results in a fixed order, so outputs are bitwise
//! identical regardless of which one ran or how rayon scheduled the work.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    #[cfg(feature = "parallel")]
    Rayon,
}

impl Default for Parallelism {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        return Parallelism::Rayon;
        #[cfg(not(feature = "parallel"))]
        Parallelism::Sequential
    }
}

impl Parallelism {
    /// Every strategy compiled into this build.
    pub fn available() -> Vec<Parallelism> {
        vec![
            Parallelism::Sequential,
            #[cfg(feature = "parallel")]
            Parallelism::Rayon,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            Parallelism::Sequential => "sequential",
            #[cfg(feature = "parallel")]
            Parallelism::Rayon => "rayon",
        }
    }

    /// Maps `f` over `items`, preserving input order in the output.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Parallelism::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Parallelism::Rayon => items.par_iter().map(f).collect(),
        }
    }

    /// Mutable variant of [`Parallelism::map`].
    pub fn map_mut<T, R, F>(self, items: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(&mut T) -> R + Sync + Send,
    {
        match self {
            Parallelism::Sequential => items.iter_mut().map(f).collect(),
            #[cfg(feature = "parallel")]
            Parallelism::Rayon => items.par_iter_mut().map(f).collect(),
        }
    }

    /// Maps over the index range `0..n`, preserving order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            Parallelism::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Parallelism::Rayon => (0..n).into_par_iter().map(f).collect(),
        }
    }
}
