//! Data-parallel map helper with a sequential fallback.
//!
//! Sweeps (batch fidelities, property trials, table scans) map an index
//! range through a pure function and collect in input order, so results
//! are identical whichever mode runs them. With the `parallel` feature
//! disabled, `Parallel` silently degrades to `Sequential`.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

/// Map `0..count` through `f`, preserving index order in the output.
pub fn map_indexed<U, F>(mode: ExecMode, count: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode == ExecMode::Parallel {
            return (0..count).into_par_iter().map(f).collect();
        }
    }
    let _ = mode;
    (0..count).map(f).collect()
}

/// Map a slice through `f`, preserving order.
pub fn map_slice<T, U, F>(mode: ExecMode, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode == ExecMode::Parallel {
            return items.par_iter().map(f).collect();
        }
    }
    let _ = mode;
    items.iter().map(f).collect()
}
