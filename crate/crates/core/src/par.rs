//! Execution policy for the data-parallel parts of the crate.
//!
//! With the `parallel` feature the default policy fans work out over rayon;
//! without it everything runs on the calling thread. Results are always
//! combined in task order, so the output does not depend on the worker count.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Policy {
    Sequential,
    Parallel,
}

impl Default for Policy {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Policy::Parallel
        } else {
            Policy::Sequential
        }
    }
}

/// Maps `f` over `items`, keeping the input order in the output.
pub fn map<T, R, F>(policy: Policy, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match policy {
        #[cfg(feature = "parallel")]
        Policy::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Same as [`map`] over the index range `0..n`.
pub fn map_range<R, F>(policy: Policy, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    let idx: Vec<usize> = (0..n).collect();
    map(policy, &idx, |&i| f(i))
}
