//! Data-parallel map helpers with a sequential fallback.
//!
//! With the `parallel` feature enabled (the default), [`Execution::Parallel`]
//! dispatches to rayon. Without it, both modes run sequentially, so callers
//! never need their own `cfg` branches.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a batch of independent evaluations is executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(i)` for `i in 0..n`, preserving index order in the output.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Maps over a slice, preserving order.
pub fn map_slice<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Folds `f(i)` over `0..n` with an associative `combine`.
pub fn fold_range<A, F, C>(exec: Execution, n: usize, identity: A, f: F, combine: C) -> A
where
    A: Send + Sync + Clone,
    F: Fn(usize) -> A + Sync + Send,
    C: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n)
            .into_par_iter()
            .map(&f)
            .reduce(|| identity.clone(), &combine);
    }
    let _ = exec;
    (0..n).map(f).fold(identity, combine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let seq = map_range(Execution::Sequential, 100, |i| i * i);
        let par = map_range(Execution::Parallel, 100, |i| i * i);
        assert_eq!(seq, par);
        let a = fold_range(
            Execution::Sequential,
            1000,
            0u64,
            |i| i as u64,
            |a, b| a + b,
        );
        let b = fold_range(Execution::Parallel, 1000, 0u64, |i| i as u64, |a, b| a + b);
        assert_eq!(a, b);
        assert_eq!(a, 499_500);
    }
}
