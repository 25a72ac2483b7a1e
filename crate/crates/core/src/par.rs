//! Data-parallel map over independent work items.
//!
//! With the `parallel` feature (on by default) work fans out over the rayon
//! pool; without it, or with [`Parallelism::Sequential`], items run in order on
//! the calling thread. Results are always returned in index order, so both
//! paths produce identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    #[cfg(feature = "parallel")]
    Rayon,
}

impl Default for Parallelism {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Parallelism::Rayon
        }
        #[cfg(not(feature = "parallel"))]
        {
            Parallelism::Sequential
        }
    }
}

/// Maps `f` over `0..n`, collecting results in index order.
pub fn map_indexed<T, F>(par: Parallelism, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match par {
        Parallelism::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => (0..n).into_par_iter().map(f).collect(),
    }
}

/// Like [`map_indexed`] but stops at the first error (in index order).
pub fn try_map_indexed<T, E, F>(par: Parallelism, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(par, n, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let seq = map_indexed(Parallelism::Sequential, 100, |i| i * i);
        let def = map_indexed(Parallelism::default(), 100, |i| i * i);
        assert_eq!(seq, def);
        let err: Result<Vec<usize>, usize> =
            try_map_indexed(Parallelism::default(), 10, |i| if i >= 3 { Err(i) } else { Ok(i) });
        assert_eq!(err, Err(3));
    }
}
