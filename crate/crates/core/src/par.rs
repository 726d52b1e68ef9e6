//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the work is spread over the rayon
//! pool. Results are always collected in index order, so every reduction done
//! by the caller over the returned vector is independent of the thread count.

/// How an embarrassingly parallel loop is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled, otherwise
    /// identical to `Sequential`.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..len).map(f).collect()`, possibly in parallel, order preserved.
pub fn map_range<T, F>(exec: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// `items.iter().map(f).collect()`, possibly in parallel, order preserved.
pub fn map_slice<I, T, F>(exec: Execution, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Splits `0..len` into fixed-size chunks and maps each chunk. The chunking
/// depends only on `chunk`, never on the number of worker threads.
pub fn map_chunks<T, F>(exec: Execution, len: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let count = len.div_ceil(chunk);
    map_range(exec, count, |c| {
        let start = c * chunk;
        f(start..(start + chunk).min(len))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = map_range(Execution::Sequential, 1000, |i| i * i);
        let par = map_range(Execution::Parallel, 1000, |i| i * i);
        assert_eq!(seq, par);
    }

    #[test]
    fn chunks_cover_range() {
        let parts = map_chunks(Execution::Parallel, 10, 3, |r| r);
        assert_eq!(parts, vec![0..3, 3..6, 6..9, 9..10]);
        assert!(map_chunks(Execution::Sequential, 0, 4, |r| r).is_empty());
    }
}
