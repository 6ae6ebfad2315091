//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the closures run on rayon; without it (or with
//! `threads == 1`) they run in order on the calling thread. Outputs are always
//! returned in index order, so callers see identical results in both modes.

/// Number of worker threads to use. `0` means "all available cores".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Threads(pub usize);

impl Threads {
    pub const SEQUENTIAL: Threads = Threads(1);
    pub const ALL: Threads = Threads(0);

    pub fn is_sequential(self) -> bool {
        self.0 == 1 || !cfg!(feature = "parallel")
    }
}

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_indexed<R, F>(n: usize, threads: Threads, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    if n <= 1 || threads.is_sequential() {
        return (0..n).map(f).collect();
    }
    parallel_map(n, threads, f)
}

#[cfg(feature = "parallel")]
fn parallel_map<R, F>(n: usize, threads: Threads, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;

    if threads.0 == 0 {
        return (0..n).into_par_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads.0).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        // pool creation can fail under resource limits; fall back to the global pool
        Err(_) => (0..n).into_par_iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<R, F>(n: usize, _threads: Threads, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_are_in_index_order() {
        let seq = map_indexed(100, Threads::SEQUENTIAL, |i| i * i);
        let par = map_indexed(100, Threads::ALL, |i| i * i);
        let fixed = map_indexed(100, Threads(3), |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq, fixed);
        assert_eq!(seq[7], 49);
    }

    #[test]
    fn empty_and_singleton() {
        assert!(map_indexed(0, Threads::ALL, |i| i).is_empty());
        assert_eq!(map_indexed(1, Threads::ALL, |i| i + 1), vec![1]);
    }
}
