//! Index-parallel maps with a sequential fallback.
//!
//! Results always come back in index order, so any reduction performed on
//! them afterwards is independent of the worker count.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Rayon work stealing when the `parallel` feature is enabled; falls
    /// back to sequential otherwise.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            Exec::Parallel => par_map(n, f),
        }
    }

    /// Like [`Exec::map`], stopping at the lowest failing index.
    pub fn try_map<T, E, F>(self, n: usize, f: F) -> Result<Vec<T>, (usize, E)>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(|i| f(i).map_err(|e| (i, e))).collect(),
            Exec::Parallel => {
                let all = par_map(n, |i| f(i).map_err(|e| (i, e)));
                all.into_iter().collect()
            }
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Caps the global worker count. Returns false when the pool was already
/// initialized or the feature is off.
pub fn init_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global().is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}

/// Runs `f` inside a dedicated pool of `threads` workers, leaving the
/// global pool alone. Sequential without the `parallel` feature.
pub fn with_threads<R, F>(threads: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_in_order() {
        let f = |i: usize| (i as f64).sqrt();
        assert_eq!(Exec::Sequential.map(100, f), Exec::Parallel.map(100, f));
        let wide = with_threads(4, || Exec::Parallel.map(100, f));
        assert_eq!(wide, Exec::Sequential.map(100, f));
    }

    #[test]
    fn try_map_reports_first_failure() {
        let r = Exec::Parallel.try_map(50, |i| if i % 7 == 3 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err((3, 3)));
    }
}
