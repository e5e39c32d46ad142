//! Execution policy for the per-cell loops.
//!
//! Every parallel loop in the crate is a pure map from an index range to a
//! freshly allocated vector, so the sequential and parallel paths produce
//! bit-identical results. Reductions are always done sequentially on the
//! collected values.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

/// Below this many items the parallel path is not worth the fork/join.
#[cfg(feature = "parallel")]
const PAR_THRESHOLD: usize = 2048;

impl Exec {
    /// Whether this build can actually run in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel if n >= PAR_THRESHOLD => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Maps fixed-size chunks of `0..n`, concatenating the chunk outputs in
    /// order. Lets the callee amortise per-chunk setup (e.g. a table search).
    pub fn map_chunks<T, F>(self, n: usize, chunk: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(std::ops::Range<usize>) -> Vec<T> + Sync + Send,
    {
        let chunk = chunk.max(1);
        let nchunks = n.div_ceil(chunk);
        let range = |c: usize| c * chunk..((c + 1) * chunk).min(n);
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel if n >= PAR_THRESHOLD => {
                use rayon::prelude::*;
                let parts: Vec<Vec<T>> = (0..nchunks).into_par_iter().map(|c| f(range(c))).collect();
                parts.into_iter().flatten().collect()
            }
            _ => (0..nchunks).flat_map(|c| f(range(c))).collect(),
        }
    }

    /// Runs independent jobs (parameter sweep members).
    pub fn map_jobs<I, T, F>(self, items: Vec<I>, f: F) -> Vec<T>
    where
        I: Send,
        T: Send,
        F: Fn(I) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.into_par_iter().map(f).collect()
            }
            _ => items.into_iter().map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = Exec::Sequential.map_range(10_000, f);
        let b = Exec::Parallel.map_range(10_000, f);
        assert_eq!(a, b);
        let c = Exec::Parallel.map_chunks(10_001, 97, |r| r.map(f).collect());
        assert_eq!(c.len(), 10_001);
        assert_eq!(&c[..10_000], &a[..]);
    }
}
