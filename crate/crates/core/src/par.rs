//! Data-parallel helpers. With the `parallel` feature the work is spread over
//! the rayon pool unless [`Parallelism::Sequential`] is requested; without the
//! feature everything runs on the calling thread. Results never depend on the
//! choice: every reduction is done in a fixed order by the caller.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    #[default]
    Rayon,
    Sequential,
}

impl Parallelism {
    fn threaded(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Rayon
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel, always in index order.
pub fn map_range<T, F>(par: Parallelism, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.threaded() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = par.threaded();
    (0..n).map(f).collect()
}

/// Calls `f(i, chunk)` for consecutive chunks of `data` of length `chunk_len`.
pub fn for_each_chunk_mut<T, F>(par: Parallelism, data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if chunk_len == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if par.threaded() {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = par.threaded();
    data.chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
}
