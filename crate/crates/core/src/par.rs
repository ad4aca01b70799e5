//! Deterministic chunked reductions: work is split into fixed chunks whose
//! partial results are merged in chunk order, so the outcome does not depend
//! on the number of threads.

use crate::error::Result;

pub(crate) fn chunked_reduce<T, I, F, M>(n: u64, chunk: u64, init: I, fold: F, mut merge: M) -> Result<T>
where
    T: Send,
    I: Fn() -> T + Sync,
    F: Fn(&mut T, u64) -> Result<()> + Sync,
    M: FnMut(&mut T, T),
{
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    let run = |c: u64| -> Result<T> {
        let mut acc = init();
        for i in c * chunk..((c + 1) * chunk).min(n) {
            fold(&mut acc, i)?;
        }
        Ok(acc)
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<T>> = {
        use rayon::prelude::*;
        (0..n_chunks).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<T>> = (0..n_chunks).map(run).collect();
    let mut total = init();
    for p in parts {
        merge(&mut total, p?);
    }
    Ok(total)
}

/// Order-preserving map over items, parallel when the feature is enabled.
pub(crate) fn map_ordered<A, B, F>(items: &[A], f: F) -> Vec<B>
where
    A: Sync,
    B: Send,
    F: Fn(&A) -> B + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(|x| f(x)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
