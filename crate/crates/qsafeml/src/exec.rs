//! Batch execution: data-parallel over items when the `parallel` feature is
//! on, plain iteration otherwise. Output order always matches input order, so
//! results are identical either way.
//!
//! The thread pool size can be capped with the `QSAFEML_THREADS` environment
//! variable (positive integer, read once at first use).

#[cfg(feature = "parallel")]
mod pool {
    use std::sync::OnceLock;

    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();

    pub(super) fn get() -> &'static rayon::ThreadPool {
        POOL.get_or_init(|| {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(n) = configured_threads() {
                builder = builder.num_threads(n);
            }
            builder
                .thread_name(|i| format!("qsafeml-{i}"))
                .build()
                .expect("failed to build worker thread pool")
        })
    }

    pub(super) fn configured_threads() -> Option<usize> {
        let raw = std::env::var("QSAFEML_THREADS").ok()?;
        raw.trim().parse::<usize>().ok().filter(|&n| n > 0)
    }
}

/// Number of worker threads batch operations will use.
pub fn worker_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        pool::get().current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Map `f` over `items`, preserving input order in the output.
pub fn map_ordered<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        pool::get().install(|| items.par_iter().map(&f).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Fallible ordered map. All items are evaluated; the error reported is the
/// one with the lowest input index, so failures are deterministic regardless
/// of scheduling.
pub fn try_map_ordered<T, U, E, F>(items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync,
{
    let results = map_ordered(items, f);
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        out.push(r?);
    }
    Ok(out)
}
