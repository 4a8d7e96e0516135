use rayon::prelude::*;

/// Maps `f` over `items` on a pool of `threads` workers, preserving order.
/// `threads <= 1` runs on the calling thread.
pub(crate) fn map<T, R, E, F>(items: &[T], threads: usize, f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    if threads <= 1 {
        return items.iter().map(f).collect();
    }
    install(threads, || items.par_iter().map(f).collect())
}

pub(crate) fn install<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(op),
        Err(_) => op(),
    }
}
