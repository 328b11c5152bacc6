//! Execution policy: data-parallel via rayon when the `parallel` feature is
//! on, plain sequential loops otherwise or on request.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Once;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);
static POOL_INIT: Once = Once::new();

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Parallel,
    Sequential,
}

/// Select the process-wide execution mode. `Parallel` silently degrades to
/// sequential when the crate was built without the `parallel` feature.
pub fn set_mode(mode: ExecMode) {
    FORCE_SEQUENTIAL.store(mode == ExecMode::Sequential, Ordering::SeqCst);
}

pub fn mode() -> ExecMode {
    if cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::SeqCst) {
        ExecMode::Parallel
    } else {
        ExecMode::Sequential
    }
}

/// Size the global pool from MIXEDSOLVE_THREADS, once. Later calls are no-ops.
pub fn init_threads_from_env() {
    POOL_INIT.call_once(|| {
        #[cfg(feature = "parallel")]
        if let Some(n) =
            std::env::var("MIXEDSOLVE_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0)
        {
            // A pool may already exist if the host program built one; that is fine.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    });
}

/// `(0..n).map(f).collect()`, in parallel when enabled. Output order is
/// always index order, so results are deterministic.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    init_threads_from_env();
    #[cfg(feature = "parallel")]
    if mode() == ExecMode::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Map over a slice, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    map_range(items.len(), |i| f(&items[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_preserves_order() {
        let v = map_range(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
