//! Deterministic data-parallel map over grid points.

use std::thread;

/// Worker count matching the host's available parallelism.
pub fn available_workers() -> usize {
    thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Evaluate `f(0..n)` on up to `workers` scoped threads.
///
/// Indices are dealt round-robin and every result lands in its own slot, so
/// the output is independent of the worker count. `workers <= 1` runs inline
/// without spawning.
pub fn parallel_map<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = (0..workers)
            .map(|w| scope.spawn(move || (w..n).step_by(workers).map(|i| (i, f(i))).collect::<Vec<_>>()))
            .collect();
        for handle in handles {
            let chunk = handle.join().unwrap_or_else(|e| std::panic::resume_unwind(e));
            for (i, value) in chunk {
                slots[i] = Some(value);
            }
        }
    });
    slots.into_iter().map(|v| v.expect("every index is assigned to a worker")).collect()
}
