//! Minimal deterministic worker pool.
//!
//! Work is split into contiguous index ranges, one per worker, and results are
//! merged in range order. Combined with per-index RNG streams this makes every
//! parallel computation in the crate bit-identical to its serial run: min/max
//! folds over f64 are order-insensitive, and ordered merges preserve sequences.

/// Split `total` items into `chunks` contiguous `(start, len)` ranges.
/// The first `total % chunks` ranges get one extra item; empty ranges are kept
/// so the output length always equals `chunks`.
pub fn chunk_ranges(total: u128, chunks: usize) -> Vec<(u128, u128)> {
    let chunks = chunks.max(1);
    let base = total / chunks as u128;
    let rem = total % chunks as u128;
    let mut out = Vec::with_capacity(chunks);
    let mut start = 0u128;
    for i in 0..chunks {
        let len = base + if (i as u128) < rem { 1 } else { 0 };
        out.push((start, len));
        start += len;
    }
    out
}

/// Apply `f` to every index in `0..n` on `workers` threads and collect the
/// results in index order.
pub fn parallel_map_indexed<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if workers <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let ranges = chunk_ranges(n as u128, workers.min(n));
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .iter()
            .map(|&(start, len)| {
                scope.spawn(move || {
                    (start as usize..(start + len) as usize)
                        .map(f)
                        .collect::<Vec<T>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(n);
        for handle in handles {
            out.extend(handle.join().expect("worker thread panicked"));
        }
        out
    })
}
