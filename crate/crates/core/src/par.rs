//! Deterministic fan-out over scoped threads. Work is split into a fixed
//! number of contiguous shards independent of the worker count, and partial
//! results are combined in shard order, so sums are bit-identical for any
//! `workers`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub(crate) const SHARDS: usize = 16;

fn shard_ranges(n: usize) -> Vec<std::ops::Range<usize>> {
    let shards = SHARDS.min(n).max(1);
    (0..shards).map(|s| (s * n / shards)..((s + 1) * n / shards)).collect()
}

fn run_indexed<T: Send, F: Fn(usize) -> T + Sync>(n: usize, workers: usize, f: F) -> Vec<T> {
    if workers <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<(usize, T)>> = Mutex::new(Vec::with_capacity(n));
    std::thread::scope(|s| {
        for _ in 0..workers.min(n) {
            s.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                if j >= n {
                    break;
                }
                let v = f(j);
                out.lock().unwrap().push((j, v));
            });
        }
    });
    let mut v = out.into_inner().unwrap();
    v.sort_by_key(|(j, _)| *j);
    v.into_iter().map(|(_, x)| x).collect()
}

/// `f(i)` for every `i < n`, in index order.
pub(crate) fn map<T: Send, F: Fn(usize) -> T + Sync>(n: usize, workers: usize, f: F) -> Vec<T> {
    let ranges = shard_ranges(n);
    let parts = run_indexed(ranges.len(), workers, |s| ranges[s].clone().map(&f).collect::<Vec<T>>());
    parts.into_iter().flatten().collect()
}

/// `Σ_i acc(i)` where `acc(i, out)` adds item `i`'s contribution to `out`.
pub(crate) fn sum_vec<F: Fn(usize, &mut [f64]) + Sync>(n: usize, dim: usize, workers: usize, acc: F) -> Vec<f64> {
    let ranges = shard_ranges(n);
    let parts = run_indexed(ranges.len(), workers, |s| {
        let mut v = vec![0.0; dim];
        for i in ranges[s].clone() {
            acc(i, &mut v);
        }
        v
    });
    let mut total = vec![0.0; dim];
    for p in parts {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    total
}

/// Ordered scalar sum of `f(i)`.
pub(crate) fn sum<F: Fn(usize) -> f64 + Sync>(n: usize, workers: usize, f: F) -> f64 {
    map(n, workers, f).into_iter().sum()
}
