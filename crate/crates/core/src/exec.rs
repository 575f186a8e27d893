//! Execution policy for the data-parallel loops.
//!
//! With the `parallel` feature the loops run on rayon; without it, or after
//! `set_mode(Mode::Sequential)`, they run on the calling thread. Reductions
//! use a fixed block partition and a fixed combine order, so both modes
//! produce bit-identical sums.

use std::sync::atomic::{AtomicU8, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Parallel,
}

static MODE: AtomicU8 = AtomicU8::new(1);

/// Items per reduction block. Block sums are combined pairwise.
const BLOCK: usize = 1024;

pub fn set_mode(mode: Mode) {
    MODE.store(
        match mode {
            Mode::Sequential => 0,
            Mode::Parallel => 1,
        },
        Ordering::Relaxed,
    );
}

pub fn mode() -> Mode {
    if cfg!(feature = "parallel") && MODE.load(Ordering::Relaxed) == 1 {
        Mode::Parallel
    } else {
        Mode::Sequential
    }
}

/// Sizes the global worker pool. Returns false if the pool was already built
/// or the crate was compiled without the `parallel` feature.
pub fn configure_threads(n: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        false
    }
}

pub fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        if mode() == Mode::Parallel {
            return rayon::current_num_threads();
        }
    }
    1
}

/// `(0..n).map(f).collect()`, in parallel when enabled.
pub fn map<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode() == Mode::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Calls `f(chunk_index, chunk)` on consecutive chunks of `data`.
pub fn chunks_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    {
        if mode() == Mode::Parallel {
            data.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
            return;
        }
    }
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Fills `out[i] = f(i)`.
pub fn fill<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    chunks_mut(out, BLOCK, |b, c| {
        let base = b * BLOCK;
        for (k, v) in c.iter_mut().enumerate() {
            *v = f(base + k);
        }
    });
}

fn pairwise(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    while v.len() > 1 {
        let next: Vec<f64> = v
            .chunks(2)
            .map(|c| if c.len() == 2 { c[0] + c[1] } else { c[0] })
            .collect();
        v = next;
    }
    v[0]
}

/// Deterministic `Σ_{i<n} f(i)`.
pub fn sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let blocks = n.div_ceil(BLOCK);
    let partial = map(blocks, |b| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(n);
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        s
    });
    pairwise(partial)
}

/// Deterministic component-wise sum of `K`-vectors.
pub fn sum_n<const K: usize, F>(n: usize, f: F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K] + Sync + Send,
{
    let blocks = n.div_ceil(BLOCK);
    let partial = map(blocks, |b| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(n);
        let mut s = [0.0; K];
        for i in lo..hi {
            let v = f(i);
            for k in 0..K {
                s[k] += v[k];
            }
        }
        s
    });
    let mut out = [0.0; K];
    for k in 0..K {
        out[k] = pairwise(partial.iter().map(|p| p[k]).collect());
    }
    out
}

/// Maximum of `f(i)` (NaN-free inputs); `f64::NEG_INFINITY` when `n == 0`.
pub fn max<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let blocks = n.div_ceil(BLOCK);
    map(blocks, |b| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(n);
        (lo..hi).map(&f).fold(f64::NEG_INFINITY, f64::max)
    })
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_mode_independent() {
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        set_mode(Mode::Sequential);
        let a = sum(100_003, f);
        set_mode(Mode::Parallel);
        let b = sum(100_003, f);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn fill_and_max() {
        let mut v = vec![0.0; 5000];
        fill(&mut v, |i| i as f64);
        assert_eq!(v[4321], 4321.0);
        assert_eq!(max(5000, |i| v[i]), 4999.0);
        assert_eq!(max(0, |_| 1.0), f64::NEG_INFINITY);
    }
}
