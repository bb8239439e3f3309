//! Data-parallel helpers with a sequential fallback.
//!
//! With the default `parallel` feature the helpers run on the rayon pool;
//! without it they degrade to plain iteration. Callers are written so that
//! results are deterministic either way: parallel stages only compute
//! independent items, reductions happen in a fixed order afterwards.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Minimum item count before spawning parallel work is worth it.
pub const PAR_THRESHOLD: usize = 512;

#[cfg(feature = "parallel")]
pub fn map_indexed<U, F>(len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    if len >= PAR_THRESHOLD {
        (0..len).into_par_iter().map(f).collect()
    } else {
        (0..len).map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<U, F>(len: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..len).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_slice<'a, T, U, F>(items: &'a [T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&'a T) -> U + Sync + Send,
{
    if items.len() >= PAR_THRESHOLD {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<'a, T, U, F>(items: &'a [T], f: F) -> Vec<U>
where
    F: Fn(&'a T) -> U,
{
    items.iter().map(f).collect()
}

/// Fill each element of `out` from its index. Used for row-parallel matvecs.
#[cfg(feature = "parallel")]
pub fn fill_indexed<U, F>(out: &mut [U], f: F)
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    if out.len() >= PAR_THRESHOLD {
        out.par_iter_mut().enumerate().for_each(|(i, slot)| *slot = f(i));
    } else {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = f(i);
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn fill_indexed<U, F>(out: &mut [U], f: F)
where
    F: Fn(usize) -> U,
{
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

/// Applies `f(chunk_index, chunk)` to consecutive disjoint chunks of `data`.
#[cfg(feature = "parallel")]
pub fn chunks_mut_indexed<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    if data.len() >= PAR_THRESHOLD && data.len() / chunk >= 2 {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    } else {
        for (i, c) in data.chunks_mut(chunk).enumerate() {
            f(i, c);
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn chunks_mut_indexed<T, F>(data: &mut [T], chunk: usize, f: F)
where
    F: Fn(usize, &mut [T]),
{
    for (i, c) in data.chunks_mut(chunk.max(1)).enumerate() {
        f(i, c);
    }
}

/// Sum of `f(i)` over `0..len` with a deterministic reduction order:
/// chunk partial sums are computed in parallel, then added in chunk order.
pub fn sum_indexed<F>(len: usize, chunk: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunk = chunk.max(1);
    let n_chunks = len.div_ceil(chunk);
    let partials = map_indexed(n_chunks, |c| {
        let lo = c * chunk;
        let hi = (lo + chunk).min(len);
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        s
    });
    partials.iter().sum()
}
