//! Data-parallel helpers.
//!
//! Every per-point loop in the crate goes through [`map_range`], which
//! collects results in index order. Reductions are then done sequentially
//! over the collected vector, so results are identical whichever
//! execution mode is active.
//!
//! With the `parallel` feature (on by default) work is spread over the
//! rayon global pool. Without it, or after [`set_mode`] with
//! [`Mode::Sequential`], everything runs on the calling thread.

use std::sync::atomic::{AtomicU8, Ordering};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Parallel,
}

static MODE: AtomicU8 = AtomicU8::new(1);

/// Below this many items the rayon dispatch costs more than it saves.
#[cfg(feature = "parallel")]
const MIN_PARALLEL_LEN: usize = 64;

pub fn set_mode(mode: Mode) {
    MODE.store(mode as u8, Ordering::Relaxed);
}

pub fn mode() -> Mode {
    if cfg!(feature = "parallel") && MODE.load(Ordering::Relaxed) == Mode::Parallel as u8 {
        Mode::Parallel
    } else {
        Mode::Sequential
    }
}

/// Runs `f` with the given mode active, restoring the previous mode after.
pub fn with_mode<R>(mode: Mode, f: impl FnOnce() -> R) -> R {
    let previous = MODE.swap(mode as u8, Ordering::Relaxed);
    let out = f();
    MODE.store(previous, Ordering::Relaxed);
    out
}

/// `(0..len).map(f).collect()`, possibly in parallel, always in index order.
pub fn map_range<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if len >= MIN_PARALLEL_LEN && mode() == Mode::Parallel {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
    }
    (0..len).map(f).collect()
}

/// Same as [`map_range`] over a slice.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    map_range(items.len(), |i| f(&items[i]))
}

/// Collects fallible results; the error reported is the one with the
/// smallest index, as in a sequential loop.
pub fn try_map_range<T, E, F>(len: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_range(len, f).into_iter().collect()
}

/// Slice version of [`try_map_range`].
pub fn try_map_slice<S, T, E, F>(items: &[S], f: F) -> Result<Vec<T>, E>
where
    S: Sync,
    T: Send,
    E: Send,
    F: Fn(&S) -> Result<T, E> + Sync + Send,
{
    try_map_range(items.len(), |i| f(&items[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_in_both_modes() {
        let seq = with_mode(Mode::Sequential, || map_range(1000, |i| i * i));
        let par = with_mode(Mode::Parallel, || map_range(1000, |i| i * i));
        assert_eq!(seq, par);
        assert_eq!(seq[999], 999 * 999);
    }

    #[test]
    fn first_error_wins() {
        let items: Vec<usize> = (0..500).collect();
        let out: Result<Vec<usize>, usize> =
            try_map_slice(&items, |&i| if i % 100 == 37 { Err(i) } else { Ok(i) });
        assert_eq!(out, Err(37));
    }
}
