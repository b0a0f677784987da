//! Work distribution seam.
//!
//! The core never spawns threads. Callers that want parallelism provide an
//! [`Executor`]; every algorithm partitions its work the same way regardless
//! of the executor, so results do not depend on the thread count.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluates `f(i)` for `i in 0..n`, returning results in index order.
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;

    /// Calls `f(i, &mut items[i])` for every item.
    fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send;

    /// Monotonic time in seconds, when the environment has a clock. Used
    /// only for reporting.
    fn now(&self) -> Option<f64> {
        None
    }
}

/// Seconds between two readings of [`Executor::now`].
pub fn elapsed<E: Executor + ?Sized>(exec: &E, start: Option<f64>) -> Option<f64> {
    Some(exec.now()? - start?)
}

/// Runs everything on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }

    fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        for (i, item) in items.iter_mut().enumerate() {
            f(i, item);
        }
    }
}
