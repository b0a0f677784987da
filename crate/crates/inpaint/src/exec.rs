//! Thread-pool executor.

use std::time::Instant;

use inpaint_core::exec::Executor;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Runs work on a dedicated rayon pool of fixed size.
pub struct Pool {
    pool: rayon::ThreadPool,
    epoch: Instant,
}

impl Pool {
    /// A pool of `threads` workers; 0 means one per logical core.
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
        Ok(Self {
            pool,
            epoch: Instant::now(),
        })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Pool {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }

    fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        self.pool.install(|| items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t)))
    }

    fn now(&self) -> Option<f64> {
        Some(self.epoch.elapsed().as_secs_f64())
    }
}
