use rayon::prelude::*;

use crate::error::{HarnessError, Result};

/// `f(0), …, f(count − 1)` in index order, evaluated on `threads` workers
/// (0 for one per core, 1 for the calling thread only).
pub fn map_trials<T, F>(threads: usize, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if threads == 1 {
        return Ok((0..count).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(f).collect()))
}

/// Running count, sum and sum of squares, folded in trial order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }

    /// Standard error of the mean; 0 for a single observation.
    pub fn std_error(&self) -> Option<f64> {
        let mean = self.mean()?;
        if self.count < 2 {
            return Some(0.0);
        }
        let n = self.count as f64;
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        Some((var / n).sqrt())
    }
}
