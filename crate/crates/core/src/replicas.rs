//! Deterministic replica-parallel map.
//!
//! Results come back in replica order, so any reduction done afterwards is
//! independent of worker count and scheduling.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub fn run_replicas<T, F>(replicas: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..replicas).into_par_iter().map(f).collect()
}

/// Unwrap per-replica results, reporting how many replicas diverged.
pub(crate) fn collect_replicas<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    let total = results.len();
    let diverged = results.iter().filter(|r| matches!(r, Err(e) if e.is_divergence())).count();
    if diverged > 0 {
        return Err(Error::DivergedReplicas { diverged, replicas: total });
    }
    results.into_iter().collect()
}
