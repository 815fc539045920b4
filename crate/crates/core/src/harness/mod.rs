//! Experiment orchestration: configuration, dataset generation, noise,
//! metrics and report files.

mod config;
mod dataset;
mod experiment;
mod metrics;

pub use config::*;
pub use dataset::*;
pub use experiment::*;
pub use metrics::*;

use crate::error::{Error, Result};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "FRACBACK_THREADS";

/// Worker pool sized by `FRACBACK_THREADS`, or rayon's default when unset.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

#[cfg(test)]
mod tests;
