//! Configuration, CSV output and orchestration behind the `otoc` binary.
//!
//! The numerics live in `otoc-core`; this crate reads TOML configs, picks an
//! engine, evaluates time grids in parallel and writes reproducible CSVs.

pub mod config;
pub mod error;
pub mod figure2;
pub mod output;
pub mod run;
pub mod validity;

pub use config::RunConfig;
pub use error::CliError;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "OTOC_THREADS";

/// Sizes the global rayon pool from [`THREADS_ENV`] when it is set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Schema(format!("{THREADS_ENV}: expected a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Schema(format!("{THREADS_ENV}: {e}")))
}
