//! Command-line front end: configuration, dispatch to the numerical kernels
//! and CSV/JSON artifact emission with a checksum manifest.

pub mod config;
pub mod emit;
pub mod run;

pub use config::{Cli, Command, ConfigError, Params, RunConfig};
pub use emit::{curve_from_csv, curve_from_json, curve_to_csv, curve_to_json, CURVE_HEADER};
pub use run::{run, RunError, RunManifest, MANIFEST_FILE, SUMMARY_FILE};

/// Caps the global rayon pool from MEMS_NUM_THREADS (unset or empty: machine
/// parallelism).
pub fn configure_threads() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var("MEMS_NUM_THREADS") else {
        return Ok(());
    };
    if v.trim().is_empty() {
        return Ok(());
    }
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| ConfigError::key("MEMS_NUM_THREADS", format!("must be a positive integer, got '{v}'")))?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
