//! Staged pipeline behind the `debris-twin` binary.
//!
//! `depth`, `fuse` and `risk` each read their inputs from the config and
//! the output directory and write files there, so running them in sequence
//! produces the same bytes as `all`.

pub mod error;
pub mod pipeline;
pub mod report;

pub use error::{exit, exit_code, StageError};
pub use pipeline::{Pipeline, Stage, StageReport};

/// Runs `f` on a dedicated pool of `threads` workers (0 picks the rayon
/// default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool starts")
        .install(f)
}
