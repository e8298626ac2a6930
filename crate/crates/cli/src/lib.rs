//! The `tensopt` command line.

pub mod commands;
pub mod config;

pub use config::RunConfig;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INCORRECT: i32 = 1;
    /// Unparsable or invalid kernel, config or trace.
    pub const INVALID: i32 = 2;
    pub const SIMULATION: i32 = 3;
    pub const START_FAILED: i32 = 4;
}

/// A command failure carrying its exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Failure {
        Failure { code, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Failure {
        Failure::new(exit::INVALID, message)
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Failure {
        Failure::new(exit::INVALID, format!("{}: {e}", path.display()))
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}
