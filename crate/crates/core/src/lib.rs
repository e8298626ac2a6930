//! Kernel DSL, accelerator simulator and equivalence checking.

pub mod dsl;
pub mod sim;
pub mod verify;
