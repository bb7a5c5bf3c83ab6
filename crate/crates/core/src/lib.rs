//! Stateful greybox fuzzing guided by a state transition tree.
//!
//! The crate is organised along the life of a campaign:
//!
//! * [`svscan`] finds enum-typed state variables in C-like sources.
//! * [`instrument`] injects `__stt_update` notifications before every
//!   assignment of a named constant to one of those variables.
//! * [`stt`] is the runtime that turns the notifications into a state
//!   transition tree and compacts it into a state-machine graph.
//! * [`engine`] is the fuzzing loop: dual feedback, energy schedule, byte
//!   range prioritization and crash-history minimization.
//! * [`targets`] are in-process protocol simulations with planted bugs.
//! * [`cli`] holds the subcommands behind the `statefuzz` binary.

pub mod cli;
pub mod engine;
pub mod error;
pub mod instrument;
pub mod stt;
pub mod svscan;
pub mod targets;

pub use error::{Error, Result};
