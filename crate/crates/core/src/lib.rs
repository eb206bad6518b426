//! Discrete-time min-max maximum principle for control systems on matrix Lie
//! groups, with an SO(2) single-axis spacecraft instance and a closed-form
//! linear-quadratic game used as an oracle.

pub mod cli;
pub mod config;
pub mod error;
pub mod euclid;
pub mod lie_so2;
pub mod lq_game;
pub mod nlsolve;
pub mod pmp;
pub mod saddle;
pub mod spacecraft;

pub use error::{Error, Result};
