//! Switched observer and hybrid certainty-equivalence controller for the
//! bilinear plant
//!
//! ```text
//! z1' = -a z1 z2 + u
//! z2' = (c z2 + d) z1
//! y   = z1
//! ```
//!
//! which loses observability on `{z1 = 0}`. The crate certifies observer
//! gains, simulates the closed loop as a hybrid arc and checks the
//! constructive bounds of the design against simulated trajectories.

pub mod analysis;
pub mod certificates;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod model;
pub mod scenario;

pub use error::{Error, Result};
