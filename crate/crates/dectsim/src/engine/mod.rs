//! Discrete-event core: the time-ordered event queue, the shared radio
//! medium with finite history, and reproducible named random streams.

mod events;
mod medium;
mod rng;

pub use events::{Epochs, EventQueue};
pub use medium::{mean_linear_sinr, Medium, TxId, TxRecord};
pub use rng::{mix64, named_stream};
