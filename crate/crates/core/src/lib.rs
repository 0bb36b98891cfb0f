//! Physics-informed neural network solver for oscillator initial-value problems.

pub mod autodiff;
pub mod data;
pub mod harness;
pub mod network;
pub mod problems;
pub mod reference;
pub mod training;
