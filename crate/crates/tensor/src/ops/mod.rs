//! Differentiable ops, each implemented as a method on [`crate::Tape`].

mod basic;
pub mod conv;
pub mod loss;
pub mod norm;
mod pool;
mod softmax;
pub mod upsample;
