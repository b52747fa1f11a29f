//! Batch ("fitted") Q iteration and Advantage learning with recurrent value
//! networks, on a family of partially observable gridworlds.
//!
//! The crate is organized in four layers:
//!
//! - [`numerics`]: dense matrices, a Wengert tape for reverse-mode
//!   differentiation through unrolled sequence computations, an RMSprop
//!   optimizer, and finite-difference gradient verification.
//! - [`recnet`]: the four value-network architectures (feed-forward
//!   baseline, LSTM, GRU, MUT1) with windowed batch training.
//! - [`gridworlds`]: the 10x5 gridworld in three observability variants,
//!   with one-hot observation encoding.
//! - [`valuelearn`]: Q/Advantage target computation, softmax exploration,
//!   episode execution, and the outer batch-iteration loop.

pub mod gridworlds;
pub mod numerics;
pub mod recnet;
pub mod valuelearn;
