//! Adaptive switching between vanilla policy-gradient training and an
//! uncertainty-weighted hybrid actor that fuses a supervised loss on expert
//! demonstrations into every RL update.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense matrices, a two-layer tanh MLP with hand-derived
//!   backprop, categorical utilities, seeded RNG streams and a
//!   finite-difference gradient checker.
//! - [`envs`]: synthetic sequence tasks with dense (`DenseChain`) or sparse
//!   (`SparseLock`) reward, expert demonstrations and answer canonicalization.
//! - [`policy`]: the autoregressive categorical policy, value head, sampling
//!   and the frozen reference snapshot.
//! - [`losses`]: SFT cross-entropy, clipped surrogate, group-normalized
//!   advantages, k3 KL and the fusion strategies.
//! - [`switch`]: the reward-density probe and actor decision.
//! - [`trainer`]: training regimes, evaluation, telemetry and comparisons.

pub mod envs;
pub mod error;
pub mod losses;
pub mod numerics;
pub mod optim;
pub mod policy;
pub mod switch;
pub mod trainer;

pub use error::{Error, Result};
