//! Frozen-dynamics policies and the tooling around them.
//!
//! A policy wraps a frozen ODE right-hand side `f` between a trainable affine
//! encoder and decoder, `a = D(f(E(s)))`, and is trained with PPO on natively
//! implemented classic-control tasks. The crate also carries the analysis
//! toolkit (policy similarity, exact sign/Fisher tests, BH correction) and the
//! LLM-mediated dialogue pipeline that talks to trained policies.

pub mod analysis;
pub mod dialogue;
pub mod envs;
pub mod exec;
pub mod policy;
pub mod reservoir;
pub mod trainer;

pub use exec::Parallelism;
