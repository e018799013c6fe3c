//! Tree-structured rollouts with step-level group-relative advantages.
//!
//! The crate is a small laboratory for reinforcement learning with verifiable
//! rewards. Rollouts for a question are sampled as an N-ary tree of fixed-length
//! token segments; leaves are scored by an exact verifier, rewards are averaged
//! bottom-up, and every sibling set becomes a normalization group. The flat
//! GRPO baseline is the depth-one special case of the same sampler.
//!
//! Modules, bottom-up:
//!
//! - [`env`]: the token vocabulary, modular-arithmetic tasks and the verifier.
//! - [`policy`]: a linear-softmax policy with exact log-probs, gradients, KL and entropy.
//! - [`tree_sampler`]: N-ary tree expansion and flat rollouts.
//! - [`credit`]: leaf scoring, reward propagation, grouping, pruning and advantages.
//! - [`trainer`]: the clipped surrogate objective, optimizers and the training loop.
//! - [`eval_harness`]: pass@1(avg@K), response length and multi-arm comparisons.

pub mod credit;
pub mod env;
pub mod error;
pub mod eval_harness;
pub mod policy;
pub mod rng;
pub mod trainer;
pub mod tree_sampler;

pub use error::{Error, Result};
