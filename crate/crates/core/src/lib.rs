//! Distinctive-captioning laboratory on a synthetic multimodal world.
//!
//! A frozen bag-of-words retriever scores captions against scenes; a small
//! recurrent captioner is trained with teacher forcing, reward-weighted
//! teacher forcing and policy gradients under a bidirectional contrastive
//! reward regularized by a text discriminator.

pub mod discriminator;
pub mod error;
pub mod formats;
mod math;
pub mod policy;
pub mod retriever;
pub mod rewards;
pub mod synthworld;
pub mod textmetrics;
pub mod trainer;

pub use error::{LabError, Result};
