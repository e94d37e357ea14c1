//! Few-shot identification of acoustic environments from reverberant speech.
//!
//! The crate covers the whole chain: shoebox room simulation, degradation of
//! reverberant speech (noise and lossy codecs), Mel/MFCC features, a small
//! convolutional embedding network trained episodically as a prototypical
//! network with a parameter-regression head, and the evaluation protocols
//! (closed set, open set, K sweep, grid positions, regression).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod degrade;
pub mod eval;
pub mod features;
pub mod fewshot;
pub mod model;
pub mod pipeline;
pub mod room_sim;
pub mod seed;
