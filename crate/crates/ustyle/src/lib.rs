//! Unbiased style-strength regression for feed-forward style transfer.
//!
//! The crate trains an encoder–transformer–decoder network whose style
//! strength is steered by a control parameter α ∈ [0, 1]. Besides the
//! usual full-style pairs it can train on zero-style pairs (output must
//! reconstruct the content image at α = 0) and on interior anchor points,
//! so the learned α → style-strength response follows a chosen regression
//! function instead of whatever biased mapping full-style training leaves
//! behind.
//!
//! Layout:
//! - [`tensor`]: f64 NCHW tensors, the autodiff tape, Adam.
//! - [`image`]: PPM codec, bilinear resize/crop, synthetic dataset.
//! - [`net`]: fixed encoder, AdaIN/CIN transformers, trainable decoder.
//! - [`loss`]: content/style/tv/reconstruction/anchor losses.
//! - [`train`]: batch sampling, the training loop, style-weight sweeps.
//! - [`eval`]: loss-vs-α and loss-vs-weight curves, image grids, CLI.
//! - [`oracle`]: brute-force reference implementations for verification.

pub mod error;
pub mod image;
pub mod loss;
pub mod net;
pub mod train;
pub mod oracle;
pub mod tensor;

pub use error::{Error, Result};
