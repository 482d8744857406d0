//! Two-stage spatial/temporal self-supervised pre-training for long
//! time-lapse videos, with a supervised viability head on top.
//!
//! The crate is `no_std` + `alloc`. Everything that touches the filesystem
//! (PNG frames, manifests on disk, checkpoint files, the CLI) lives in the
//! companion `stpt` crate; this crate works on in-memory data and byte
//! buffers only.
//!
//! Module map:
//!
//! - [`data`]: videos, frames, viability labels, the dataset manifest text
//!   format and grouped cross-validation folds.
//! - [`synth`]: procedural embryo-like time-lapse corpus with a latent
//!   viability signal and ground-truth outlier frames.
//! - [`preprocess`]: gradient-based outlier removal, clipping, temporal
//!   subsampling and bilinear resize.
//! - [`augment`]: temporally-consistent spatial augmentation.
//! - [`nn`]: dense layers with hand-written backward passes and Adam.
//! - [`encoders`]: spatial encoder, temporal transformer and classifier head.
//! - [`losses`]: cycle-consistency alignment losses, NT-Xent and Huber.
//! - [`pipeline`]: the three training stages, checkpoints, parameter
//!   accounting.
//! - [`evaluate`]: AUROC, label binarization, cross-validation, embedding
//!   export.
//! - [`config`]: layered run configuration with a published key schema.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod augment;
pub mod config;
pub mod data;
pub mod encoders;
pub mod error;
pub mod evaluate;
pub mod losses;
pub(crate) mod math;
pub mod nn;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
