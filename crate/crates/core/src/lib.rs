//! Differentiable contrast-limited adaptive histogram equalization.
//!
//! The crate is organized bottom-up:
//!
//! - [`imagio`]: PNG/PPM/PGM codecs, full-range YCbCr conversion, bilinear resizing.
//! - [`clahe`]: the CLAHE forward pass driven by a per-tile [`ClipLimitMap`].
//! - [`autodiff`]: the same forward pass recorded on a [`Tape`], the analytic
//!   gradient of a loss with respect to every clip limit, and a central
//!   finite-difference oracle for it.
//! - [`estimator`]: a 209-parameter CNN/MLP that predicts clip limits from an
//!   image, with a hand-written backward pass and a binary checkpoint format.
//! - [`training`]: synthetic degradations, Adam, and the end-to-end loop.
//! - [`metrics`]: PSNR and SSIM on single-channel planes.
//! - [`synth`]: seeded synthetic scenes for smoke runs and benchmarks.

pub mod autodiff;
pub mod clahe;
pub mod error;
pub mod estimator;
pub mod imagio;
pub mod metrics;
pub mod synth;
pub mod training;

pub use autodiff::{
    clahe_backward, clahe_forward_tape, finite_diff_clip_grad, l1_loss, ClipGrad, Tape,
};
pub use clahe::{
    clahe, ClipLimitMap, LutGrid, PaddedPlane, TileGrid, TileHistograms, MAX_INTENSITY, N_BINS,
};
pub use error::{Error, Result};
pub use estimator::{ActCache, EstimatorParams, ParamGrads};
pub use imagio::{Plane, RealPlane, RgbImage};
pub use metrics::{psnr, ssim, MetricReport};
pub use training::{AdamState, TrainConfig, TrainLogRecord};
