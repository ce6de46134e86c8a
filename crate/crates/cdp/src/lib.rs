//! Phase retrieval from coded diffraction patterns.
//!
//! A grayscale image `z⋆` is modulated by `L` random masks and observed
//! through the squared magnitude of its unitary 2-D DFT,
//! `y = |F(d_l ⊙ z⋆)|²` for `l = 1..L`. [`cdp_run`] recovers the image
//! (up to a global phase) with Wirtinger flow or one of its momentum
//! variants, reusing the step rules of `accelwf::solvers`.

pub mod image;
pub mod masks;
pub mod operator;
pub mod recovery;

pub use image::{parse_pgm, synthetic_image, GrayImage, ImageError};
pub use masks::CdpMasks;
pub use operator::{cdp_gradient, cdp_observe, CdpObjective, CdpOperator};
pub use recovery::{cdp_run, cdp_run_with, cdp_spectral_init, relative_error, CdpInit, CdpOptions, CdpTrace};
