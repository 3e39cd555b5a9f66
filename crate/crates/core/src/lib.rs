//! Differentiable 3D Gaussian splatting supervised by event-camera streams.
//!
//! The crate is organized around the data flow of a reconstruction run:
//!
//! - [`math`]: rotations, camera projection, spherical-harmonics shading.
//! - [`events`]: event stream parsing, neutralization-aware slicing, and
//!   accumulation into supervision frames.
//! - [`render`]: the tile-based forward rasterizer, its analytic backward
//!   pass, and blur-aware rendering.
//! - [`loss`]: log-radiance event loss, DSSIM, and the blurred-frame
//!   refinement loss, all with analytic gradients.
//! - [`train`]: Adam, adaptive density control, progressive multi-round
//!   training, and parameter-separable appearance refinement.
//! - [`sim`]: an ideal event simulator that closes the loop for end-to-end
//!   tests (synthetic scenes, trajectories, frame-to-event conversion).
//! - [`io`] / [`eval`]: file formats (events, poses, PLY, PNG/PFM) and the
//!   log-space-aligned PSNR/SSIM evaluation protocol.

pub mod cli;
pub mod eval;
pub mod events;
pub mod grid;
pub mod io;
pub mod loss;
pub mod math;
pub mod render;
pub mod sim;
pub mod train;

pub use grid::{Grid, ImageRgb};
