//! RGGB Bayer channel selection for color event sensors.

use serde::{Deserialize, Serialize};

use super::EventError;
use crate::grid::{Grid, ImageRgb};

/// RGGB mosaic over the sensor: (even row, even col) = R,
/// (even, odd) = G, (odd, even) = G, (odd, odd) = B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BayerMask {
    pub width: usize,
    pub height: usize,
    /// When disabled, channel selection degrades to the grayscale mean.
    pub enabled: bool,
}

/// Channel index (0=R, 1=G, 2=B) at a pixel of the RGGB tiling.
#[inline]
pub fn bayer_channel(x: usize, y: usize) -> usize {
    match (y % 2, x % 2) {
        (0, 0) => 0,
        (1, 1) => 2,
        _ => 1,
    }
}

impl BayerMask {
    pub fn new(width: usize, height: usize, enabled: bool) -> Self {
        Self { width, height, enabled }
    }

    /// Per-pixel scalar from an RGB pixel: the mosaic channel when enabled,
    /// the channel mean otherwise.
    #[inline]
    pub fn select(&self, x: usize, y: usize, rgb: [f64; 3]) -> f64 {
        if self.enabled {
            rgb[bayer_channel(x, y)]
        } else {
            (rgb[0] + rgb[1] + rgb[2]) / 3.0
        }
    }

    /// Distributes a scalar gradient back onto the RGB channels it came from.
    #[inline]
    pub fn spread_gradient(&self, x: usize, y: usize, d: f64) -> [f64; 3] {
        if self.enabled {
            let mut out = [0.0; 3];
            out[bayer_channel(x, y)] = d;
            out
        } else {
            [d / 3.0; 3]
        }
    }
}

/// Collapses an RGB grid to the per-pixel mosaic channel (or grayscale mean
/// when the mask is disabled).
pub fn apply_bayer(frame_rgb: &ImageRgb, mask: &BayerMask) -> Result<Grid, EventError> {
    if frame_rgb.width != mask.width || frame_rgb.height != mask.height {
        return Err(EventError::DimensionMismatch(format!(
            "image is {}x{}, mask is {}x{}",
            frame_rgb.width, frame_rgb.height, mask.width, mask.height
        )));
    }
    Ok(Grid::from_fn(frame_rgb.width, frame_rgb.height, |x, y| {
        mask.select(x, y, frame_rgb.pixel(x, y))
    }))
}
