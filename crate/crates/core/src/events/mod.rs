//! Event-stream ingestion: parsing, neutralization-aware slicing, and
//! accumulation into supervision frames with sparsity-aware noise.

mod accumulate;
mod bayer;
mod parse;
mod slice;

pub use accumulate::accumulate;
pub use bayer::{apply_bayer, bayer_channel, BayerMask};
pub use parse::{parse_stream, write_csv, write_evt1};
pub use slice::slice_stream;

use crate::grid::Grid;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EventError {
    #[error("format error at record {record}: {message}")]
    Format { record: usize, message: String },
    #[error("event at record {record} out of bounds: ({x}, {y}) not inside {width}x{height}")]
    OutOfBounds { record: usize, x: i64, y: i64, width: usize, height: usize },
    #[error("event stream is empty")]
    EmptyStream,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A single polarity event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    /// Microseconds, non-negative.
    pub t_us: u64,
    pub x: u16,
    pub y: u16,
    /// +1 or -1.
    pub polarity: i8,
}

/// Time-ordered event list with the sensor resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub events: Vec<Event>,
    pub width: usize,
    pub height: usize,
}

impl EventStream {
    pub fn new(mut events: Vec<Event>, width: usize, height: usize) -> Self {
        if !events.windows(2).all(|w| w[0].t_us <= w[1].t_us) {
            events.sort_by_key(|e| e.t_us);
        }
        Self { events, width, height }
    }

    pub fn is_sorted(&self) -> bool {
        self.events.windows(2).all(|w| w[0].t_us <= w[1].t_us)
    }
}

/// A contiguous slice of the stream; all contained event times lie in
/// `[start_us, end_us)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventWindow {
    pub start_us: u64,
    pub end_us: u64,
    /// Index range into the owning stream's event list.
    pub begin: usize,
    pub end: usize,
}

impl EventWindow {
    pub fn len(&self) -> usize {
        self.end - self.begin
    }

    pub fn is_empty(&self) -> bool {
        self.begin == self.end
    }

    pub fn events<'a>(&self, stream: &'a EventStream) -> &'a [Event] {
        &stream.events[self.begin..self.end]
    }
}

/// Event camera / accumulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCameraModel {
    /// Fixed event threshold, log-intensity units.
    pub threshold: f64,
    /// Std-dev of the no-event noise augmentation (in threshold units).
    pub noise_sigma: f64,
    /// Slice when this many distinct pixels saw both polarities in the
    /// current window.
    pub neutralization_pixel_threshold: usize,
    /// Slice when the running window reaches this many events.
    pub window_event_count: usize,
}

impl EventCameraModel {
    /// Defaults scaled to the sensor resolution: the event-count threshold
    /// matches 50_000 events at 640x360 and the neutralization threshold is
    /// 2% of the pixel count.
    pub fn default_for(width: usize, height: usize) -> Self {
        let pixels = width * height;
        let window_event_count = ((50_000.0 * pixels as f64 / (640.0 * 360.0)).round() as usize).max(1);
        Self {
            threshold: 0.2,
            noise_sigma: 0.2,
            neutralization_pixel_threshold: ((pixels as f64 * 0.02).round() as usize).max(1),
            window_event_count,
        }
    }
}

/// Accumulated supervision frame for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFrame {
    /// Per-pixel log-intensity change: `threshold * sum(polarities)` on
    /// event pixels, `threshold * N(0, sigma^2)` noise on no-event pixels.
    pub accumulated: Grid,
    /// True exactly where no event fired during the window.
    pub no_event_mask: Vec<bool>,
    pub start_us: u64,
    pub end_us: u64,
}
