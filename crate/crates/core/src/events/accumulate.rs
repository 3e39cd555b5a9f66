//! Window accumulation with sparsity-aware noise augmentation.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use super::{EventCameraModel, EventFrame, EventStream, EventWindow};
use crate::grid::Grid;

/// Accumulates a window into a supervision frame.
///
/// Event pixels hold `threshold * sum(polarities)`; no-event pixels hold
/// `threshold * n` with `n ~ N(0, noise_sigma^2)` drawn row-major from a
/// generator seeded with `rng_seed`, so the result is deterministic per
/// seed and two seeds differ only on masked pixels.
pub fn accumulate(
    stream: &EventStream,
    window: &EventWindow,
    model: &EventCameraModel,
    rng_seed: u64,
) -> EventFrame {
    let (w, h) = (stream.width, stream.height);
    let mut polarity_sum = vec![0i64; w * h];
    let mut no_event = vec![true; w * h];
    for e in window.events(stream) {
        let i = e.y as usize * w + e.x as usize;
        polarity_sum[i] += e.polarity as i64;
        no_event[i] = false;
    }

    let mut accumulated = Grid::zeros(w, h);
    for (i, &sum) in polarity_sum.iter().enumerate() {
        if !no_event[i] {
            accumulated.data[i] = model.threshold * sum as f64;
        }
    }
    if model.noise_sigma > 0.0 {
        let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
        let normal = Normal::new(0.0, model.noise_sigma).expect("sigma >= 0");
        for i in 0..w * h {
            if no_event[i] {
                accumulated.data[i] = model.threshold * normal.sample(&mut rng);
            }
        }
    }

    EventFrame {
        accumulated,
        no_event_mask: no_event,
        start_us: window.start_us,
        end_us: window.end_us,
    }
}
