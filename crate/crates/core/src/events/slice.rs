//! Neutralization-aware stream slicing.

use std::collections::HashMap;

use super::{EventCameraModel, EventError, EventStream, EventWindow};

/// Partitions the stream into windows. A cut fires after the event that
/// either brings the running count to `window_event_count` or brings the
/// number of neutralized pixels (pixels that saw both polarities within the
/// current window) to `neutralization_pixel_threshold`, whichever happens
/// first. A trailing partial window is kept if it holds at least 10% of
/// `window_event_count`, otherwise it is merged into the previous window.
pub fn slice_stream(
    stream: &EventStream,
    model: &EventCameraModel,
) -> Result<Vec<EventWindow>, EventError> {
    if stream.events.is_empty() {
        return Err(EventError::EmptyStream);
    }
    debug_assert!(stream.is_sorted());

    let mut windows = Vec::new();
    let mut begin = 0usize;
    // Per-pixel polarity presence in the current window: bit 0 = positive
    // seen, bit 1 = negative seen.
    let mut seen: HashMap<(u16, u16), u8> = HashMap::new();
    let mut neutralized = 0usize;

    for (i, e) in stream.events.iter().enumerate() {
        let flags = seen.entry((e.x, e.y)).or_insert(0);
        let bit = if e.polarity > 0 { 1u8 } else { 2u8 };
        let before = *flags;
        *flags |= bit;
        if before != *flags && *flags == 3 {
            neutralized += 1;
        }

        let count = i + 1 - begin;
        if count >= model.window_event_count || neutralized >= model.neutralization_pixel_threshold {
            windows.push(make_window(stream, begin, i + 1));
            begin = i + 1;
            seen.clear();
            neutralized = 0;
        }
    }

    if begin < stream.events.len() {
        let tail_len = stream.events.len() - begin;
        let keep = tail_len * 10 >= model.window_event_count || windows.is_empty();
        if keep {
            windows.push(make_window(stream, begin, stream.events.len()));
        } else {
            let prev = windows.pop().expect("non-empty by keep rule");
            windows.push(make_window(stream, prev.begin, stream.events.len()));
        }
    }

    Ok(windows)
}

fn make_window(stream: &EventStream, begin: usize, end: usize) -> EventWindow {
    EventWindow {
        start_us: stream.events[begin].t_us,
        end_us: stream.events[end - 1].t_us + 1,
        begin,
        end,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Event;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn model(count: usize, neutral: usize) -> EventCameraModel {
        EventCameraModel {
            threshold: 0.2,
            noise_sigma: 0.2,
            neutralization_pixel_threshold: neutral,
            window_event_count: count,
        }
    }

    fn uniform_stream(n: usize) -> EventStream {
        let events = (0..n)
            .map(|i| Event { t_us: i as u64 * 10, x: (i % 7) as u16, y: (i % 5) as u16, polarity: 1 })
            .collect();
        EventStream::new(events, 8, 8)
    }

    #[test]
    fn count_only_slicing() {
        let stream = uniform_stream(5000);
        let windows = slice_stream(&stream, &model(2000, usize::MAX)).unwrap();
        assert_eq!(windows.len(), 3);
        assert_eq!(windows[0].len(), 2000);
        assert_eq!(windows[1].len(), 2000);
        assert_eq!(windows[2].len(), 1000);
    }

    #[test]
    fn neutralization_cut_after_second_event() {
        // Pixel (3,3) alternates +1/-1; with threshold 1 the first window
        // must close right after the second event.
        let events: Vec<Event> = (0..10)
            .map(|i| Event { t_us: i as u64, x: 3, y: 3, polarity: if i % 2 == 0 { 1 } else { -1 } })
            .collect();
        let stream = EventStream::new(events, 8, 8);
        let windows = slice_stream(&stream, &model(1000, 1)).unwrap();
        assert_eq!(windows[0].len(), 2);
        // The counter resets at each cut, so every window pairs up.
        for w in &windows {
            assert_eq!(w.len() % 2, 0);
        }
    }

    #[test]
    fn single_event_keeps_trailing_window() {
        let stream = uniform_stream(1);
        let windows = slice_stream(&stream, &model(2000, usize::MAX)).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].len(), 1);
    }

    #[test]
    fn short_tail_merges_into_previous_window() {
        // 2100 events with threshold 2000: the 100-event tail is below the
        // 10% keep rule and merges backward.
        let stream = uniform_stream(2100);
        let windows = slice_stream(&stream, &model(2000, usize::MAX)).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].len(), 2100);

        // 2200 events: the 200-event tail is exactly 10% and is kept.
        let stream = uniform_stream(2200);
        let windows = slice_stream(&stream, &model(2000, usize::MAX)).unwrap();
        assert_eq!(windows.len(), 2);
        assert_eq!(windows[1].len(), 200);
    }

    #[test]
    fn empty_stream_is_an_error() {
        let stream = EventStream::new(Vec::new(), 8, 8);
        assert!(matches!(slice_stream(&stream, &model(10, 10)), Err(EventError::EmptyStream)));
    }

    #[test]
    fn partition_property_random_streams() {
        let mut rng = ChaCha12Rng::seed_from_u64(123);
        for _ in 0..100 {
            let n = rng.gen_range(1..3000);
            let mut t = 0u64;
            let events: Vec<Event> = (0..n)
                .map(|_| {
                    t += rng.gen_range(0..20);
                    Event {
                        t_us: t,
                        x: rng.gen_range(0..16),
                        y: rng.gen_range(0..16),
                        polarity: if rng.gen_bool(0.5) { 1 } else { -1 },
                    }
                })
                .collect();
            let stream = EventStream::new(events, 16, 16);
            let m = model(rng.gen_range(50..500), rng.gen_range(5..50));
            let windows = slice_stream(&stream, &m).unwrap();

            // Windows tile the event list exactly, in order.
            let mut cursor = 0usize;
            for w in &windows {
                assert_eq!(w.begin, cursor);
                assert!(w.end > w.begin);
                cursor = w.end;
                assert!(w.events(&stream).iter().all(|e| e.t_us >= w.start_us && e.t_us < w.end_us));
                assert!(w.end_us > w.start_us);
            }
            assert_eq!(cursor, stream.events.len());
        }
    }
}
