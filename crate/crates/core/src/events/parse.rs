//! Event file formats: a `t_us,x,y,p` CSV and the packed `EVT1` binary.

use std::io::Write;

use super::{Event, EventError, EventStream};

const EVT1_MAGIC: &[u8; 4] = b"EVT1";
const EVT1_RECORD: usize = 16;

/// Parses either format, detected by the magic bytes. Events are stably
/// sorted by time if the input is unordered; out-of-range pixels are
/// rejected.
pub fn parse_stream(bytes: &[u8], width: usize, height: usize) -> Result<EventStream, EventError> {
    if bytes.starts_with(EVT1_MAGIC) {
        parse_evt1(bytes, width, height)
    } else {
        parse_csv(bytes, width, height)
    }
}

fn parse_csv(bytes: &[u8], width: usize, height: usize) -> Result<EventStream, EventError> {
    let text = std::str::from_utf8(bytes).map_err(|e| EventError::Format {
        record: 0,
        message: format!("not valid UTF-8: {e}"),
    })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        None => return Ok(EventStream::new(Vec::new(), width, height)),
        Some((_, header)) => {
            let normalized: String = header.split(',').map(str::trim).collect::<Vec<_>>().join(",");
            if normalized != "t_us,x,y,p" {
                return Err(EventError::Format {
                    record: 0,
                    message: format!("expected header `t_us,x,y,p`, got `{header}`"),
                });
            }
        }
    }
    let mut events = Vec::new();
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let mut next = |name: &str| {
            fields.next().ok_or_else(|| EventError::Format {
                record: line_no,
                message: format!("missing field `{name}`"),
            })
        };
        let t_us: u64 = next("t_us")?.parse().map_err(|e| EventError::Format {
            record: line_no,
            message: format!("bad t_us: {e}"),
        })?;
        let x: i64 = next("x")?.parse().map_err(|e| EventError::Format {
            record: line_no,
            message: format!("bad x: {e}"),
        })?;
        let y: i64 = next("y")?.parse().map_err(|e| EventError::Format {
            record: line_no,
            message: format!("bad y: {e}"),
        })?;
        let p: i64 = next("p")?.parse().map_err(|e| EventError::Format {
            record: line_no,
            message: format!("bad p: {e}"),
        })?;
        if fields.next().is_some() {
            return Err(EventError::Format { record: line_no, message: "too many fields".into() });
        }
        push_checked(&mut events, line_no, t_us, x, y, p, width, height)?;
    }
    Ok(EventStream::new(events, width, height))
}

fn parse_evt1(bytes: &[u8], width: usize, height: usize) -> Result<EventStream, EventError> {
    let header_len = 4 + 4 + 4 + 8;
    if bytes.len() < header_len {
        return Err(EventError::Format { record: 0, message: "truncated EVT1 header".into() });
    }
    let file_w = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let file_h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if file_w != width || file_h != height {
        return Err(EventError::DimensionMismatch(format!(
            "EVT1 file is {file_w}x{file_h}, expected {width}x{height}"
        )));
    }
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let body = &bytes[header_len..];
    if body.len() < count * EVT1_RECORD {
        return Err(EventError::Format {
            record: body.len() / EVT1_RECORD,
            message: format!("truncated EVT1 body: {count} records declared"),
        });
    }
    let mut events = Vec::with_capacity(count);
    for (i, rec) in body.chunks_exact(EVT1_RECORD).take(count).enumerate() {
        let t_us = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let x = u16::from_le_bytes(rec[8..10].try_into().unwrap());
        let y = u16::from_le_bytes(rec[10..12].try_into().unwrap());
        let p = rec[12] as i8;
        push_checked(&mut events, i, t_us, x as i64, y as i64, p as i64, width, height)?;
    }
    Ok(EventStream::new(events, width, height))
}

fn push_checked(
    events: &mut Vec<Event>,
    record: usize,
    t_us: u64,
    x: i64,
    y: i64,
    p: i64,
    width: usize,
    height: usize,
) -> Result<(), EventError> {
    if x < 0 || y < 0 || x >= width as i64 || y >= height as i64 {
        return Err(EventError::OutOfBounds { record, x, y, width, height });
    }
    if p != 1 && p != -1 {
        return Err(EventError::Format { record, message: format!("polarity must be 1 or -1, got {p}") });
    }
    events.push(Event { t_us, x: x as u16, y: y as u16, polarity: p as i8 });
    Ok(())
}

pub fn write_csv(stream: &EventStream, out: &mut impl Write) -> Result<(), EventError> {
    writeln!(out, "t_us,x,y,p")?;
    for e in &stream.events {
        writeln!(out, "{},{},{},{}", e.t_us, e.x, e.y, e.polarity)?;
    }
    Ok(())
}

pub fn write_evt1(stream: &EventStream, out: &mut impl Write) -> Result<(), EventError> {
    out.write_all(EVT1_MAGIC)?;
    out.write_all(&(stream.width as u32).to_le_bytes())?;
    out.write_all(&(stream.height as u32).to_le_bytes())?;
    out.write_all(&(stream.events.len() as u64).to_le_bytes())?;
    for e in &stream.events {
        out.write_all(&e.t_us.to_le_bytes())?;
        out.write_all(&e.x.to_le_bytes())?;
        out.write_all(&e.y.to_le_bytes())?;
        out.write_all(&[e.polarity as u8, 0, 0, 0])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn empty_csv_gives_empty_stream() {
        let s = parse_stream(b"", 10, 10).unwrap();
        assert!(s.events.is_empty());
        let s = parse_stream(b"t_us,x,y,p\n", 10, 10).unwrap();
        assert!(s.events.is_empty());
    }

    #[test]
    fn three_records_in_time_order() {
        let csv = b"t_us,x,y,p\n30,1,2,-1\n10,0,0,1\n20,3,4,1\n";
        let s = parse_stream(csv, 10, 10).unwrap();
        assert_eq!(s.events.len(), 3);
        assert!(s.is_sorted());
        assert_eq!(s.events[0], Event { t_us: 10, x: 0, y: 0, polarity: 1 });
        assert_eq!(s.events[2], Event { t_us: 30, x: 1, y: 2, polarity: -1 });
    }

    #[test]
    fn x_equal_to_width_is_out_of_bounds() {
        let csv = b"t_us,x,y,p\n10,10,0,1\n";
        match parse_stream(csv, 10, 10) {
            Err(EventError::OutOfBounds { x, record, .. }) => {
                assert_eq!(x, 10);
                assert_eq!(record, 1);
            }
            other => panic!("expected OutOfBounds, got {other:?}"),
        }
    }

    #[test]
    fn bad_polarity_is_a_format_error() {
        let csv = b"t_us,x,y,p\n10,1,1,2\n";
        assert!(matches!(parse_stream(csv, 10, 10), Err(EventError::Format { record: 1, .. })));
    }

    #[test]
    fn evt1_roundtrip_random_streams() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for _ in 0..20 {
            let n = rng.gen_range(0..500);
            let mut t = 0u64;
            let events: Vec<Event> = (0..n)
                .map(|_| {
                    t += rng.gen_range(0..100);
                    Event {
                        t_us: t,
                        x: rng.gen_range(0..32),
                        y: rng.gen_range(0..24),
                        polarity: if rng.gen_bool(0.5) { 1 } else { -1 },
                    }
                })
                .collect();
            let stream = EventStream::new(events, 32, 24);

            let mut bin = Vec::new();
            write_evt1(&stream, &mut bin).unwrap();
            assert_eq!(parse_stream(&bin, 32, 24).unwrap(), stream);

            let mut csv = Vec::new();
            write_csv(&stream, &mut csv).unwrap();
            assert_eq!(parse_stream(&csv, 32, 24).unwrap(), stream);
        }
    }

    #[test]
    fn truncated_evt1_is_rejected() {
        let stream = EventStream::new(
            vec![Event { t_us: 5, x: 1, y: 1, polarity: 1 }; 4],
            8,
            8,
        );
        let mut bin = Vec::new();
        write_evt1(&stream, &mut bin).unwrap();
        bin.truncate(bin.len() - 7);
        assert!(matches!(parse_stream(&bin, 8, 8), Err(EventError::Format { .. })));
    }
}
