//! Event stream file formats.
//!
//! Text: header `# evtxt1 <width> <height> <t_start> <t_end>`, then one event
//! per line as `t x y p` with `p` in {1, -1}.
//!
//! Binary: magic `EVT1`, little-endian `u32` width, `u32` height, `f64`
//! t_start, `f64` t_end, `u64` count, then `count` records of
//! `(f64 t, u16 x, u16 y, i8 p, 3 pad bytes)` — 16 bytes per record.
//! Round-trips bit-exactly on canonical (sorted) slices.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::event::{Event, EventSlice};

pub const BINARY_MAGIC: &[u8; 4] = b"EVT1";
const TEXT_MAGIC: &str = "# evtxt1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Text,
    Binary,
}

/// Reads a slice from `path` in the given format.
///
/// Timestamps outside the declared header span are clamped into it, and
/// unsorted input is sorted on load.
pub fn read_events(path: &Path, format: EventFormat) -> Result<EventSlice> {
    let file = File::open(path)?;
    match format {
        EventFormat::Text => read_events_text(BufReader::new(file)),
        EventFormat::Binary => read_events_binary(BufReader::new(file)),
    }
}

/// Reads a slice from `path`, detecting the format from the leading bytes.
pub fn read_events_auto(path: &Path) -> Result<EventSlice> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 4];
    let n = file.read(&mut magic)?;
    drop(file);
    if n == 4 && &magic == BINARY_MAGIC {
        read_events(path, EventFormat::Binary)
    } else {
        read_events(path, EventFormat::Text)
    }
}

pub fn write_events(path: &Path, slice: &EventSlice, format: EventFormat) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        EventFormat::Text => write_events_text(&mut out, slice)?,
        EventFormat::Binary => write_events_binary(&mut out, slice)?,
    }
    out.flush()?;
    Ok(())
}

pub fn read_events_text<R: BufRead>(reader: R) -> Result<EventSlice> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "empty stream".into() })??;
    let rest = header
        .strip_prefix(TEXT_MAGIC)
        .ok_or_else(|| Error::Parse { line: 1, msg: format!("expected `{TEXT_MAGIC}` header") })?;
    let fields: Vec<&str> = rest.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(Error::Parse { line: 1, msg: "header needs `width height t_start t_end`".into() });
    }
    let width: usize = parse_field(fields[0], 1, "width")?;
    let height: usize = parse_field(fields[1], 1, "height")?;
    let t_start: f64 = parse_field(fields[2], 1, "t_start")?;
    let t_end: f64 = parse_field(fields[3], 1, "t_end")?;

    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let f: Vec<&str> = trimmed.split_whitespace().collect();
        if f.len() != 4 {
            return Err(Error::Parse { line: line_no, msg: format!("expected 4 fields, got {}", f.len()) });
        }
        let t: f64 = parse_field(f[0], line_no, "t")?;
        let x: u32 = parse_field(f[1], line_no, "x")?;
        let y: u32 = parse_field(f[2], line_no, "y")?;
        let p: i8 = parse_field(f[3], line_no, "p")?;
        if x as usize >= width || y as usize >= height {
            return Err(Error::Bounds { x, y, width, height, line: line_no });
        }
        if p != 1 && p != -1 {
            return Err(Error::Parse { line: line_no, msg: format!("polarity {p} not in {{1, -1}}") });
        }
        events.push(Event { t: t.clamp(t_start, t_end), x: x as u16, y: y as u16, p });
    }
    EventSlice::new(events, t_start, t_end, width, height)
}

pub fn write_events_text<W: Write>(out: &mut W, slice: &EventSlice) -> Result<()> {
    writeln!(out, "{TEXT_MAGIC} {} {} {} {}", slice.width, slice.height, slice.t_start, slice.t_end)?;
    for e in slice.events() {
        writeln!(out, "{} {} {} {}", e.t, e.x, e.y, e.p)?;
    }
    Ok(())
}

pub fn read_events_binary<R: Read>(mut reader: R) -> Result<EventSlice> {
    let mut header = [0u8; 4 + 4 + 4 + 8 + 8 + 8];
    read_exact_at(&mut reader, &mut header, 0)?;
    if &header[0..4] != BINARY_MAGIC {
        return Err(Error::Binary { offset: 0, msg: "bad magic, expected EVT1".into() });
    }
    let width = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let t_start = f64::from_le_bytes(header[12..20].try_into().unwrap());
    let t_end = f64::from_le_bytes(header[20..28].try_into().unwrap());
    let count = u64::from_le_bytes(header[28..36].try_into().unwrap());

    let mut events = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut rec = [0u8; 16];
    for i in 0..count {
        let offset = 36 + i * 16;
        read_exact_at(&mut reader, &mut rec, offset)?;
        let t = f64::from_le_bytes(rec[0..8].try_into().unwrap());
        let x = u16::from_le_bytes(rec[8..10].try_into().unwrap());
        let y = u16::from_le_bytes(rec[10..12].try_into().unwrap());
        let p = rec[12] as i8;
        if x as usize >= width || y as usize >= height {
            return Err(Error::Bounds { x: x as u32, y: y as u32, width, height, line: i as usize });
        }
        if p != 1 && p != -1 {
            return Err(Error::Binary { offset, msg: format!("polarity {p} not in {{1, -1}}") });
        }
        events.push(Event { t: t.clamp(t_start, t_end), x, y, p });
    }
    EventSlice::new(events, t_start, t_end, width, height)
}

pub fn write_events_binary<W: Write>(out: &mut W, slice: &EventSlice) -> Result<()> {
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&(slice.width as u32).to_le_bytes())?;
    out.write_all(&(slice.height as u32).to_le_bytes())?;
    out.write_all(&slice.t_start.to_le_bytes())?;
    out.write_all(&slice.t_end.to_le_bytes())?;
    out.write_all(&(slice.len() as u64).to_le_bytes())?;
    for e in slice.events() {
        out.write_all(&e.t.to_le_bytes())?;
        out.write_all(&e.x.to_le_bytes())?;
        out.write_all(&e.y.to_le_bytes())?;
        out.write_all(&[e.p as u8, 0, 0, 0])?;
    }
    Ok(())
}

fn read_exact_at<R: Read>(reader: &mut R, buf: &mut [u8], offset: u64) -> Result<()> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Binary { offset, msg: "truncated stream".into() }
        } else {
            Error::Io(e)
        }
    })
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, name: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse { line, msg: format!("cannot parse {name} from `{s}`") })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_example_line() {
        let src = "# evtxt1 64 48 0.0 1.0\n0.50 10 10 1\n";
        let s = read_events_text(src.as_bytes()).unwrap();
        assert_eq!(s.len(), 1);
        let e = s.events()[0];
        assert_eq!((e.t, e.x, e.y, e.p), (0.5, 10, 10, 1));
    }

    #[test]
    fn header_only_degenerate_span() {
        let src = "# evtxt1 64 48 2.0 2.0\n";
        let err = read_events_text(src.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DegenerateTimeSpan { .. }));
    }

    #[test]
    fn text_out_of_range_pixel() {
        let src = "# evtxt1 8 8 0.0 1.0\n0.5 8 0 1\n";
        let err = read_events_text(src.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Bounds { line: 2, .. }));
    }

    #[test]
    fn text_parse_error_carries_line() {
        let src = "# evtxt1 8 8 0.0 1.0\n0.5 1 1 1\nnot-a-number 1 1 1\n";
        let err = read_events_text(src.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn timestamps_clamped_into_span() {
        let src = "# evtxt1 8 8 0.0 1.0\n-0.5 1 1 1\n1.5 2 2 -1\n";
        let s = read_events_text(src.as_bytes()).unwrap();
        assert_eq!(s.events()[0].t, 0.0);
        assert_eq!(s.events()[1].t, 1.0);
    }

    #[test]
    fn binary_roundtrip_three_records() {
        let s = EventSlice::new(
            vec![
                Event { t: 0.125, x: 3, y: 1, p: 1 },
                Event { t: 0.25, x: 0, y: 7, p: -1 },
                Event { t: 0.75, x: 63, y: 47, p: 1 },
            ],
            0.0,
            1.0,
            64,
            48,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_events_binary(&mut buf, &s).unwrap();
        let back = read_events_binary(buf.as_slice()).unwrap();
        let mut buf2 = Vec::new();
        write_events_binary(&mut buf2, &back).unwrap();
        assert_eq!(buf, buf2);
        assert_eq!(back, s);
    }

    #[test]
    fn binary_truncation_reports_offset() {
        let s = EventSlice::new(vec![Event { t: 0.5, x: 1, y: 1, p: 1 }], 0.0, 1.0, 4, 4).unwrap();
        let mut buf = Vec::new();
        write_events_binary(&mut buf, &s).unwrap();
        buf.truncate(buf.len() - 3);
        let err = read_events_binary(buf.as_slice()).unwrap_err();
        assert!(matches!(err, Error::Binary { offset: 36, .. }));
    }
}
