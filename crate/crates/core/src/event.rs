//! Event data model, temporal slicing and per-pixel predecessor bookkeeping.

use crate::error::{Error, Result};

/// A single brightness-change event: a polarity spike at pixel `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// Timestamp in seconds.
    pub t: f64,
    /// Column index.
    pub x: u16,
    /// Row index.
    pub y: u16,
    /// Polarity, +1 or -1.
    pub p: i8,
}

/// A time-ordered window of events on a fixed sensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSlice {
    events: Vec<Event>,
    pub t_start: f64,
    pub t_end: f64,
    pub width: usize,
    pub height: usize,
}

impl EventSlice {
    /// Builds a slice, sorting unsorted input by timestamp (stable) and
    /// validating bounds, polarities and the time span.
    pub fn new(
        mut events: Vec<Event>,
        t_start: f64,
        t_end: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if !(t_start < t_end) {
            return Err(Error::DegenerateTimeSpan { t_start, t_end });
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("sensor dimensions must be positive".into()));
        }
        for (i, e) in events.iter().enumerate() {
            if (e.x as usize) >= width || (e.y as usize) >= height {
                return Err(Error::Bounds {
                    x: e.x as u32,
                    y: e.y as u32,
                    width,
                    height,
                    line: i,
                });
            }
            if e.p != 1 && e.p != -1 {
                return Err(Error::InvalidConfig(format!("polarity {} not in {{1, -1}}", e.p)));
            }
            if !(t_start <= e.t && e.t <= t_end) {
                return Err(Error::InvalidConfig(format!(
                    "event timestamp {} outside span [{t_start}, {t_end}]",
                    e.t
                )));
            }
        }
        if !events.is_sorted_by(|a, b| a.t <= b.t) {
            events.sort_by(|a, b| a.t.total_cmp(&b.t));
        }
        Ok(Self { events, t_start, t_end, width, height })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Window duration in seconds.
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Links an event to the previous event at the same pixel within a slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredecessorPair {
    /// Position of the event in the slice.
    pub index_k: usize,
    /// Time elapsed since the previous event at the same pixel; always > 0.
    pub dt: f64,
}

/// One pair per event that has an earlier event at the same pixel.
///
/// The first event at each pixel yields no pair. Same-pixel events with
/// identical timestamps yield no pair either (`dt` must be positive), but the
/// latest of them still becomes the predecessor of the next event there.
pub fn predecessor_pairs(slice: &EventSlice) -> Vec<PredecessorPair> {
    let mut last_t = vec![f64::NAN; slice.width * slice.height];
    let mut pairs = Vec::new();
    for (k, e) in slice.events().iter().enumerate() {
        let cell = e.y as usize * slice.width + e.x as usize;
        let prev = last_t[cell];
        if prev.is_finite() {
            let dt = e.t - prev;
            if dt > 0.0 {
                pairs.push(PredecessorPair { index_k: k, dt });
            }
        }
        last_t[cell] = e.t;
    }
    pairs
}

/// How to cut a parent slice into children.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlicePolicy {
    /// Children of equal duration (the last one absorbs the remainder so the
    /// child spans concatenate exactly to the parent span).
    FixedDuration(f64),
    /// Children of `n` events each (the last one may hold fewer). Child time
    /// bounds are placed halfway between the straddling events.
    FixedCount(usize),
}

/// Cuts `slice` into consecutive children that partition the parent's time
/// span (fixed duration) or event sequence (fixed count).
pub fn slice_events(slice: &EventSlice, policy: SlicePolicy) -> Result<Vec<EventSlice>> {
    match policy {
        SlicePolicy::FixedDuration(dt) => {
            if !(dt > 0.0) {
                return Err(Error::InvalidConfig("slice duration must be > 0".into()));
            }
            let span = slice.duration();
            let n = (span / dt).ceil().max(1.0) as usize;
            let mut out = Vec::with_capacity(n);
            let mut cursor = 0usize;
            let events = slice.events();
            for i in 0..n {
                let lo = slice.t_start + i as f64 * dt;
                let hi = if i + 1 == n { slice.t_end } else { (slice.t_start + (i + 1) as f64 * dt).min(slice.t_end) };
                let last = i + 1 == n;
                let mut child = Vec::new();
                while cursor < events.len() {
                    let t = events[cursor].t;
                    if t < hi || (last && t <= hi) {
                        child.push(events[cursor]);
                        cursor += 1;
                    } else {
                        break;
                    }
                }
                out.push(EventSlice::new(child, lo, hi, slice.width, slice.height)?);
            }
            Ok(out)
        }
        SlicePolicy::FixedCount(n) => {
            if n == 0 {
                return Err(Error::InvalidConfig("slice count must be > 0".into()));
            }
            let events = slice.events();
            if events.is_empty() {
                return Ok(Vec::new());
            }
            let groups: Vec<&[Event]> = events.chunks(n).collect();
            let mut out = Vec::with_capacity(groups.len());
            let mut lo = slice.t_start;
            for (i, g) in groups.iter().enumerate() {
                let hi = if i + 1 == groups.len() {
                    slice.t_end
                } else {
                    // halfway between this group's last event and the next group's first
                    0.5 * (g.last().unwrap().t + groups[i + 1][0].t)
                };
                out.push(EventSlice::new(g.to_vec(), lo, hi, slice.width, slice.height)?);
                lo = hi;
            }
            Ok(out)
        }
    }
}
