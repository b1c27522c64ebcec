//! Trip records to per-timeslot count grids.
//!
//! A [`GridSpec`] partitions a lat/lon bounding box into equal-degree cells
//! and time into half-open slots `[origin + t*slot, origin + (t+1)*slot)`.
//! Channel 0 counts trip starts, channel 1 trip ends.

mod archive;
mod normalize;
mod raster;
mod trips;

pub use archive::{read_archive, write_archive, ARCHIVE_MAGIC};
pub use normalize::{NormStats, NormalizedSeries};
pub use raster::{rasterize, IngestReport, Rasterizer};
pub use trips::{parse_timestamp, read_trips_csv, TripRecord, TRIP_CSV_HEADER};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Number of state channels produced by rasterisation (start, end).
pub const STATES: usize = 2;
pub const START: usize = 0;
pub const END: usize = 1;

/// Spatial layout shared by frames, predictions and metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    pub states: usize,
}

impl GridLayout {
    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    /// Values per frame.
    pub fn frame_len(&self) -> usize {
        self.rows * self.cols * self.states
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.cols + j) * self.states + k
    }
}

/// Spatial and temporal partition of the city.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub rows: usize,
    pub cols: usize,
    pub slot_seconds: i64,
    /// Start of slot 0, seconds since the Unix epoch (UTC).
    #[serde(with = "iso_seconds")]
    pub origin_time: i64,
    pub num_slots: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lat_min < self.lat_max) || !(self.lon_min < self.lon_max) {
            return config_err(format!(
                "grid bounding box is empty: lat [{}, {}), lon [{}, {})",
                self.lat_min, self.lat_max, self.lon_min, self.lon_max
            ));
        }
        if self.rows == 0 || self.cols == 0 {
            return config_err(format!("grid must have at least one cell, got {}x{}", self.rows, self.cols));
        }
        if self.slot_seconds <= 0 {
            return config_err(format!("slot_seconds must be positive, got {}", self.slot_seconds));
        }
        if self.num_slots == 0 {
            return config_err("num_slots must be positive");
        }
        Ok(())
    }

    pub fn layout(&self) -> GridLayout {
        GridLayout {
            rows: self.rows,
            cols: self.cols,
            states: STATES,
        }
    }

    /// Cell of a coordinate; `None` outside `[min, max)` on either axis.
    pub fn cell_of(&self, lat: f64, lon: f64) -> Option<(usize, usize)> {
        let i = axis_index(lat, self.lat_min, self.lat_max, self.rows)?;
        let j = axis_index(lon, self.lon_min, self.lon_max, self.cols)?;
        Some((i, j))
    }

    /// Timeslot of a timestamp; `None` outside `[0, num_slots)`.
    pub fn slot_of(&self, time: i64) -> Option<usize> {
        let slot = (time - self.origin_time).div_euclid(self.slot_seconds);
        (0..self.num_slots as i64)
            .contains(&slot)
            .then_some(slot as usize)
    }

    pub fn slots_per_day(&self) -> Option<usize> {
        (86_400 % self.slot_seconds == 0).then(|| (86_400 / self.slot_seconds) as usize)
    }
}

fn axis_index(v: f64, lo: f64, hi: f64, n: usize) -> Option<usize> {
    if !(v >= lo && v < hi) {
        return None;
    }
    let step = (hi - lo) / n as f64;
    // float rounding can push values just below `hi` onto index n
    Some((((v - lo) / step).floor() as usize).min(n - 1))
}

/// Count grid for one timeslot, laid out `(i, j, k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrafficFrame {
    pub slot: usize,
    pub counts: Vec<u32>,
}

/// Consecutive frames starting at slot `first_slot`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameSeries {
    pub layout: GridLayout,
    pub frames: Vec<TrafficFrame>,
}

impl FrameSeries {
    pub fn zeros(layout: GridLayout, num_slots: usize) -> Self {
        FrameSeries {
            layout,
            frames: (0..num_slots)
                .map(|slot| TrafficFrame {
                    slot,
                    counts: vec![0; layout.frame_len()],
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn first_slot(&self) -> usize {
        self.frames.first().map_or(0, |f| f.slot)
    }

    pub fn frame(&self, slot: usize) -> Option<&TrafficFrame> {
        let idx = slot.checked_sub(self.first_slot())?;
        self.frames.get(idx)
    }

    /// Total count of one state channel over every frame.
    pub fn channel_total(&self, k: usize) -> u64 {
        self.frames
            .iter()
            .flat_map(|f| f.counts.iter().skip(k).step_by(self.layout.states))
            .map(|&c| c as u64)
            .sum()
    }

    /// Frames as `f64` grids, one vector per slot.
    pub fn as_f64(&self) -> Vec<Vec<f64>> {
        self.frames
            .iter()
            .map(|f| f.counts.iter().map(|&c| c as f64).collect())
            .collect()
    }

    /// Splits at slot `boundary`: slots strictly before go to train, the rest
    /// to test.
    pub fn split(&self, boundary: usize) -> Result<(FrameSeries, FrameSeries)> {
        let first = self.first_slot();
        let end = first + self.len();
        if boundary <= first || boundary >= end {
            return config_err(format!(
                "split boundary slot {boundary} leaves an empty side (frames cover [{first}, {end}))"
            ));
        }
        let at = boundary - first;
        Ok((
            FrameSeries {
                layout: self.layout,
                frames: self.frames[..at].to_vec(),
            },
            FrameSeries {
                layout: self.layout,
                frames: self.frames[at..].to_vec(),
            },
        ))
    }
}

/// Serde adapter storing a Unix timestamp as an ISO-8601 string.
pub(crate) mod iso_seconds {
    use chrono::{DateTime, Utc};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &i64, s: S) -> Result<S::Ok, S::Error> {
        let dt = DateTime::<Utc>::from_timestamp(*t, 0).ok_or_else(|| {
            serde::ser::Error::custom(format!("timestamp {t} out of range"))
        })?;
        s.serialize_str(&dt.format("%Y-%m-%dT%H:%M:%SZ").to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<i64, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_timestamp(&s).ok_or_else(|| D::Error::custom(format!("invalid ISO-8601 timestamp `{s}`")))
    }
}
