use serde::{Deserialize, Serialize};

use super::{FrameSeries, GridSpec, TripRecord, END, START};
use crate::error::Result;

/// Counters describing what happened to every event during rasterisation.
///
/// Per state channel: `counted + dropped = trips`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    /// Well-formed trip records seen.
    pub trips: u64,
    /// Rows skipped because they could not be parsed.
    pub malformed: u64,
    pub counted_start: u64,
    pub counted_end: u64,
    /// Start events outside the bounding box or slot range.
    pub dropped_start: u64,
    pub dropped_end: u64,
}

impl IngestReport {
    pub fn merge(&mut self, other: &IngestReport) {
        self.trips += other.trips;
        self.malformed += other.malformed;
        self.counted_start += other.counted_start;
        self.counted_end += other.counted_end;
        self.dropped_start += other.dropped_start;
        self.dropped_end += other.dropped_end;
    }
}

/// Accumulates trips into count grids. Shards built over disjoint slices of
/// the record stream can be combined with [`Rasterizer::merge`]; integer
/// addition makes the result independent of shard order.
#[derive(Clone, Debug)]
pub struct Rasterizer {
    spec: GridSpec,
    counts: Vec<u32>,
    report: IngestReport,
}

impl Rasterizer {
    pub fn new(spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Rasterizer {
            spec: spec.clone(),
            counts: vec![0; spec.num_slots * spec.layout().frame_len()],
            report: IngestReport::default(),
        })
    }

    fn locate(&self, time: i64, lat: f64, lon: f64, k: usize) -> Option<usize> {
        let slot = self.spec.slot_of(time)?;
        let (i, j) = self.spec.cell_of(lat, lon)?;
        let layout = self.spec.layout();
        Some(slot * layout.frame_len() + layout.index(i, j, k))
    }

    pub fn push(&mut self, trip: &TripRecord) {
        self.report.trips += 1;
        match self.locate(trip.start_time, trip.start_lat, trip.start_lon, START) {
            Some(idx) => {
                self.counts[idx] += 1;
                self.report.counted_start += 1;
            }
            None => self.report.dropped_start += 1,
        }
        match self.locate(trip.end_time, trip.end_lat, trip.end_lon, END) {
            Some(idx) => {
                self.counts[idx] += 1;
                self.report.counted_end += 1;
            }
            None => self.report.dropped_end += 1,
        }
    }

    pub fn note_malformed(&mut self) {
        self.report.malformed += 1;
    }

    pub fn merge(&mut self, other: &Rasterizer) {
        assert_eq!(self.counts.len(), other.counts.len(), "merging incompatible rasterizers");
        self.counts
            .iter_mut()
            .zip(&other.counts)
            .for_each(|(a, b)| *a += b);
        self.report.merge(&other.report);
    }

    pub fn finish(self) -> (FrameSeries, IngestReport) {
        let layout = self.spec.layout();
        let mut series = FrameSeries::zeros(layout, self.spec.num_slots);
        for (frame, chunk) in series
            .frames
            .iter_mut()
            .zip(self.counts.chunks_exact(layout.frame_len()))
        {
            frame.counts.copy_from_slice(chunk);
        }
        (series, self.report)
    }
}

/// Rasterises a whole record stream.
pub fn rasterize<'a>(
    records: impl IntoIterator<Item = &'a TripRecord>,
    spec: &GridSpec,
) -> Result<(FrameSeries, IngestReport)> {
    let mut r = Rasterizer::new(spec)?;
    for rec in records {
        r.push(rec);
    }
    Ok(r.finish())
}
