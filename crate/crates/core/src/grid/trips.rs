use std::io::Read;

use chrono::{DateTime, NaiveDateTime};

use crate::error::{PanError, Result};

/// Exact header line of a trip CSV.
pub const TRIP_CSV_HEADER: &str = "start_time,end_time,start_lat,start_lon,end_lat,end_lon";

/// One trip; times are Unix seconds (UTC), coordinates in degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TripRecord {
    pub start_time: i64,
    pub end_time: i64,
    pub start_lat: f64,
    pub start_lon: f64,
    pub end_lat: f64,
    pub end_lon: f64,
}

impl TripRecord {
    pub fn parse_fields(fields: &[&str]) -> std::result::Result<Self, String> {
        let [st, et, slat, slon, elat, elon] = fields else {
            return Err(format!("expected 6 fields, found {}", fields.len()));
        };
        let time = |s: &str| parse_timestamp(s).ok_or_else(|| format!("bad timestamp `{s}`"));
        let deg = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("bad coordinate `{s}`"))
        };
        let rec = TripRecord {
            start_time: time(st)?,
            end_time: time(et)?,
            start_lat: deg(slat)?,
            start_lon: deg(slon)?,
            end_lat: deg(elat)?,
            end_lon: deg(elon)?,
        };
        if rec.start_time > rec.end_time {
            return Err("trip ends before it starts".into());
        }
        Ok(rec)
    }
}

/// Parses ISO-8601 with an offset (`2016-07-01T08:30:00Z`) or without one,
/// in which case UTC is assumed (`2016-07-01T08:30:00`, `2016-07-01 08:30:00`).
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|dt| dt.and_utc().timestamp())
}

/// Reads a trip CSV. Rows that fail to parse are yielded as `Err(reason)` so
/// callers can count and skip them; only an unreadable stream or a wrong
/// header fails the whole read.
pub fn read_trips_csv<R: Read>(
    reader: R,
) -> Result<impl Iterator<Item = std::result::Result<TripRecord, String>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| PanError::Data(format!("cannot read trip CSV header: {e}")))?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got.join(",") != TRIP_CSV_HEADER {
        return Err(PanError::Data(format!(
            "trip CSV header must be `{TRIP_CSV_HEADER}`, found `{}`",
            got.join(",")
        )));
    }
    Ok(rdr.into_records().map(|row| {
        let row = row.map_err(|e| e.to_string())?;
        let fields: Vec<&str> = row.iter().collect();
        TripRecord::parse_fields(&fields)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps_with_and_without_offset() {
        assert_eq!(parse_timestamp("2016-07-01T00:00:00Z"), Some(1_467_331_200));
        assert_eq!(parse_timestamp("2016-07-01T02:00:00+02:00"), Some(1_467_331_200));
        assert_eq!(parse_timestamp("2016-07-01 00:00:00"), Some(1_467_331_200));
        assert_eq!(parse_timestamp("2016-07-01T00:00:00.5"), Some(1_467_331_200));
        assert_eq!(parse_timestamp("yesterday"), None);
    }

    #[test]
    fn malformed_rows_are_yielded_not_fatal() {
        let csv = format!(
            "{TRIP_CSV_HEADER}\n\
             2016-07-01T00:00:00Z,2016-07-01T00:10:00Z,40.5,-73.5,40.6,-73.4\n\
             not-a-time,2016-07-01T00:10:00Z,40.5,-73.5,40.6,-73.4\n\
             2016-07-01T00:00:00Z,2016-07-01T00:10:00Z,40.5\n\
             2016-07-01T01:00:00Z,2016-07-01T00:10:00Z,40.5,-73.5,40.6,-73.4\n\
             2016-07-01T00:20:00Z,2016-07-01T00:30:00Z,40.1,-73.9,40.2,-73.8\n"
        );
        let rows: Vec<_> = read_trips_csv(csv.as_bytes()).unwrap().collect();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows.iter().filter(|r| r.is_ok()).count(), 2);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let err = read_trips_csv("a,b,c\n1,2,3\n".as_bytes()).err().unwrap();
        assert_eq!(err.exit_code(), 2);
    }
}
