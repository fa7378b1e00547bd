//! ADS-B state vectors: validated records, per-aircraft trajectories,
//! CSV ingestion and a seeded synthetic generator.

mod csv_io;
mod group;
mod store;
mod synth;

pub use csv_io::{
    parse_csv, parse_csv_reader, write_csv, write_rejects, ParseOutcome, Reject, CSV_HEADER,
};
pub use group::{group_into_trajectories, GroupOutcome, DEFAULT_GAP_THRESHOLD_S};
pub use store::TrajectoryStore;
pub use synth::{synth_generate, SynthConfig, SynthNoise};

use serde::{Deserialize, Serialize};

/// One ADS-B state report. Altitude is in feet, velocity in knots,
/// vertical rate in feet per minute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdsbRecord {
    /// Unix seconds.
    pub timestamp: i64,
    pub icao24: String,
    pub callsign: String,
    pub lat: f64,
    pub lon: f64,
    pub altitude: f64,
    pub velocity: f64,
    pub heading: f64,
    pub vertical_rate: f64,
    /// `timestamp` truncated to the hour.
    pub hour: i64,
}

pub fn hour_of(timestamp: i64) -> i64 {
    timestamp - timestamp.rem_euclid(3600)
}

pub fn is_valid_icao24(s: &str) -> bool {
    s.len() == 6
        && s.bytes()
            .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

impl AdsbRecord {
    /// Why the record violates its field ranges, if it does.
    pub fn violation(&self) -> Option<String> {
        if !is_valid_icao24(&self.icao24) {
            return Some(format!(
                "icao24 `{}` is not 6 lowercase hex digits",
                self.icao24
            ));
        }
        let finite = [
            ("lat", self.lat),
            ("lon", self.lon),
            ("baroaltitude", self.altitude),
            ("velocity", self.velocity),
            ("heading", self.heading),
            ("vertrate", self.vertical_rate),
        ];
        if let Some((name, _)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return Some(format!("{name} is not finite"));
        }
        if !(-90.0..=90.0).contains(&self.lat) {
            return Some(format!("lat {} outside [-90, 90]", self.lat));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Some(format!("lon {} outside [-180, 180]", self.lon));
        }
        if self.velocity < 0.0 {
            return Some(format!("velocity {} is negative", self.velocity));
        }
        if !(0.0..360.0).contains(&self.heading) {
            return Some(format!("heading {} outside [0, 360)", self.heading));
        }
        if !(self.hour <= self.timestamp && self.timestamp < self.hour + 3600) {
            return Some(format!(
                "hour {} does not contain timestamp {}",
                self.hour, self.timestamp
            ));
        }
        None
    }
}

/// Time-ordered records of one aircraft.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub icao24: String,
    pub callsign: String,
    pub records: Vec<AdsbRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn start_time(&self) -> Option<i64> {
        self.records.first().map(|r| r.timestamp)
    }

    /// Checks the emitted-trajectory invariants: one aircraft, at least two
    /// records, non-decreasing time (strictly increasing when `strict`).
    pub fn check(&self, strict: bool) -> Result<(), String> {
        if self.records.len() < 2 {
            return Err(format!(
                "{} has {} records",
                self.icao24,
                self.records.len()
            ));
        }
        if let Some(r) = self.records.iter().find(|r| r.icao24 != self.icao24) {
            return Err(format!(
                "record of {} inside trajectory {}",
                r.icao24, self.icao24
            ));
        }
        let ordered = self.records.windows(2).all(|w| {
            if strict {
                w[0].timestamp < w[1].timestamp
            } else {
                w[0].timestamp <= w[1].timestamp
            }
        });
        if !ordered {
            return Err(format!("{} is not time-ordered", self.icao24));
        }
        Ok(())
    }
}
