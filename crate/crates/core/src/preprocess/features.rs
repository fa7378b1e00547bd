use crate::adsb::Trajectory;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Column names of [`FeatureSplit::spatial`].
pub const SPATIAL_COLUMNS: [&str; 3] = ["lat", "lon", "altitude"];
/// Column names of [`FeatureSplit::temporal`].
pub const TEMPORAL_COLUMNS: [&str; 4] = ["dt", "velocity", "heading", "vertical_rate"];

/// Per-step features of one trajectory divided into a spatial block and a
/// temporal block.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSplit {
    /// `[steps, 3]`: lat, lon, altitude.
    pub spatial: Tensor<f64>,
    /// `[steps, 4]`: seconds since previous step (0 on row 0), velocity,
    /// heading, vertical rate.
    pub temporal: Tensor<f64>,
    pub timestamps: Vec<i64>,
}

impl FeatureSplit {
    pub fn steps(&self) -> usize {
        self.timestamps.len()
    }
}

pub fn split_features(traj: &Trajectory) -> Result<FeatureSplit> {
    let recs = &traj.records;
    if recs.is_empty() {
        return Err(Error::Degenerate(format!("{} has no records", traj.icao24)));
    }
    let n = recs.len();
    let mut spatial = Vec::with_capacity(n * 3);
    let mut temporal = Vec::with_capacity(n * 4);
    for (i, r) in recs.iter().enumerate() {
        let dt = if i == 0 {
            0.0
        } else {
            (r.timestamp - recs[i - 1].timestamp) as f64
        };
        spatial.extend([r.lat, r.lon, r.altitude]);
        temporal.extend([dt, r.velocity, r.heading, r.vertical_rate]);
    }
    Ok(FeatureSplit {
        spatial: Tensor::new(vec![n, 3], spatial)?,
        temporal: Tensor::new(vec![n, 4], temporal)?,
        timestamps: recs.iter().map(|r| r.timestamp).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adsb::{hour_of, AdsbRecord};

    fn grid(n: usize, period: i64) -> Trajectory {
        let records = (0..n)
            .map(|i| {
                let ts = 1_000_000 + i as i64 * period;
                AdsbRecord {
                    timestamp: ts,
                    icao24: "abcdef".into(),
                    callsign: "C".into(),
                    lat: 33.0 + i as f64 * 1e-3,
                    lon: -84.0 - i as f64 * 2e-3,
                    altitude: 1000.0 + i as f64,
                    velocity: 200.0 + i as f64 * 0.5,
                    heading: (i as f64 * 7.0) % 360.0,
                    vertical_rate: -(i as f64),
                    hour: hour_of(ts),
                }
            })
            .collect();
        Trajectory {
            icao24: "abcdef".into(),
            callsign: "C".into(),
            records,
        }
    }

    #[test]
    fn shapes_and_dt_column() {
        let s = split_features(&grid(100, 10)).unwrap();
        assert_eq!(s.spatial.shape(), &[100, 3]);
        assert_eq!(s.temporal.shape(), &[100, 4]);
        assert_eq!(s.temporal.at2(0, 0), 0.0);
        for i in 1..100 {
            assert_eq!(s.temporal.at2(i, 0), 10.0);
        }
    }

    #[test]
    fn columns_reassemble_source() {
        let t = grid(20, 10);
        let s = split_features(&t).unwrap();
        for (i, r) in t.records.iter().enumerate() {
            let row = [
                s.spatial.at2(i, 0),
                s.spatial.at2(i, 1),
                s.spatial.at2(i, 2),
                s.temporal.at2(i, 1),
                s.temporal.at2(i, 2),
                s.temporal.at2(i, 3),
            ];
            assert_eq!(
                row,
                [
                    r.lat,
                    r.lon,
                    r.altitude,
                    r.velocity,
                    r.heading,
                    r.vertical_rate
                ]
            );
            assert_eq!(s.timestamps[i], r.timestamp);
        }
    }
}
