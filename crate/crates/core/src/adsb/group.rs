use std::collections::BTreeMap;

use super::{AdsbRecord, Trajectory};

/// Default split threshold between consecutive reports of one aircraft.
pub const DEFAULT_GAP_THRESHOLD_S: i64 = 900;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroupOutcome {
    pub trajectories: Vec<Trajectory>,
    /// Records of segments too short to form a trajectory.
    pub discarded: Vec<AdsbRecord>,
    /// Number of discarded segments.
    pub discarded_segments: usize,
}

/// Partitions records by `icao24`, orders each partition by time and splits
/// it wherever consecutive reports are more than `gap_threshold_s` apart.
///
/// Output is ordered by `icao24`, then time. Equal timestamps keep input order.
pub fn group_into_trajectories(records: Vec<AdsbRecord>, gap_threshold_s: i64) -> GroupOutcome {
    let mut by_aircraft: BTreeMap<String, Vec<AdsbRecord>> = BTreeMap::new();
    for r in records {
        by_aircraft.entry(r.icao24.clone()).or_default().push(r);
    }

    let mut out = GroupOutcome::default();
    for (icao24, mut recs) in by_aircraft {
        recs.sort_by_key(|r| r.timestamp);
        let mut segment: Vec<AdsbRecord> = Vec::new();
        for r in recs {
            if let Some(last) = segment.last() {
                if r.timestamp - last.timestamp > gap_threshold_s {
                    flush(&icao24, std::mem::take(&mut segment), &mut out);
                }
            }
            segment.push(r);
        }
        flush(&icao24, segment, &mut out);
    }
    out
}

fn flush(icao24: &str, segment: Vec<AdsbRecord>, out: &mut GroupOutcome) {
    if segment.is_empty() {
        return;
    }
    if segment.len() < 2 {
        out.discarded_segments += 1;
        out.discarded.extend(segment);
        return;
    }
    let callsign = segment
        .iter()
        .find(|r| !r.callsign.is_empty())
        .map(|r| r.callsign.clone())
        .unwrap_or_default();
    out.trajectories.push(Trajectory {
        icao24: icao24.to_string(),
        callsign,
        records: segment,
    });
}
