use crate::adsb::Trajectory;
use crate::error::{Error, Result};

/// Collapses records sharing a timestamp, keeping the first, so the output
/// is strictly increasing in time.
pub fn clean(traj: &Trajectory) -> Result<Trajectory> {
    let mut records = traj.records.clone();
    records.sort_by_key(|r| r.timestamp);
    records.dedup_by_key(|r| r.timestamp);
    if records.len() < 2 {
        return Err(Error::Degenerate(format!(
            "{} has {} distinct timestamps",
            traj.icao24,
            records.len()
        )));
    }
    Ok(Trajectory {
        icao24: traj.icao24.clone(),
        callsign: traj.callsign.clone(),
        records,
    })
}
