use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};

const STORE_VERSION: u32 = 1;

/// Grouped trajectories as written by ingestion (JSON).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStore {
    pub version: u32,
    pub gap_threshold_s: i64,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryStore {
    pub fn new(gap_threshold_s: i64, trajectories: Vec<Trajectory>) -> Self {
        TrajectoryStore {
            version: STORE_VERSION,
            gap_threshold_s,
            trajectories,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let store: TrajectoryStore = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if store.version != STORE_VERSION {
            return Err(Error::Format(format!(
                "trajectory store version {} (expected {STORE_VERSION})",
                store.version
            )));
        }
        Ok(store)
    }
}
