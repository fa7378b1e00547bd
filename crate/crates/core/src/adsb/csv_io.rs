use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::AdsbRecord;
use crate::error::{Error, Result};

/// Exact header of the ADS-B CSV schema.
pub const CSV_HEADER: [&str; 10] = [
    "time",
    "icao24",
    "lat",
    "lon",
    "baroaltitude",
    "velocity",
    "heading",
    "vertrate",
    "callsign",
    "hour",
];

/// A malformed row. `line_no` is 1-based and counts the header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reject {
    pub line_no: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParseOutcome {
    pub records: Vec<AdsbRecord>,
    pub rejects: Vec<Reject>,
}

pub fn parse_csv(path: impl AsRef<Path>) -> Result<ParseOutcome> {
    parse_csv_reader(File::open(path)?)
}

pub fn parse_csv_reader<R: Read>(reader: R) -> Result<ParseOutcome> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut cols = [0usize; 10];
    for (slot, name) in cols.iter_mut().zip(CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(name.to_string()))?;
    }

    let mut out = ParseOutcome::default();
    for row in rdr.records() {
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                let line_no = e.position().map(|p| p.line()).unwrap_or(0);
                out.rejects.push(Reject {
                    line_no,
                    reason: format!("unreadable row: {e}"),
                });
                continue;
            }
        };
        let line_no = row.position().map(|p| p.line()).unwrap_or(0);
        let fields: Vec<&str> = cols.iter().map(|&i| row.get(i).unwrap_or("")).collect();
        match parse_fields(&fields, row.len(), headers.len()) {
            Ok(rec) => match rec.violation() {
                None => out.records.push(rec),
                Some(reason) => out.rejects.push(Reject { line_no, reason }),
            },
            Err(reason) => out.rejects.push(Reject { line_no, reason }),
        }
    }
    Ok(out)
}

fn parse_fields(f: &[&str], got: usize, want: usize) -> std::result::Result<AdsbRecord, String> {
    if got != want {
        return Err(format!("expected {want} fields, found {got}"));
    }
    fn int(name: &str, s: &str) -> std::result::Result<i64, String> {
        let s = s.trim();
        if s.is_empty() {
            return Err(format!("missing value for {name}"));
        }
        s.parse::<i64>()
            .map_err(|_| format!("{name} `{s}` is not an integer"))
    }
    fn real(name: &str, s: &str) -> std::result::Result<f64, String> {
        let s = s.trim();
        if s.is_empty() {
            return Err(format!("missing value for {name}"));
        }
        s.parse::<f64>()
            .map_err(|_| format!("{name} `{s}` is not a number"))
    }
    Ok(AdsbRecord {
        timestamp: int("time", f[0])?,
        icao24: f[1].trim().to_ascii_lowercase(),
        lat: real("lat", f[2])?,
        lon: real("lon", f[3])?,
        altitude: real("baroaltitude", f[4])?,
        velocity: real("velocity", f[5])?,
        heading: real("heading", f[6])?,
        vertical_rate: real("vertrate", f[7])?,
        callsign: f[8].trim().to_string(),
        hour: int("hour", f[9])?,
    })
}

/// Writes records under [`CSV_HEADER`]. Reals use the shortest
/// representation that parses back to the same bits.
pub fn write_csv<W: Write>(records: &[AdsbRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.timestamp.to_string(),
            r.icao24.clone(),
            r.lat.to_string(),
            r.lon.to_string(),
            r.altitude.to_string(),
            r.velocity.to_string(),
            r.heading.to_string(),
            r.vertical_rate.to_string(),
            r.callsign.clone(),
            r.hour.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `line_no<TAB>reason`, one per line.
pub fn write_rejects<W: Write>(rejects: &[Reject], mut writer: W) -> Result<()> {
    for r in rejects {
        writeln!(
            writer,
            "{}\t{}",
            r.line_no,
            r.reason.replace(['\t', '\n'], " ")
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "time,icao24,lat,lon,baroaltitude,velocity,heading,vertrate,callsign,hour\n";

    #[test]
    fn table_row_parses() {
        let text = format!(
            "{HEADER}1478874138,aaa83f,33.79832,-84.3711,10325.5,221.5576,348.4813,-0.32512,EJA786  ,1478872800\n"
        );
        let out = parse_csv_reader(text.as_bytes()).unwrap();
        assert!(out.rejects.is_empty(), "{:?}", out.rejects);
        let r = &out.records[0];
        assert_eq!(r.timestamp, 1478874138);
        assert_eq!(r.icao24, "aaa83f");
        assert_eq!(r.lat, 33.79832);
        assert_eq!(r.velocity, 221.5576);
        assert_eq!(r.heading, 348.4813);
        assert_eq!(r.vertical_rate, -0.32512);
        assert_eq!(r.callsign, "EJA786");
        assert_eq!(r.hour, 1478872800);
    }

    #[test]
    fn header_only_is_empty() {
        let out = parse_csv_reader(HEADER.as_bytes()).unwrap();
        assert!(out.records.is_empty() && out.rejects.is_empty());
    }

    #[test]
    fn bad_rows_are_reported_not_dropped() {
        let text = format!(
            "{HEADER}\
             1478874138,aaa83f,95.0,-84.3,1000,200,10,0,X,1478872800\n\
             1478874138,aaa83f,33.0,-84.3,,200,10,0,X,1478872800\n\
             1478874138,aaa83f,33.0\n\
             1478874138,zzzzzz,33.0,-84.3,1000,200,10,0,X,1478872800\n\
             1478874139,aaa83f,33.0,-84.3,1000,200,10,0,X,1478872800\n"
        );
        let out = parse_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(out.records.len(), 1);
        let lines: Vec<u64> = out.rejects.iter().map(|r| r.line_no).collect();
        assert_eq!(lines, vec![2, 3, 4, 5]);
        assert!(out.rejects[0].reason.contains("lat 95"));
        assert!(out.rejects[1]
            .reason
            .contains("missing value for baroaltitude"));
        assert!(out.rejects[2].reason.contains("fields"));
        assert!(out.rejects[3].reason.contains("icao24"));

        let mut buf = Vec::new();
        write_rejects(&out.rejects, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("2\tlat 95"));
    }

    #[test]
    fn missing_column_is_schema_error() {
        let text = "time,icao24,lat,lon,velocity,heading,vertrate,callsign,hour\n";
        match parse_csv_reader(text.as_bytes()) {
            Err(Error::Schema(col)) => assert_eq!(col, "baroaltitude"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            parse_csv("/nonexistent/adsb.csv"),
            Err(Error::Io(_))
        ));
    }
}
