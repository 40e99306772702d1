//! CSV exchange formats for gain and noise calibration points.

use std::io::{Read, Write};

use super::{AnalysisError, GainPoint, NoisePoint, Result};

fn io_err(e: impl std::fmt::Display) -> AnalysisError {
    AnalysisError::Io(e.to_string())
}

fn read_rows<T: serde::de::DeserializeOwned>(input: impl Read) -> Result<Vec<T>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input)
        .deserialize()
        .map(|r| r.map_err(io_err))
        .collect()
}

fn write_rows<T: serde::Serialize>(out: impl Write, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads `pump_w,gain` rows.
pub fn read_gain_points(input: impl Read) -> Result<Vec<GainPoint>> {
    read_rows(input)
}

pub fn write_gain_points(out: impl Write, points: &[GainPoint]) -> Result<()> {
    write_rows(out, points)
}

/// Reads `lo_mw,noise_dbm` rows.
pub fn read_noise_points(input: impl Read) -> Result<Vec<NoisePoint>> {
    read_rows(input)
}

pub fn write_noise_points(out: impl Write, points: &[NoisePoint]) -> Result<()> {
    write_rows(out, points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_csv_schema() {
        let pts = [GainPoint { pump_w: 0.05, gain: 1.9 }];
        let mut buf = Vec::new();
        write_gain_points(&mut buf, &pts).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "pump_w,gain\n0.05,1.9\n");
        assert_eq!(read_gain_points(buf.as_slice()).unwrap(), pts);
    }

    #[test]
    fn noise_csv_schema() {
        let text = "lo_mw, noise_dbm\n0.0, -70.75\n2.5,-65.97\n";
        let pts = read_noise_points(text.as_bytes()).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1], NoisePoint { lo_mw: 2.5, noise_dbm: -65.97 });
        let mut buf = Vec::new();
        write_noise_points(&mut buf, &pts).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("lo_mw,noise_dbm\n"));
    }

    #[test]
    fn malformed_rows_are_io_errors() {
        let text = "pump_w,gain\n0.1,abc\n";
        assert!(matches!(read_gain_points(text.as_bytes()), Err(AnalysisError::Io(_))));
    }
}
