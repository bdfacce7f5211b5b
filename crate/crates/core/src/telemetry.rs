//! CSV run log. One row per control step with a fixed column order.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! export → import → export is byte-identical.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::sim::TelemetryRecord;

pub const COLUMNS: [&str; 50] = [
    "t", "x", "y", "z", "vx", "vy", "vz", "phi", "theta", "psi", "p", "q", "r", "xd", "yd", "zd", "phid", "thetad",
    "psid", "Sx", "Sy", "Sz", "Sphi", "Stheta", "Spsi", "U1", "U2", "U3", "U4", "u11", "u21", "u31", "u41", "u12",
    "u22", "u32", "u42", "f11", "f21", "f31", "f41", "f12", "f22", "f32", "f42", "Fx", "Fy", "Fz", "gated",
    "clampflag",
];

/// Number of float columns preceding the two flags.
const FLOAT_COLUMNS: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    /// `[x, y, z, vx, vy, vz, φ, θ, ψ, p, q, r]`.
    pub state: [f64; 12],
    pub reference: [f64; 6],
    pub sliding: [f64; 6],
    /// `[U1, U2, U3, U4]`.
    pub controls: [f64; 4],
    pub quad_inputs: [f64; 8],
    pub rotor_thrusts: [f64; 8],
    pub force: [f64; 3],
    pub gated: bool,
    pub clamped: bool,
}

impl From<&TelemetryRecord> for LogRow {
    fn from(r: &TelemetryRecord) -> Self {
        let mut state = [0.0; 12];
        state.copy_from_slice(r.state.to_vector().as_slice());
        Self {
            t: r.t,
            state,
            reference: r.reference.into(),
            sliding: r.sliding.into(),
            controls: [r.thrust, r.moments.x, r.moments.y, r.moments.z],
            quad_inputs: r.quad_inputs.into(),
            rotor_thrusts: r.rotor_thrusts.into(),
            force: r.force.into(),
            gated: r.gated,
            clamped: r.clamped,
        }
    }
}

impl LogRow {
    fn floats(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.t)
            .chain(self.state.iter().copied())
            .chain(self.reference.iter().copied())
            .chain(self.sliding.iter().copied())
            .chain(self.controls.iter().copied())
            .chain(self.quad_inputs.iter().copied())
            .chain(self.rotor_thrusts.iter().copied())
            .chain(self.force.iter().copied())
    }

    fn from_floats(v: &[f64; FLOAT_COLUMNS], gated: bool, clamped: bool) -> Self {
        let take = |from: usize, out: &mut [f64]| out.copy_from_slice(&v[from..from + out.len()]);
        let mut row = Self {
            t: v[0],
            state: [0.0; 12],
            reference: [0.0; 6],
            sliding: [0.0; 6],
            controls: [0.0; 4],
            quad_inputs: [0.0; 8],
            rotor_thrusts: [0.0; 8],
            force: [0.0; 3],
            gated,
            clamped,
        };
        take(1, &mut row.state);
        take(13, &mut row.reference);
        take(19, &mut row.sliding);
        take(25, &mut row.controls);
        take(29, &mut row.quad_inputs);
        take(37, &mut row.rotor_thrusts);
        take(45, &mut row.force);
        row
    }
}

pub fn write_log<W: Write>(rows: &[LogRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| SimError::MalformedLog {
        row: 0,
        message: e.to_string(),
    };
    w.write_record(COLUMNS).map_err(io)?;
    let mut fields: Vec<String> = Vec::with_capacity(COLUMNS.len());
    for row in rows {
        fields.clear();
        fields.extend(row.floats().map(|v| v.to_string()));
        fields.push(if row.gated { "1" } else { "0" }.to_string());
        fields.push(if row.clamped { "1" } else { "0" }.to_string());
        w.write_record(&fields).map_err(io)?;
    }
    w.flush().map_err(|e| SimError::MalformedLog {
        row: 0,
        message: e.to_string(),
    })
}

pub fn read_log<R: Read>(input: R) -> Result<Vec<LogRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| SimError::MalformedLog {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    for (index, expected) in COLUMNS.iter().enumerate() {
        match headers.get(index) {
            Some(found) if found == *expected => {}
            found => {
                return Err(SimError::SchemaMismatch {
                    index,
                    expected: expected.to_string(),
                    found: found.unwrap_or("<missing>").to_string(),
                })
            }
        }
    }
    if headers.len() > COLUMNS.len() {
        return Err(SimError::SchemaMismatch {
            index: COLUMNS.len(),
            expected: "<end of header>".into(),
            found: headers[COLUMNS.len()].to_string(),
        });
    }

    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| SimError::MalformedLog {
            row,
            message: e.to_string(),
        })?;
        let mut floats = [0.0; FLOAT_COLUMNS];
        for (k, slot) in floats.iter_mut().enumerate() {
            *slot = rec[k].parse().map_err(|_| SimError::MalformedLog {
                row,
                message: format!("column {} is not a number: {:?}", COLUMNS[k], &rec[k]),
            })?;
        }
        let flag = |k: usize| match &rec[k] {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(SimError::MalformedLog {
                row,
                message: format!("column {} must be 0 or 1, got {other:?}", COLUMNS[k]),
            }),
        };
        rows.push(LogRow::from_floats(&floats, flag(48)?, flag(49)?));
    }
    Ok(rows)
}

pub fn export_log(rows: &[LogRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_log(rows, std::io::BufWriter::new(file))
}

pub fn import_log(path: &Path) -> Result<Vec<LogRow>> {
    let file = File::open(path).map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_log(std::io::BufReader::new(file))
}

pub fn rows_from_records(records: &[TelemetryRecord]) -> Vec<LogRow> {
    records.iter().map(LogRow::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LogRow {
        let mut row = LogRow::from_floats(&[0.0; FLOAT_COLUMNS], true, false);
        row.t = 0.001;
        row.state[2] = 1.0 / 3.0;
        row.controls[0] = 34.335;
        row.sliding[5] = -0.0;
        row.force[0] = 1e-300;
        row
    }

    #[test]
    fn header_order() {
        let mut buf = Vec::new();
        write_log(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), COLUMNS.join(","));
    }

    #[test]
    fn round_trip_bytes() {
        let mut a = Vec::new();
        write_log(&[sample(), sample()], &mut a).unwrap();
        let rows = read_log(a.as_slice()).unwrap();
        assert_eq!(rows[0].state[2], 1.0 / 3.0);
        assert!(rows[0].sliding[5].is_sign_negative());
        let mut b = Vec::new();
        write_log(&rows, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn renamed_column_is_reported() {
        let mut a = Vec::new();
        write_log(&[sample()], &mut a).unwrap();
        let text = String::from_utf8(a).unwrap().replacen("Sz", "S_z", 1);
        match read_log(text.as_bytes()) {
            Err(SimError::SchemaMismatch { expected, found, .. }) => {
                assert_eq!(expected, "Sz");
                assert_eq!(found, "S_z");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_flag_is_rejected() {
        let mut a = Vec::new();
        write_log(&[sample()], &mut a).unwrap();
        let text = String::from_utf8(a).unwrap();
        let text = text.trim_end().strip_suffix(",1,0").unwrap().to_string() + ",2,0\n";
        assert!(matches!(read_log(text.as_bytes()), Err(SimError::MalformedLog { row: 1, .. })));
    }
}
