use std::path::PathBuf;

use proptest::prelude::*;

use tandemlift::telemetry::{export_log, import_log, read_log, rows_from_records, write_log, LogRow, COLUMNS};
use tandemlift::{run_scenario, scenarios, SimError};

fn scratch(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn pulse_rows(n: usize) -> Vec<LogRow> {
    let run = run_scenario(&scenarios::pulse()).unwrap();
    rows_from_records(&run.records[..n])
}

#[test]
fn export_import_export_is_byte_identical() {
    let rows = pulse_rows(3000);
    let first = scratch("round_trip_a.csv");
    let second = scratch("round_trip_b.csv");
    export_log(&rows, &first).unwrap();
    let back = import_log(&first).unwrap();
    assert_eq!(back, rows);
    export_log(&back, &second).unwrap();
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

#[test]
fn rows_carry_record_values_in_column_order() {
    let run = run_scenario(&scenarios::pulse()).unwrap();
    let r = &run.records[2500];
    let mut buf = Vec::new();
    write_log(&[LogRow::from(r)], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let values: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, COLUMNS);
    assert_eq!(values.len(), 50);
    let col = |name: &str| values[header.iter().position(|h| *h == name).unwrap()].parse::<f64>().unwrap();
    assert_eq!(col("t"), r.t);
    assert_eq!(col("x"), r.state.position.x);
    assert_eq!(col("theta"), r.state.attitude.theta);
    assert_eq!(col("r"), r.state.body_rates.z);
    assert_eq!(col("zd"), r.reference[2]);
    assert_eq!(col("Sz"), r.sliding[2]);
    assert_eq!(col("U1"), r.thrust);
    assert_eq!(col("U4"), r.moments.z);
    assert_eq!(col("u12"), r.quad_inputs[4]);
    assert_eq!(col("f42"), r.rotor_thrusts[7]);
    assert_eq!(col("Fx"), r.force.x);
    assert_eq!(col("gated"), r.gated as u8 as f64);
}

#[test]
fn empty_log_is_header_only() {
    let mut buf = Vec::new();
    write_log(&[], &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf.clone()).unwrap(), format!("{}\n", COLUMNS.join(",")));
    assert!(read_log(buf.as_slice()).unwrap().is_empty());
}

#[test]
fn missing_file_reports_path() {
    let path = scratch("does_not_exist.csv");
    match import_log(&path).unwrap_err() {
        SimError::Io { path: p, .. } => assert_eq!(p, path),
        other => panic!("{other:?}"),
    }
}

#[test]
fn dropped_column_is_a_schema_mismatch() {
    let mut buf = Vec::new();
    write_log(&pulse_rows(2), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let trimmed: String = text
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
        .collect();
    match read_log(trimmed.as_bytes()).unwrap_err() {
        SimError::SchemaMismatch { index, expected, .. } => {
            assert_eq!(index, 49);
            assert_eq!(expected, "clampflag");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn non_numeric_value_names_the_row() {
    let mut buf = Vec::new();
    write_log(&pulse_rows(3), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap().replacen("\n0.002,", "\nabc,", 1);
    assert!(matches!(read_log(text.as_bytes()).unwrap_err(), SimError::MalformedLog { row: 3, .. }));
}

fn row_strategy() -> impl Strategy<Value = LogRow> {
    let f = || prop::num::f64::NORMAL | prop::num::f64::ZERO;
    (
        f(),
        prop::array::uniform12(f()),
        prop::array::uniform6(f()),
        prop::array::uniform6(f()),
        prop::array::uniform4(f()),
        prop::array::uniform8(f()),
        prop::array::uniform8(f()),
        prop::array::uniform3(f()),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(t, state, reference, sliding, controls, quad_inputs, rotor_thrusts, force, gated, clamped)| LogRow {
            t,
            state,
            reference,
            sliding,
            controls,
            quad_inputs,
            rotor_thrusts,
            force,
            gated,
            clamped,
        })
}

proptest! {
    #[test]
    fn arbitrary_rows_round_trip_exactly(rows in prop::collection::vec(row_strategy(), 0..5)) {
        let mut buf = Vec::new();
        write_log(&rows, &mut buf).unwrap();
        let back = read_log(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &rows);
        let mut again = Vec::new();
        write_log(&back, &mut again).unwrap();
        prop_assert_eq!(again, buf);
    }
}
