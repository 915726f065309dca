//! CSV and JSON report writers.
//!
//! Numbers are written with Rust's shortest round-trip formatting, which is
//! locale-independent, so identical inputs give byte-identical files.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::mtx::write_matrix_market;
use super::{write_atomic, IoError};
use crate::lti::FrfSweep;
use crate::mor::{BasisMetadata, ErrorReport, ReductionBasis, ReductionMethod, SearchResult};
use crate::sparse::SparseMatrix;

const TAU: f64 = 2.0 * std::f64::consts::PI;

fn csv_error(path: &Path, e: impl std::fmt::Display) -> IoError {
    IoError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| csv_error(path, e))?;
    write_atomic(path, &bytes)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// One row per `(op, output, input)` entry.
pub fn write_error_report_csv(path: &Path, report: &ErrorReport) -> Result<(), IoError> {
    let header = [
        "op",
        "output",
        "input",
        "output_label",
        "input_label",
        "max_relative_error",
        "omega_at_max_rad_s",
        "freq_at_max_hz",
        "evaluated",
    ]
    .map(String::from);
    let rows = report.entries.iter().map(|e| {
        vec![
            e.op.to_string(),
            e.output.to_string(),
            e.input.to_string(),
            e.output_label.clone(),
            e.input_label.clone(),
            num(e.max_error),
            e.omega_at_max.map(num).unwrap_or_default(),
            e.omega_at_max.map(|w| num(w / TAU)).unwrap_or_default(),
            e.evaluated.to_string(),
        ]
    });
    write_csv(path, &header, rows)
}

/// Wide FRF table: one row per `(op, ω)`, magnitude and phase columns per
/// selected `(output, input)` entry.
///
/// With `normalize = Some(f_ref)` the frequency column holds `f / f_ref` and
/// each magnitude column is divided by that entry's peak over all points.
/// Only the written table changes.
pub fn write_sweep_csv(
    path: &Path,
    sweeps: &[FrfSweep],
    entries: &[(usize, usize)],
    normalize: Option<f64>,
) -> Result<(), IoError> {
    let Some(first) = sweeps.first() else {
        return Err(csv_error(path, "no sweeps to write"));
    };
    let mut header = vec![
        "op".to_string(),
        if normalize.is_some() { "f_normalized" } else { "omega_rad_s" }.to_string(),
    ];
    for &(i, j) in entries {
        if i >= first.n_outputs() || j >= first.n_inputs() {
            return Err(csv_error(path, format!("entry ({i}, {j}) outside the response")));
        }
        let name = format!("{}/{}", first.output_labels()[i], first.input_labels()[j]);
        header.push(format!("abs[{name}]"));
        header.push(format!("arg[{name}]"));
    }
    let peaks: Vec<f64> = entries
        .iter()
        .map(|&(i, j)| match normalize {
            Some(_) => sweeps
                .iter()
                .flat_map(|s| s.data().iter().map(move |g| g[(i, j)].norm()))
                .fold(0.0, f64::max),
            None => 1.0,
        })
        .collect();
    let mut rows = Vec::new();
    for (op, s) in sweeps.iter().enumerate() {
        for (k, g) in s.data().iter().enumerate() {
            let w = s.frequencies()[k];
            let x = match normalize {
                Some(f_ref) => w / TAU / f_ref,
                None => w,
            };
            let mut row = vec![op.to_string(), num(x)];
            for (&(i, j), &peak) in entries.iter().zip(&peaks) {
                let v = g[(i, j)];
                let mag = if peak > 0.0 { v.norm() / peak } else { v.norm() };
                row.push(num(mag));
                row.push(num(v.arg()));
            }
            rows.push(row);
        }
    }
    write_csv(path, &header, rows)
}

/// Full native order: states for BT, DOFs for the component-mode methods.
fn native_full_order(method: Option<ReductionMethod>, full_states: usize) -> usize {
    match method {
        Some(ReductionMethod::Cb | ReductionMethod::Hh) => full_states / 2,
        _ => full_states,
    }
}

/// Least passing order per subsystem and operating point, every other
/// subsystem at full order.
pub fn write_per_point_orders_csv(path: &Path, result: &SearchResult) -> Result<(), IoError> {
    let header = ["subsystem", "method", "op", "level", "order"].map(String::from);
    let rows = result.orders.iter().flat_map(|o| {
        o.per_point_levels
            .iter()
            .zip(&o.per_point_orders)
            .enumerate()
            .map(move |(op, (level, order))| {
                vec![
                    o.name.clone(),
                    o.method.map(|m| m.name().to_string()).unwrap_or_else(|| "full".into()),
                    op.to_string(),
                    level.to_string(),
                    order.to_string(),
                ]
            })
    });
    write_csv(path, &header, rows)
}

/// Final combined orders. `reduction_percent` is `100 · (1 − r / n)` with
/// both counted in first-order states.
pub fn write_final_orders_csv(path: &Path, result: &SearchResult) -> Result<(), IoError> {
    let header = [
        "subsystem",
        "method",
        "n",
        "r",
        "full_states",
        "states",
        "reduction_percent",
        "witness_order",
        "witness_op",
        "witness_error",
    ]
    .map(String::from);
    let rows = result.orders.iter().map(|o| {
        let w = o.witness.as_ref();
        vec![
            o.name.clone(),
            o.method.map(|m| m.name().to_string()).unwrap_or_else(|| "full".into()),
            native_full_order(o.method, o.full_states).to_string(),
            o.order.to_string(),
            o.full_states.to_string(),
            o.states.to_string(),
            format!("{:.1}", o.reduction_percent),
            w.map(|w| w.order.to_string()).unwrap_or_default(),
            w.map(|w| w.op.to_string()).unwrap_or_default(),
            w.map(|w| num(w.error)).unwrap_or_default(),
        ]
    });
    write_csv(path, &header, rows)
}

#[derive(Serialize)]
struct BasisSidecar<'a> {
    method: ReductionMethod,
    order: usize,
    state_order: usize,
    full_dimension: usize,
    boundary: &'a [usize],
    v: PathBuf,
    w: Option<PathBuf>,
    metadata: &'a BasisMetadata,
}

/// Writes `V` (and `W` when it differs) as Matrix Market plus a JSON
/// sidecar `<stem>.json` with the metadata. Returns the sidecar path.
pub fn write_basis(dir: &Path, stem: &str, basis: &ReductionBasis) -> Result<PathBuf, IoError> {
    let v_name = PathBuf::from(format!("{stem}_V.mtx"));
    write_matrix_market(&dir.join(&v_name), &SparseMatrix::from_dense(&basis.v, 0.0))?;
    let w_name = if basis.w != basis.v {
        let name = PathBuf::from(format!("{stem}_W.mtx"));
        write_matrix_market(&dir.join(&name), &SparseMatrix::from_dense(&basis.w, 0.0))?;
        Some(name)
    } else {
        None
    };
    let sidecar = BasisSidecar {
        method: basis.method,
        order: basis.order,
        state_order: basis.state_order(),
        full_dimension: basis.v.nrows(),
        boundary: &basis.boundary,
        v: v_name,
        w: w_name,
        metadata: &basis.metadata,
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &sidecar)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mor::EntryError;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn sweep(n: usize) -> FrfSweep {
        let freqs: Vec<f64> = (1..=n).map(|k| k as f64).collect();
        let data = freqs
            .iter()
            .map(|&w| DMatrix::from_element(1, 1, Complex64::new(1.0 / w, -0.5)))
            .collect();
        FrfSweep::new(freqs, data, vec!["u".into()], vec!["y".into()]).unwrap()
    }

    #[test]
    fn sweep_csv_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_sweep_csv(&path, &[sweep(7)], &[(0, 0)], None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 8);
        assert_eq!(lines[0], "op,omega_rad_s,abs[y/u],arg[y/u]");
        let again = dir.path().join("t.csv");
        write_sweep_csv(&again, &[sweep(7)], &[(0, 0)], None).unwrap();
        assert_eq!(text, std::fs::read_to_string(&again).unwrap());
    }

    #[test]
    fn normalized_sweep_peaks_at_one() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_sweep_csv(&path, &[sweep(5)], &[(0, 0)], Some(1.0)).unwrap();
        let mut r = csv::Reader::from_path(&path).unwrap();
        let peak = r
            .records()
            .map(|rec| rec.unwrap()[2].parse::<f64>().unwrap())
            .fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-15);
    }

    #[test]
    fn error_csv_parses_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let report = ErrorReport {
            entries: vec![EntryError {
                op: 2,
                output: 0,
                input: 1,
                output_label: "y".into(),
                input_label: "u, with comma".into(),
                max_error: 0.0625,
                omega_at_max: Some(TAU),
                evaluated: 10,
            }],
        };
        write_error_report_csv(&path, &report).unwrap();
        let mut r = csv::Reader::from_path(&path).unwrap();
        let rec = r.records().next().unwrap().unwrap();
        assert_eq!(&rec[4], "u, with comma");
        assert_eq!(rec[5].parse::<f64>().unwrap(), 0.0625);
        assert_eq!(rec[7].parse::<f64>().unwrap(), 1.0);
    }
}
