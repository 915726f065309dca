//! Matrix Market coordinate files (`real`/`integer`, `general`/`symmetric`).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::io::IoError;
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
}

/// Parses Matrix Market text. Symmetric files are expanded to both triangles.
pub fn parse_matrix_market(text: &str) -> Result<SparseMatrix, String> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or("empty file")?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(format!("line 1: bad header '{header}'"));
    }
    if tokens[2] != "coordinate" {
        return Err(format!("line 1: unsupported format '{}'", tokens[2]));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(format!("line 1: unsupported field '{}'", tokens[3]));
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(format!("line 1: unsupported symmetry '{other}'")),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut trip = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let ctx = |msg: &str| format!("line {}: {msg}", lineno + 1);
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(ctx("expected 'rows cols nnz'"));
                }
                let parse = |s: &str| s.parse::<usize>().map_err(|_| ctx("bad size entry"));
                size = Some((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
            }
            Some((nr, nc, _)) => {
                if fields.len() != 3 {
                    return Err(ctx("expected 'row col value'"));
                }
                let r: usize = fields[0].parse().map_err(|_| ctx("bad row index"))?;
                let c: usize = fields[1].parse().map_err(|_| ctx("bad column index"))?;
                let v: f64 = fields[2].parse().map_err(|_| ctx("bad value"))?;
                if r == 0 || c == 0 || r > nr || c > nc {
                    return Err(ctx(&format!("index ({r}, {c}) outside {nr}x{nc}")));
                }
                if !v.is_finite() {
                    return Err(ctx("non-finite value"));
                }
                trip.push((r - 1, c - 1, v));
                if symmetry == Symmetry::Symmetric && r != c {
                    trip.push((c - 1, r - 1, v));
                }
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or("missing size line")?;
    let stored = match symmetry {
        Symmetry::General => trip.len(),
        Symmetry::Symmetric => trip.iter().filter(|(r, c, _)| r >= c).count(),
    };
    if stored != nnz {
        return Err(format!("declared {nnz} entries, found {stored}"));
    }
    Ok(SparseMatrix::from_triplets(nr, nc, trip))
}

/// Formats a matrix. With [`Symmetry::Symmetric`] only the lower triangle is
/// written; the caller is responsible for the matrix actually being symmetric.
pub fn format_matrix_market(m: &SparseMatrix, symmetry: Symmetry) -> String {
    let entries: Vec<(usize, usize, f64)> = match symmetry {
        Symmetry::General => m.triplets().collect(),
        Symmetry::Symmetric => m.triplets().filter(|(r, c, _)| r >= c).collect(),
    };
    let kind = match symmetry {
        Symmetry::General => "general",
        Symmetry::Symmetric => "symmetric",
    };
    let mut out = format!("%%MatrixMarket matrix coordinate real {kind}\n");
    let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), entries.len());
    for (r, c, v) in entries {
        // `{:?}` gives the shortest representation that round-trips exactly
        let _ = writeln!(out, "{} {} {:?}", r + 1, c + 1, v);
    }
    out
}

pub fn read_matrix_market(path: &Path) -> Result<SparseMatrix, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::Read {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_matrix_market(&text).map_err(|message| IoError::MatrixMarket {
        path: path.to_path_buf(),
        message,
    })
}

/// Writes symmetric storage when the matrix is exactly symmetric.
pub fn write_matrix_market(path: &Path, m: &SparseMatrix) -> Result<(), IoError> {
    let symmetry = if m.is_square() && m.symmetry_defect() == 0.0 {
        Symmetry::Symmetric
    } else {
        Symmetry::General
    };
    crate::io::write_atomic(path, format_matrix_market(m, symmetry).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_file_is_expanded() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 2\n1 1 2.0\n2 1 -1\n";
        let m = parse_matrix_market(text).unwrap();
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn rejects_out_of_range_and_count_mismatch() {
        let bad = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        assert!(parse_matrix_market(bad).unwrap_err().contains("line 3"));
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
        assert!(parse_matrix_market(short).is_err());
        let array = "%%MatrixMarket matrix array real general\n1 1\n1.0\n";
        assert!(parse_matrix_market(array).is_err());
    }

    proptest! {
        #[test]
        fn format_parse_roundtrip_is_exact(
            entries in proptest::collection::vec((0usize..6, 0usize..4, -1e6f64..1e6), 0..20)
        ) {
            let m = SparseMatrix::from_triplets(6, 4, entries);
            let back = parse_matrix_market(&format_matrix_market(&m, Symmetry::General)).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
