//! Matrix exchange format: a `rows,cols` header line followed by one
//! comma-separated line per row. Values are written with enough digits
//! to round-trip f64 exactly.

use crate::CliError;
use bcs_core::DenseMatrix;
use std::io::Write;
use std::path::Path;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn parse_err(path: &Path, line: usize, message: String) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        line,
        message,
    }
}

pub fn emit_matrix_csv(m: &DenseMatrix, path: &Path) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut fallible = || -> std::io::Result<()> {
        writeln!(w, "{},{}", m.rows(), m.cols())?;
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if j > 0 {
                    write!(w, ",")?;
                }
                // 17 significant digits: lossless for f64
                write!(w, "{:.16e}", m.get(i, j))?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    fallible().map_err(|e| io_err(path, e))
}

pub fn load_matrix_csv(path: &Path) -> Result<DenseMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(parse_err(path, 1, "empty file".into()));
    };
    let dims: Vec<&str> = header.split(',').collect();
    if dims.len() != 2 {
        return Err(parse_err(path, 1, format!("expected rows,cols header, got `{header}`")));
    }
    let rows: usize = dims[0]
        .trim()
        .parse()
        .map_err(|_| parse_err(path, 1, format!("bad row count `{}`", dims[0])))?;
    let cols: usize = dims[1]
        .trim()
        .parse()
        .map_err(|_| parse_err(path, 1, format!("bad column count `{}`", dims[1])))?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0usize;
    for (idx, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        seen += 1;
        if seen > rows {
            return Err(parse_err(path, idx + 1, format!("more than {rows} data rows")));
        }
        let mut count = 0usize;
        for piece in line.split(',') {
            let v: f64 = piece.trim().parse().map_err(|_| {
                parse_err(path, idx + 1, format!("bad number `{}`", piece.trim()))
            })?;
            if !v.is_finite() {
                return Err(parse_err(path, idx + 1, format!("non-finite value `{v}`")));
            }
            data.push(v);
            count += 1;
        }
        if count != cols {
            return Err(parse_err(
                path,
                idx + 1,
                format!("expected {cols} values, found {count}"),
            ));
        }
    }
    if seen != rows {
        return Err(parse_err(path, 1, format!("header promises {rows} rows, found {seen}")));
    }
    DenseMatrix::from_row_major(rows, cols, &data).map_err(CliError::Solver)
}
