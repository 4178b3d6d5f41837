//! CSV ingestion and emission.
//!
//! Input is comma-delimited with `.` as the decimal point. The first record
//! is a header iff none of its cells parses as a number. Blank lines are
//! skipped; row numbers in errors count data rows from 1.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::margins::Sample;

pub fn load_csv(path: impl AsRef<Path>) -> Result<Sample> {
    read_csv(File::open(path)?)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Sample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut names: Option<Vec<String>> = None;
    let mut values = Vec::new();
    let mut d = 0;
    let mut n = 0;
    let mut first = true;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Csv {
            row: n + 1,
            column: 1,
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if first {
            first = false;
            d = record.len();
            if record.iter().all(|c| c.parse::<f64>().is_err()) {
                names = Some(record.iter().map(str::to_owned).collect());
                continue;
            }
        }
        n += 1;
        if record.len() != d {
            return Err(Error::Csv {
                row: n,
                column: record.len().min(d) + 1,
                message: format!("expected {d} fields, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let x: f64 = cell.parse().map_err(|_| Error::Csv {
                row: n,
                column: j + 1,
                message: format!("cannot parse {cell:?} as a number"),
            })?;
            if !x.is_finite() {
                return Err(Error::Csv {
                    row: n,
                    column: j + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            values.push(x);
        }
    }
    if d == 0 {
        return Err(Error::InsufficientData("CSV input is empty".into()));
    }
    let sample = Sample::from_row_major(n, d, values)?;
    match names {
        Some(names) => sample.with_column_names(names),
        None => Ok(sample),
    }
}

/// Writes `sample` with a header row (its column names or `col1..cold`).
pub fn write_csv<W: Write>(sample: &Sample, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(sample.names_or_default()).map_err(csv_err)?;
    for row in sample.rows() {
        w.write_record(row.iter().map(|x| x.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(sample: &Sample, path: impl AsRef<Path>) -> Result<()> {
    write_csv(sample, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Sample> {
        read_csv(text.as_bytes())
    }

    #[test]
    fn header_and_values() {
        let s = parse("a,b\n1,2\n3,4\n").unwrap();
        assert_eq!((s.nrows(), s.ncols()), (2, 2));
        assert_eq!(s.column_names().unwrap(), ["a", "b"]);
        assert_eq!(s.values(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn no_header_gets_default_names() {
        let s = parse("1,2\n3,4").unwrap();
        assert!(s.column_names().is_none());
        assert_eq!(s.names_or_default(), ["col1", "col2"]);
    }

    #[test]
    fn blank_lines_ignored() {
        let s = parse("a,b\n1,2\n\n3,4\n\n").unwrap();
        assert_eq!(s.nrows(), 2);
    }

    #[test]
    fn bad_cell_cites_row_and_column() {
        let err = parse("x,y\n1,2\n3,4\n5,abc\n").unwrap_err();
        assert!(err.to_string().starts_with("row 3, column 2"), "{err}");
        assert!(err.is_data_error());
    }

    #[test]
    fn ragged_and_non_finite_rows_rejected() {
        assert!(parse("1,2\n3\n").is_err());
        let err = parse("1,2\n3,inf\n").unwrap_err();
        assert!(err.to_string().contains("row 2, column 2"), "{err}");
        assert!(parse("").is_err());
    }

    #[test]
    fn round_trip() {
        let s = Sample::from_rows(&[vec![1.5, -2.0], vec![0.1, 1e-300]])
            .unwrap()
            .with_column_names(vec!["p".into(), "q".into()])
            .unwrap();
        let mut buf = Vec::new();
        write_csv(&s, &mut buf).unwrap();
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), s);
    }
}
