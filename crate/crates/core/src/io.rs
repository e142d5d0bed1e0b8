//! CSV point datasets and Matrix Market matrices.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! write followed by a read reproduces every `f64` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernels::PointDataset;
use crate::matrix::DenseMatrix;

fn parse_finite(token: &str, line: usize) -> Result<f64> {
    let value: f64 = token.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("'{token}' is not a number"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("non-finite value '{token}'"),
        });
    }
    Ok(value)
}

/// Reads comma-separated points, one per line. A first line that does not
/// parse as numbers is taken as a header.
pub fn read_csv<R: Read>(reader: R, name: &str) -> Result<PointDataset> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, record) in csv.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>> = record.iter().map(|t| parse_finite(t, line)).collect();
        match parsed {
            Ok(row) => {
                if let Some(first) = rows.first() {
                    if first.len() != row.len() {
                        return Err(Error::Parse {
                            line,
                            message: format!(
                                "expected {} fields, found {}",
                                first.len(),
                                row.len()
                            ),
                        });
                    }
                }
                rows.push(row);
            }
            Err(_) if k == 0 && record.iter().any(|t| t.parse::<f64>().is_err()) => continue,
            Err(e) => return Err(e),
        }
    }
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return Err(Error::EmptyMatrix { rows: n, cols: d });
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(PointDataset::new(
        DenseMatrix::from_row_slice(n, d, &flat)?,
        name,
    ))
}

/// [`read_csv`] on a file; the dataset is named after the file stem.
pub fn load_csv(path: impl AsRef<Path>) -> Result<PointDataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(File::open(path)?, &name)
}

pub fn write_csv<W: Write>(writer: W, data: &PointDataset) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for i in 0..data.len() {
        out.write_record(data.point(i).iter().map(|v| v.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_csv(path: impl AsRef<Path>, data: &PointDataset) -> Result<()> {
    write_csv(BufWriter::new(File::create(path)?), data)
}

#[derive(Clone, Copy, PartialEq)]
enum MmLayout {
    Array,
    Coordinate,
}

/// Reads a real or integer Matrix Market file in array or coordinate
/// layout, general or symmetric.
pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<DenseMatrix> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .ok_or(Error::EmptyMatrix { rows: 0, cols: 0 })?;
    let header = header?;
    let words: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    let bad_header = |message: String| Error::Parse { line: 1, message };
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(bad_header(format!(
            "not a Matrix Market header: '{header}'"
        )));
    }
    let layout = match words[2].as_str() {
        "array" => MmLayout::Array,
        "coordinate" => MmLayout::Coordinate,
        other => return Err(bad_header(format!("unsupported layout '{other}'"))),
    };
    if !matches!(words[3].as_str(), "real" | "integer" | "double") {
        return Err(bad_header(format!("unsupported field '{}'", words[3])));
    }
    let symmetric = match words[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(bad_header(format!("unsupported symmetry '{other}'"))),
    };

    let mut content = Vec::new();
    for (line, text) in lines {
        let text = text?;
        let trimmed = text.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        content.push((line, trimmed.to_owned()));
    }
    let mut content = content.into_iter();
    let (size_line, size) = content.next().ok_or(Error::Parse {
        line: 1,
        message: "missing size line".into(),
    })?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse {
            line: size_line,
            message: format!("bad size line '{size}'"),
        })?;
    let expected_dims = if layout == MmLayout::Array { 2 } else { 3 };
    if dims.len() != expected_dims {
        return Err(Error::Parse {
            line: size_line,
            message: format!("expected {expected_dims} integers on the size line"),
        });
    }
    let (n, m) = (dims[0], dims[1]);
    if n == 0 || m == 0 {
        return Err(Error::EmptyMatrix { rows: n, cols: m });
    }
    if symmetric && n != m {
        return Err(Error::Parse {
            line: size_line,
            message: "symmetric matrix must be square".into(),
        });
    }

    let mut data = nalgebra::DMatrix::<f64>::zeros(n, m);
    match layout {
        MmLayout::Array => {
            let positions: Vec<(usize, usize)> = if symmetric {
                (0..m).flat_map(|j| (j..n).map(move |i| (i, j))).collect()
            } else {
                (0..m).flat_map(|j| (0..n).map(move |i| (i, j))).collect()
            };
            let mut found = 0;
            for (line, text) in content {
                for token in text.split_whitespace() {
                    let &(i, j) = positions.get(found).ok_or(Error::Parse {
                        line,
                        message: "more entries than the size line declares".into(),
                    })?;
                    let v = parse_finite(token, line)?;
                    data[(i, j)] = v;
                    if symmetric {
                        data[(j, i)] = v;
                    }
                    found += 1;
                }
            }
            if found != positions.len() {
                return Err(Error::EntryCount {
                    expected: positions.len(),
                    found,
                });
            }
        }
        MmLayout::Coordinate => {
            let nnz = dims[2];
            let mut found = 0;
            for (line, text) in content {
                let fields: Vec<&str> = text.split_whitespace().collect();
                if fields.len() != 3 {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected 'row col value', got '{text}'"),
                    });
                }
                let index = |t: &str, bound: usize| -> Result<usize> {
                    match t.parse::<usize>() {
                        Ok(k) if (1..=bound).contains(&k) => Ok(k - 1),
                        _ => Err(Error::Parse {
                            line,
                            message: format!("index '{t}' outside 1..={bound}"),
                        }),
                    }
                };
                let (i, j) = (index(fields[0], n)?, index(fields[1], m)?);
                let v = parse_finite(fields[2], line)?;
                data[(i, j)] = v;
                if symmetric {
                    data[(j, i)] = v;
                }
                found += 1;
            }
            if found != nnz {
                return Err(Error::EntryCount {
                    expected: nnz,
                    found,
                });
            }
        }
    }
    DenseMatrix::new(data)
}

pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    read_matrix_market(BufReader::new(File::open(path)?))
}

/// Dense `array real general` output, column-major.
pub fn write_matrix_market<W: Write>(mut writer: W, x: &DenseMatrix) -> Result<()> {
    writeln!(writer, "%%MatrixMarket matrix array real general")?;
    writeln!(writer, "{} {}", x.rows(), x.cols())?;
    for v in x.as_slice() {
        writeln!(writer, "{v}")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_matrix_market(path: impl AsRef<Path>, x: &DenseMatrix) -> Result<()> {
    write_matrix_market(BufWriter::new(File::create(path)?), x)
}
