//! File formats: dense matrices and coefficient triplets as CSV, grayscale
//! images as PGM (binary `P5` and plain `P2`, maxval 255).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::image::GrayImage;
use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SparseCoeffMatrix};

/// Reads a headerless CSV matrix, one row per line.
pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_csv(&text)
}

pub fn parse_matrix_csv(bytes: &[u8]) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if let Some(c) = cols {
            if record.len() != c {
                return Err(Error::Parse {
                    line,
                    column: record.len().min(c) + 1,
                    message: format!("expected {c} fields, found {}", record.len()),
                });
            }
        }
        cols = Some(record.len());
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                column: k + 1,
                message: format!("invalid number {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    column: k + 1,
                    message: "non-finite value".into(),
                });
            }
            data.push(v);
        }
        rows += 1;
    }
    DenseMatrix::new(rows, cols.unwrap_or(0), data)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

/// Formats a value with 17 significant digits, enough to round-trip any f64.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn matrix_csv_string(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format_f64(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn store_matrix_csv(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), matrix_csv_string(m).as_bytes())
}

/// Writes coefficients as `row,col,value` lines under a header, column-major.
pub fn store_triplets_csv(a: &SparseCoeffMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "row,col,value").map_err(io)?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{i},{j},{}", format_f64(v)).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_triplets_csv(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    budget: usize,
) -> Result<SparseCoeffMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_error)?;
    let mut trip = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize| {
            record.get(k).ok_or_else(|| Error::Parse {
                line,
                column: k + 1,
                message: "missing field".into(),
            })
        };
        let bad = |k: usize| Error::Parse {
            line,
            column: k + 1,
            message: "invalid number".into(),
        };
        let i: usize = field(0)?.parse().map_err(|_| bad(0))?;
        let j: usize = field(1)?.parse().map_err(|_| bad(1))?;
        let v: f64 = field(2)?.parse().map_err(|_| bad(2))?;
        trip.push((i, j, v));
    }
    SparseCoeffMatrix::from_triplets(rows, cols, budget, trip)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    /// Binary `P5`.
    Binary,
    /// Plain-text `P2`.
    Plain,
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

/// Writes binary `P5`.
///
/// With `clip_and_round` values are clamped to `[0, 255]`; otherwise any
/// value outside that range is an error. Either way values are rounded
/// half-up to integers.
pub fn store_pgm(img: &GrayImage, path: impl AsRef<Path>, clip_and_round: bool) -> Result<()> {
    let bytes = encode_pgm(img, PgmFormat::Binary, clip_and_round)?;
    write_file(path.as_ref(), &bytes)
}

pub fn encode_pgm(img: &GrayImage, format: PgmFormat, clip_and_round: bool) -> Result<Vec<u8>> {
    let (h, w) = img.dims();
    let mut levels = Vec::with_capacity(h * w);
    for (idx, &v) in img.pixels().iter().enumerate() {
        let v = if clip_and_round {
            v.clamp(0.0, 255.0)
        } else if !(0.0..=255.0).contains(&v) {
            return Err(Error::OutOfRange {
                row: idx / w,
                col: idx % w,
                value: v,
            });
        } else {
            v
        };
        levels.push((v + 0.5).floor().min(255.0) as u8);
    }
    let mut out = Vec::with_capacity(h * w * 4 + 32);
    match format {
        PgmFormat::Binary => {
            out.extend_from_slice(format!("P5\n{w} {h}\n255\n").as_bytes());
            out.extend_from_slice(&levels);
        }
        PgmFormat::Plain => {
            out.extend_from_slice(format!("P2\n{w} {h}\n255\n").as_bytes());
            for row in levels.chunks(w.max(1)) {
                let line: Vec<String> = row.iter().map(u8::to_string).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    Ok(out)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    let magic =
        next_token(bytes, &mut pos).ok_or_else(|| Error::UnsupportedFormat("empty file".into()))?;
    let plain = match magic.as_slice() {
        b"P5" => false,
        b"P2" => true,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "magic {:?}, expected P5 or P2",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let mut header = [0usize; 3];
    for (k, slot) in header.iter_mut().enumerate() {
        let tok = next_token(bytes, &mut pos)
            .ok_or_else(|| Error::UnsupportedFormat("truncated header".into()))?;
        *slot = std::str::from_utf8(&tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::UnsupportedFormat(format!("bad header field {k}")))?;
    }
    let [w, h, maxval] = header;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "maxval {maxval}, only 255 is supported"
        )));
    }
    let mut pixels = Vec::with_capacity(w * h);
    if plain {
        for _ in 0..w * h {
            let tok = next_token(bytes, &mut pos)
                .ok_or_else(|| Error::UnsupportedFormat("truncated raster".into()))?;
            let v: u32 = std::str::from_utf8(&tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .filter(|v| *v <= 255)
                .ok_or_else(|| Error::UnsupportedFormat("bad raster value".into()))?;
            pixels.push(v as f64);
        }
    } else {
        // exactly one whitespace byte separates maxval from the raster
        pos += 1;
        let raster = bytes
            .get(pos..pos + w * h)
            .ok_or_else(|| Error::UnsupportedFormat("truncated raster".into()))?;
        pixels.extend(raster.iter().map(|&b| b as f64));
    }
    GrayImage::new(h, w, pixels)
}

/// Next whitespace-delimited token, skipping `#` comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| bytes[start..*pos].to_vec())
}
