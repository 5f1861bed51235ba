//! Deterministic CSV and binary PPM writers.
//!
//! Numbers are written with 17 significant digits in scientific notation,
//! '.' as decimal separator and LF line endings, so equal inputs give equal
//! bytes.

use std::io::{self, BufRead, Write};

use crate::domain::{CellClass, StabilityRaster};
use crate::error::{Result, RtmError};

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Field {
    fn from(x: f64) -> Self {
        Field::Num(x)
    }
}

impl From<i64> for Field {
    fn from(x: i64) -> Self {
        Field::Int(x)
    }
}

impl From<usize> for Field {
    fn from(x: usize) -> Self {
        Field::Int(x as i64)
    }
}

impl From<u32> for Field {
    fn from(x: u32) -> Self {
        Field::Int(x as i64)
    }
}

impl From<bool> for Field {
    fn from(x: bool) -> Self {
        Field::Int(x as i64)
    }
}

impl From<&str> for Field {
    fn from(x: &str) -> Self {
        Field::Text(x.to_string())
    }
}

impl From<String> for Field {
    fn from(x: String) -> Self {
        Field::Text(x)
    }
}

/// `x` with 17 significant digits.
pub fn format_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn format_field(f: &Field) -> String {
    match f {
        Field::Num(x) => format_num(*x),
        Field::Int(i) => i.to_string(),
        Field::Text(s) => {
            if s.contains([',', '"', '\n', '\r']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.clone()
            }
        }
    }
}

/// A header and rows of fields.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Field>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(RtmError::Invalid(format!("row has {} fields, header has {}", row.len(), self.header.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.header.join(","));
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(format_field).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn write_csv<W: Write>(out: &mut W, table: &Table) -> io::Result<()> {
    out.write_all(table.to_csv().as_bytes())
}

/// RGB image, row-major from the top-left pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[u8; 3]>,
}

impl Image {
    /// Cell colours of a raster; the first row is `w_max`, the first column `psi_min`.
    pub fn from_raster(r: &StabilityRaster) -> Self {
        Self { width: r.width, height: r.height, rgb: r.cells.iter().map(|c| c.rgb()).collect() }
    }

    /// Cell classes back from the colours.
    pub fn to_cells(&self) -> Result<Vec<CellClass>> {
        self.rgb
            .iter()
            .map(|&c| CellClass::from_rgb(c).ok_or_else(|| RtmError::Invalid(format!("colour {c:?} is not a cell class"))))
            .collect()
    }
}

/// Binary P6 with maxval 255.
pub fn write_ppm<W: Write>(out: &mut W, img: &Image) -> io::Result<()> {
    write!(out, "P6\n{} {}\n255\n", img.width, img.height)?;
    let bytes: Vec<u8> = img.rgb.iter().flat_map(|p| p.iter().copied()).collect();
    out.write_all(&bytes)
}

fn header_token<R: BufRead>(r: &mut R) -> io::Result<String> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        let b = byte[0];
        if b == b'#' && tok.is_empty() {
            let mut skip = Vec::new();
            r.read_until(b'\n', &mut skip)?;
            continue;
        }
        if b.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(b);
    }
    String::from_utf8(tok).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

pub fn read_ppm<R: BufRead>(r: &mut R) -> io::Result<Image> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    if header_token(r)? != "P6" {
        return Err(bad("not a binary PPM"));
    }
    let num = |r: &mut R| -> io::Result<usize> { header_token(r)?.parse().map_err(|_| bad("bad PPM header")) };
    let width = num(r)?;
    let height = num(r)?;
    if num(r)? != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    let mut bytes = vec![0u8; width * height * 3];
    r.read_exact(&mut bytes)?;
    let rgb = bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok(Image { width, height, rgb })
}
