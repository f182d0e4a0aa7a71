//! Reading and writing representation dumps.
//!
//! Two formats are understood:
//!
//! * NPY version 1.0, C order, little-endian `<f4` or `<f8`, one- or
//!   two-dimensional. One-dimensional arrays load as a single column.
//! * Headerless CSV: one row per line, comma-separated decimal literals.
//!
//! The format is detected from the first bytes of the file, not its name.
//! Every value must be finite; rows with NaN or infinity are rejected.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

/// The npy magic string.
pub const NPY_MAGIC: [u8; 6] = *b"\x93NUMPY";

/// Element type of a stored NPY array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F4,
    #[default]
    F8,
}

impl Dtype {
    fn descr(self) -> &'static str {
        match self {
            Dtype::F4 => "<f4",
            Dtype::F8 => "<f8",
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F4 => 4,
            Dtype::F8 => 8,
        }
    }
}

/// Loads a dump, checking the column count when `expected_dims` is given.
pub fn load_dump(path: &Path, expected_dims: Option<usize>) -> Result<RealMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let label = path.display().to_string();
    let m = if bytes.starts_with(&NPY_MAGIC) {
        parse_npy(&bytes, &label)?
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|_| Error::Parse {
            path: label.clone(),
            reason: "not an NPY file and not UTF-8 text".into(),
        })?;
        parse_csv(text, &label)?
    };
    if let Some(d) = expected_dims {
        if m.cols() != d {
            return Err(Error::ShapeMismatch {
                path: label,
                reason: format!("expected {d} columns, found {}", m.cols()),
            });
        }
    }
    Ok(m)
}

/// Writes `m` as an NPY v1.0 file.
pub fn store_dump(path: &Path, m: &RealMatrix, dtype: Dtype) -> Result<()> {
    let bytes = encode_npy(m, dtype);
    write_file(path, &bytes)
}

/// Writes `m` as headerless CSV using shortest round-trip float literals.
pub fn store_csv(path: &Path, m: &RealMatrix) -> Result<()> {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Loads a label column: integral values in `[0, class_count)`.
pub fn load_labels(path: &Path, class_count: usize) -> Result<Vec<usize>> {
    let m = load_dump(path, None)?;
    let label = path.display().to_string();
    if m.cols() != 1 {
        return Err(Error::ShapeMismatch {
            path: label,
            reason: format!("label file must be one column, found {}", m.cols()),
        });
    }
    m.as_slice()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.fract() != 0.0 || v < 0.0 || v >= class_count as f64 {
                Err(Error::Parse {
                    path: label.clone(),
                    reason: format!("row {i}: label {v} is not a class index in [0, {class_count})"),
                })
            } else {
                Ok(v as usize)
            }
        })
        .collect()
}

/// Stores labels as a one-dimensional `<f8` NPY array.
pub fn store_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let values: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let bytes = encode_npy_shaped(&values, &[values.len()], Dtype::F8);
    write_file(path, &bytes)
}

pub fn encode_npy(m: &RealMatrix, dtype: Dtype) -> Vec<u8> {
    encode_npy_shaped(m.as_slice(), &[m.rows(), m.cols()], dtype)
}

fn encode_npy_shaped(values: &[f64], shape: &[usize], dtype: Dtype) -> Vec<u8> {
    let shape_str = match shape {
        [n] => format!("({n},)"),
        dims => format!(
            "({})",
            dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        dtype.descr(),
        shape_str
    );
    // magic(6) + version(2) + len(2) + header + '\n' is padded to 64 bytes
    let unpadded = 10 + header.len() + 1;
    let pad = (64 - unpadded % 64) % 64;
    header.extend(std::iter::repeat_n(' ', pad));
    header.push('\n');

    let mut out = Vec::with_capacity(10 + header.len() + values.len() * dtype.width());
    out.extend_from_slice(&NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for &v in values {
        match dtype {
            Dtype::F4 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Dtype::F8 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    out
}

pub fn parse_npy(bytes: &[u8], path: &str) -> Result<RealMatrix> {
    let malformed = |reason: &str| Error::MalformedHeader {
        path: path.to_string(),
        reason: reason.to_string(),
    };
    if bytes.len() < 10 || !bytes.starts_with(&NPY_MAGIC) {
        return Err(malformed("missing NPY magic"));
    }
    if bytes[6..8] != [1, 0] {
        return Err(malformed(&format!("unsupported NPY version {}.{}", bytes[6], bytes[7])));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let header_end = 10 + header_len;
    if bytes.len() < header_end {
        return Err(malformed("header length exceeds file size"));
    }
    let header = std::str::from_utf8(&bytes[10..header_end]).map_err(|_| malformed("header is not valid text"))?;
    let dict = HeaderDict::parse(header).map_err(|r| malformed(&r))?;

    let dtype = match dict.descr.as_str() {
        "<f4" => Dtype::F4,
        "<f8" => Dtype::F8,
        other => {
            return Err(Error::UnsupportedDtype {
                path: path.to_string(),
                descr: other.to_string(),
            })
        }
    };
    if dict.fortran_order {
        return Err(malformed("fortran_order arrays are not supported"));
    }
    let (rows, cols) = match dict.shape.as_slice() {
        [n] => (*n, 1),
        [r, c] => (*r, *c),
        other => {
            return Err(Error::ShapeMismatch {
                path: path.to_string(),
                reason: format!("only 1-D or 2-D arrays are supported, shape has {} dims", other.len()),
            })
        }
    };
    let payload = &bytes[header_end..];
    let count = rows.checked_mul(cols).ok_or_else(|| malformed("shape overflows"))?;
    if payload.len() != count * dtype.width() {
        return Err(Error::ShapeMismatch {
            path: path.to_string(),
            reason: format!(
                "shape ({rows}, {cols}) needs {} payload bytes, found {}",
                count * dtype.width(),
                payload.len()
            ),
        });
    }
    let values: Vec<f64> = match dtype {
        Dtype::F4 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        Dtype::F8 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
    };
    finite_matrix(rows, cols, values, path)
}

fn finite_matrix(rows: usize, cols: usize, values: Vec<f64>, path: &str) -> Result<RealMatrix> {
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "{path}: row {} column {} is {}",
            pos / cols.max(1),
            pos % cols.max(1),
            values[pos]
        )));
    }
    RealMatrix::new(rows, cols, values)
}

pub fn parse_csv(text: &str, path: &str) -> Result<RealMatrix> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut n = 0;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: path.to_string(),
                reason: format!("line {}: {:?} is not a number", lineno + 1, field.trim()),
            })?;
            values.push(v);
            n += 1;
        }
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err(Error::ShapeMismatch {
                    path: path.to_string(),
                    reason: format!("line {} has {n} fields, expected {c}", lineno + 1),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    finite_matrix(rows, cols.unwrap_or(0), values, path)
}

struct HeaderDict {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

impl HeaderDict {
    fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut p = DictParser {
            s: text.as_bytes(),
            pos: 0,
        };
        let mut descr = None;
        let mut fortran = None;
        let mut shape = None;
        p.ws();
        p.expect(b'{')?;
        loop {
            p.ws();
            if p.eat(b'}') {
                break;
            }
            let key = p.string()?;
            p.ws();
            p.expect(b':')?;
            p.ws();
            match key.as_str() {
                "descr" => descr = Some(p.string()?),
                "fortran_order" => fortran = Some(p.boolean()?),
                "shape" => shape = Some(p.tuple()?),
                other => return Err(format!("unexpected key {other:?}")),
            }
            p.ws();
            if !p.eat(b',') {
                p.ws();
                p.expect(b'}')?;
                break;
            }
        }
        if !text[p.pos..].trim().is_empty() {
            return Err("trailing characters after header dict".into());
        }
        Ok(Self {
            descr: descr.ok_or("missing 'descr'")?,
            fortran_order: fortran.ok_or("missing 'fortran_order'")?,
            shape: shape.ok_or("missing 'shape'")?,
        })
    }
}

struct DictParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl DictParser<'_> {
    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> std::result::Result<(), String> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(format!("expected {:?} at byte {}", c as char, self.pos))
        }
    }

    fn string(&mut self) -> std::result::Result<String, String> {
        let quote = match self.s.get(self.pos) {
            Some(&q @ (b'\'' | b'"')) => q,
            _ => return Err(format!("expected quoted string at byte {}", self.pos)),
        };
        self.pos += 1;
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos] != quote {
            self.pos += 1;
        }
        if self.pos == self.s.len() {
            return Err("unterminated string".into());
        }
        let out = String::from_utf8_lossy(&self.s[start..self.pos]).into_owned();
        self.pos += 1;
        Ok(out)
    }

    fn boolean(&mut self) -> std::result::Result<bool, String> {
        let rest = &self.s[self.pos..];
        if rest.starts_with(b"True") {
            self.pos += 4;
            Ok(true)
        } else if rest.starts_with(b"False") {
            self.pos += 5;
            Ok(false)
        } else {
            Err(format!("expected True or False at byte {}", self.pos))
        }
    }

    fn tuple(&mut self) -> std::result::Result<Vec<usize>, String> {
        self.expect(b'(')?;
        let mut dims = Vec::new();
        loop {
            self.ws();
            if self.eat(b')') {
                return Ok(dims);
            }
            let start = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(format!("expected integer in shape at byte {}", self.pos));
            }
            let digits = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii digits");
            dims.push(digits.parse().map_err(|_| "shape dimension overflows".to_string())?);
            self.ws();
            if !self.eat(b',') {
                self.ws();
                self.expect(b')')?;
                return Ok(dims);
            }
        }
    }
}
