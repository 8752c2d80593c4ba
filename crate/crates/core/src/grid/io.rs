//! Grid function files.
//!
//! CSV layout (text, one record per line):
//!
//! ```text
//! # driftdiff grid function
//! dim,2
//! cells,32,32
//! lengths,1,1
//! <value>          (interior nodes, row-major, axis 0 slowest)
//! ```
//!
//! Binary layout (little endian): magic `DDGF`, `u32` version (1), `u32`
//! dim, `dim × u64` cells, `dim × f64` lengths, `u64` value count, then the
//! values as `f64` in the same order as the CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{BoxDomain, GridFunction};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DDGF";

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridFormat {
    Csv,
    Binary,
}

impl GridFormat {
    /// `.bin` selects the binary layout, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => GridFormat::Binary,
            _ => GridFormat::Csv,
        }
    }
}

pub fn write_grid_function(u: &GridFunction, path: &Path, format: GridFormat) -> Result<()> {
    let bytes = match format {
        GridFormat::Csv => encode_csv(u).into_bytes(),
        GridFormat::Binary => encode_binary(u),
    };
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_grid_function(path: &Path) -> Result<GridFunction> {
    let bytes = fs::read(path)?;
    let loc = path.display().to_string();
    if bytes.starts_with(MAGIC) {
        decode_binary(&bytes, &loc)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| parse_err(&loc, 0, "not UTF-8"))?;
        decode_csv(&text, &loc)
    }
}

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        location: format!("{file}:{line}"),
        message: msg.into(),
    }
}

pub(crate) fn encode_csv(u: &GridFunction) -> String {
    let d = u.domain();
    let mut s = String::with_capacity(24 * u.len() + 64);
    s.push_str("# driftdiff grid function\n");
    s.push_str(&format!("dim,{}\n", d.dim()));
    let join = |v: Vec<String>| v.join(",");
    s.push_str(&format!(
        "cells,{}\n",
        join(d.cells().iter().map(|n| n.to_string()).collect())
    ));
    s.push_str(&format!(
        "lengths,{}\n",
        join(d.lengths().iter().map(|l| l.to_string()).collect())
    ));
    for v in u.values() {
        s.push_str(&v.to_string());
        s.push('\n');
    }
    s
}

pub(crate) fn decode_csv(text: &str, loc: &str) -> Result<GridFunction> {
    let mut header: Vec<(usize, Vec<&str>)> = Vec::new();
    let mut values = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if header.len() < 3 {
            header.push((no + 1, line.split(',').map(str::trim).collect()));
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| parse_err(loc, no + 1, format!("bad value '{line}'")))?;
        values.push(v);
    }
    if header.len() < 3 {
        return Err(parse_err(loc, 0, "missing header (dim, cells, lengths)"));
    }
    let field = |k: usize, key: &str| -> Result<&[&str]> {
        let (no, ref parts) = header[k];
        if parts.first() != Some(&key) {
            return Err(parse_err(loc, no, format!("expected '{key}' record")));
        }
        Ok(&parts[1..])
    };
    let dim_line = header[0].0;
    let dim: usize = field(0, "dim")?
        .first()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(loc, dim_line, "bad dim"))?;
    let cells: Vec<usize> = field(1, "cells")?
        .iter()
        .map(|s| s.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(loc, header[1].0, "bad cells"))?;
    let lengths: Vec<f64> = field(2, "lengths")?
        .iter()
        .map(|s| s.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(loc, header[2].0, "bad lengths"))?;
    if cells.len() != dim || lengths.len() != dim {
        return Err(parse_err(loc, dim_line, "header arity does not match dim"));
    }
    let domain = BoxDomain::new(lengths, cells)?;
    GridFunction::from_values(&domain, values)
}

pub(crate) fn encode_binary(u: &GridFunction) -> Vec<u8> {
    let d = u.domain();
    let mut out = Vec::with_capacity(8 * u.len() + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(d.dim() as u32).to_le_bytes());
    for n in d.cells() {
        out.extend_from_slice(&(*n as u64).to_le_bytes());
    }
    for l in d.lengths() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out.extend_from_slice(&(u.len() as u64).to_le_bytes());
    for v in u.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub(crate) fn decode_binary(bytes: &[u8], loc: &str) -> Result<GridFunction> {
    let mut pos = 4usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes
            .get(pos..pos + n)
            .ok_or_else(|| parse_err(loc, 0, format!("truncated at byte {pos}")))?;
        pos += n;
        Ok(s)
    };
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    let u64_at = |b: &[u8]| u64::from_le_bytes(b.try_into().unwrap());
    let f64_at = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());

    let version = u32_at(take(4)?);
    if version != 1 {
        return Err(parse_err(loc, 0, format!("unsupported version {version}")));
    }
    let dim = u32_at(take(4)?) as usize;
    if dim == 0 || dim > 3 {
        return Err(parse_err(loc, 0, format!("bad dim {dim}")));
    }
    let mut cells = Vec::with_capacity(dim);
    for _ in 0..dim {
        cells.push(u64_at(take(8)?) as usize);
    }
    let mut lengths = Vec::with_capacity(dim);
    for _ in 0..dim {
        lengths.push(f64_at(take(8)?));
    }
    let count = u64_at(take(8)?) as usize;
    let domain = BoxDomain::new(lengths, cells)?;
    if count != domain.node_count() {
        return Err(parse_err(loc, 0, "value count does not match header"));
    }
    let raw = take(8 * count)?;
    let values = raw.chunks_exact(8).map(f64_at).collect();
    GridFunction::from_values(&domain, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> GridFunction {
        let d = BoxDomain::new(vec![1.0, 0.5], vec![4, 3]).unwrap();
        GridFunction::from_fn(&d, |x| x[0] * 10.0 + x[1])
    }

    #[test]
    fn csv_layout_is_row_major_axis_zero_slowest() {
        let text = encode_csv(&sample());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "dim,2");
        assert_eq!(lines[2], "cells,4,3");
        assert_eq!(lines[3], "lengths,1,0.5");
        // nodes (x, y): (0.25, 1/6), (0.25, 1/3), (0.5, 1/6), ...
        let first: f64 = lines[4].parse().unwrap();
        let second: f64 = lines[5].parse().unwrap();
        let third: f64 = lines[6].parse().unwrap();
        assert!((first - (2.5 + 0.5 / 3.0)).abs() < 1e-14);
        assert!((second - (2.5 + 1.0 / 3.0)).abs() < 1e-14);
        assert!((third - (5.0 + 0.5 / 3.0)).abs() < 1e-14);
        assert_eq!(lines.len(), 4 + 3 * 2);
    }

    #[test]
    fn files_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let u = sample();
        for (name, fmt) in [("u.csv", GridFormat::Csv), ("u.bin", GridFormat::Binary)] {
            let p = dir.path().join(name);
            write_grid_function(&u, &p, GridFormat::from_path(&p)).unwrap();
            assert_eq!(GridFormat::from_path(&p), fmt);
            assert_eq!(read_grid_function(&p).unwrap(), u);
        }
    }

    #[test]
    fn rejects_wrong_value_count() {
        let mut text = encode_csv(&sample());
        text.push_str("1.0\n");
        assert!(decode_csv(&text, "t").is_err());
        let bin = encode_binary(&sample());
        assert!(decode_binary(&bin[..bin.len() - 3], "t").is_err());
    }

    proptest! {
        #[test]
        fn encodings_are_lossless(vals in proptest::collection::vec(-1e6f64..1e6, 6)) {
            let d = BoxDomain::new(vec![1.0, 2.0], vec![3, 4]).unwrap();
            let u = GridFunction::from_values(&d, vals).unwrap();
            prop_assert_eq!(decode_csv(&encode_csv(&u), "t").unwrap(), u.clone());
            prop_assert_eq!(decode_binary(&encode_binary(&u), "t").unwrap(), u);
        }
    }
}
