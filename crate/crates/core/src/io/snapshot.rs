//! `CWF1` field snapshots.
//!
//! Layout: a UTF-8 text header of newline-terminated lines
//!
//! ```text
//! CWF1
//! nx <usize>
//! ny <usize>
//! bounds <x_min> <x_max> <y_min> <y_max>
//! t <f64>
//! name <string without newlines>
//! end
//! ```
//!
//! followed by `nx * ny` little-endian IEEE-754 binary64 values in row-major
//! order (index `i + nx * j`, `i` along x). Header floats use the shortest
//! representation that parses back to the same bits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

pub const MAGIC: &str = "CWF1";
const MAX_HEADER_LINE: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: Field,
    pub t: f64,
    pub name: String,
}

pub fn encode_snapshot(field: &Field, t: f64, name: &str) -> Vec<u8> {
    let g = field.grid();
    let (x0, x1, y0, y1) = g.bounds();
    let name: String = name
        .chars()
        .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
        .collect();
    let mut out = format!(
        "{MAGIC}\nnx {}\nny {}\nbounds {x0:?} {x1:?} {y0:?} {y1:?}\nt {t:?}\nname {name}\nend\n",
        g.nx(),
        g.ny()
    )
    .into_bytes();
    out.reserve(8 * field.values().len());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_snapshot(field: &Field, t: f64, name: &str, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_snapshot(field, t, name))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn malformed(path: &Path, detail: impl Into<String>) -> Error {
    Error::MalformedHeader {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

fn truncated(path: &Path, detail: impl Into<String>) -> Error {
    Error::Truncated {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

fn read_line(r: &mut impl BufRead, path: &Path, what: &str) -> Result<String> {
    let mut buf = Vec::new();
    let n = r
        .by_ref()
        .take(MAX_HEADER_LINE as u64)
        .read_until(b'\n', &mut buf)
        .map_err(|e| Error::io(path, e))?;
    if n == 0 || buf.last() != Some(&b'\n') {
        if buf.len() >= MAX_HEADER_LINE {
            return Err(malformed(path, format!("header line `{what}` too long")));
        }
        return Err(truncated(path, format!("header ends before `{what}`")));
    }
    buf.pop();
    String::from_utf8(buf).map_err(|_| malformed(path, format!("`{what}` is not UTF-8")))
}

fn keyed<'a>(line: &'a str, key: &str, path: &Path) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| malformed(path, format!("expected `{key} ...`, found `{line}`")))
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str, path: &Path) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| malformed(path, format!("cannot parse {what} from `{s}`")))
}

pub fn decode_snapshot(reader: impl Read, path: &Path) -> Result<Snapshot> {
    let mut r = BufReader::new(reader);
    let magic = match read_line(&mut r, path, "magic") {
        Ok(l) => l,
        Err(Error::Truncated { .. }) | Err(Error::MalformedHeader { .. }) => {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
            })
        }
        Err(e) => return Err(e),
    };
    if magic != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let nx: usize = parse_num(keyed(&read_line(&mut r, path, "nx")?, "nx", path)?, "nx", path)?;
    let ny: usize = parse_num(keyed(&read_line(&mut r, path, "ny")?, "ny", path)?, "ny", path)?;
    let line = read_line(&mut r, path, "bounds")?;
    let b: Vec<f64> = keyed(&line, "bounds", path)?
        .split_whitespace()
        .map(|s| parse_num(s, "bounds", path))
        .collect::<Result<_>>()?;
    if b.len() != 4 {
        return Err(malformed(path, format!("bounds needs 4 values, found {}", b.len())));
    }
    let t: f64 = parse_num(keyed(&read_line(&mut r, path, "t")?, "t", path)?, "t", path)?;
    let line = read_line(&mut r, path, "name")?;
    let name = if line == "name" {
        String::new()
    } else {
        keyed(&line, "name", path)?.to_string()
    };
    if read_line(&mut r, path, "end")? != "end" {
        return Err(malformed(path, "missing `end` line"));
    }
    let grid = Grid::new(b[0], b[1], b[2], b[3], nx, ny).map_err(|e| malformed(path, e.to_string()))?;

    let expected = grid.len();
    let mut bytes = Vec::with_capacity(expected * 8);
    r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() < expected * 8 {
        return Err(truncated(
            path,
            format!("{} data bytes, expected {}", bytes.len(), expected * 8),
        ));
    }
    if bytes.len() > expected * 8 {
        return Err(Error::DimensionMismatch {
            expected,
            found: bytes.len() / 8,
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(Snapshot {
        field: Field::from_values(grid, values)?,
        t,
        name,
    })
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode_snapshot(file, path)
}

/// Reads a snapshot and checks it lives on `grid`.
pub fn read_snapshot_on(path: &Path, grid: &Grid) -> Result<Snapshot> {
    let snap = read_snapshot(path)?;
    if !snap.field.grid().same_as(grid) {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: snap.field.grid().len(),
        });
    }
    Ok(snap)
}

pub(crate) fn snapshot_path(dir: &Path, name: &str, index: usize) -> PathBuf {
    dir.join(format!("{name}_{index:03}.cwf"))
}
