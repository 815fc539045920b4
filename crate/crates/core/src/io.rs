//! File formats: atomic writes, binary arrays with a text header, and CSV
//! tables of grid fields.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Field, Grid};
use crate::error::{Error, Result};

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub(crate) const HEADER_END: &str = "end\n";

/// Splits `bytes` into a TOML header (everything before a line `end`) and
/// the binary payload that follows.
pub(crate) fn split_header<'a>(path: &Path, bytes: &'a [u8]) -> Result<(&'a str, &'a [u8])> {
    let mut start = 0;
    for line in bytes.split_inclusive(|&b| b == b'\n') {
        let end = start + line.len();
        if line == HEADER_END.as_bytes() {
            let head = std::str::from_utf8(&bytes[..start])
                .map_err(|e| Error::format(path, e.to_string()))?;
            return Ok((head, &bytes[end..]));
        }
        start = end;
        if start > 1 << 20 {
            break;
        }
    }
    Err(Error::format(path, "missing header terminator"))
}

pub(crate) fn f64s_to_bytes(data: &[f64], out: &mut Vec<u8>) {
    out.reserve(data.len() * 8);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn bytes_to_f64s(path: &Path, bytes: &[u8], count: usize) -> Result<Vec<f64>> {
    if bytes.len() != count * 8 {
        return Err(Error::format(
            path,
            format!("payload has {} bytes, expected {}", bytes.len(), count * 8),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub const ARRAY_FORMAT: &str = "FRACBACK-ARRAY v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayHeader {
    pub format: String,
    pub shape: Vec<usize>,
    pub grid: String,
}

/// Row-major little-endian f64 array with its shape and a grid description.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayFile {
    pub shape: Vec<usize>,
    pub grid: String,
    pub data: Vec<f64>,
}

impl ArrayFile {
    pub fn new(shape: Vec<usize>, grid: impl Into<String>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::dimension(format!(
                "shape {shape:?} does not hold {} values",
                data.len()
            )));
        }
        Ok(Self {
            shape,
            grid: grid.into(),
            data,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let head = ArrayHeader {
            format: ARRAY_FORMAT.into(),
            shape: self.shape.clone(),
            grid: self.grid.clone(),
        };
        let mut out = toml::to_string(&head)
            .map_err(|e| Error::Config(e.to_string()))?
            .into_bytes();
        out.extend_from_slice(HEADER_END.as_bytes());
        f64s_to_bytes(&self.data, &mut out);
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(path, &bytes)
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let (head, body) = split_header(path, bytes)?;
        let h: ArrayHeader =
            toml::from_str(head).map_err(|e| Error::format(path, e.to_string()))?;
        if h.format != ARRAY_FORMAT {
            return Err(Error::format(
                path,
                format!("unknown format '{}'", h.format),
            ));
        }
        let data = bytes_to_f64s(path, body, h.shape.iter().product())?;
        Ok(Self {
            shape: h.shape,
            grid: h.grid,
            data,
        })
    }
}

/// Fields share the binary format with shape `[K, M]`.
pub fn write_field_binary(path: &Path, f: &Field) -> Result<()> {
    ArrayFile::new(
        vec![f.components(), f.grid().points()],
        f.grid().describe(),
        f.values().iter().copied().collect(),
    )?
    .write(path)
}

pub fn read_field_binary(path: &Path, grid: &Grid) -> Result<Field> {
    let a = ArrayFile::read(path)?;
    if a.shape.len() != 2 || a.shape[1] != grid.points() || a.grid != grid.describe() {
        return Err(Error::format(
            path,
            format!(
                "array {:?} on '{}' does not match grid '{}'",
                a.shape,
                a.grid,
                grid.describe()
            ),
        ));
    }
    let v =
        ndarray::Array2::from_shape_vec((a.shape[0], a.shape[1]), a.data).expect("checked shape");
    Field::new(*grid, v)
}

fn fmt_f64(v: f64) -> String {
    // shortest representation that parses back to the same value
    format!("{v:?}")
}

/// Header `x[,y],c0,c1,...` followed by one row per interior point.
pub fn field_to_csv(f: &Field) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head: Vec<String> = if f.grid().dim() == 1 {
        vec!["x".into()]
    } else {
        vec!["x".into(), "y".into()]
    };
    head.extend((0..f.components()).map(|k| format!("c{k}")));
    w.write_record(&head).map_err(|e| Error::Io(e.into()))?;
    for p in 0..f.grid().points() {
        let mut row: Vec<String> = f.grid().coords(p).into_iter().map(fmt_f64).collect();
        row.extend((0..f.components()).map(|k| fmt_f64(f.values()[[k, p]])));
        w.write_record(&row).map_err(|e| Error::Io(e.into()))?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub fn write_field_csv(path: &Path, f: &Field) -> Result<()> {
    write_atomic(path, &field_to_csv(f)?)
}

/// Reads a field written by [`write_field_csv`]; the grid is inferred from
/// the coordinate columns.
pub fn read_field_csv(path: &Path) -> Result<Field> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let head = rdr
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .clone();
    let dim = if head.get(1) == Some("y") { 2 } else { 1 };
    if head.get(0) != Some("x") || head.len() <= dim {
        return Err(Error::format(path, "expected header x[,y],c0,..."));
    }
    let k = head.len() - dim;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(path, e.to_string()))?;
        if row.len() != head.len() {
            return Err(Error::format(path, "ragged row"));
        }
        rows.push(row);
    }
    let count = |col: usize| {
        let mut v: Vec<f64> = rows.iter().map(|r| r[col]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    };
    let grid = if dim == 1 {
        Grid::new_1d(count(0))
    } else {
        Grid::new_2d(count(0), count(1))
    }
    .map_err(|e| Error::format(path, e.to_string()))?;
    if rows.len() != grid.points() {
        return Err(Error::format(path, "rows do not cover the grid"));
    }
    let mut v = ndarray::Array2::zeros((k, grid.points()));
    for (p, r) in rows.iter().enumerate() {
        let c = grid.coords(p);
        if c.iter().zip(r).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Err(Error::format(path, format!("row {p} is not in grid order")));
        }
        for j in 0..k {
            v[[j, p]] = r[dim + j];
        }
    }
    Field::new(grid, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn array_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.bin");
        let a = ArrayFile::new(
            vec![2, 3],
            "1d nx=3",
            vec![1.0, -2.5, 3.0, 1e-300, f64::MAX, 0.1],
        )
        .unwrap();
        a.write(&p).unwrap();
        assert_eq!(ArrayFile::read(&p).unwrap(), a);
        std::fs::write(&p, b"format = \"x\"\n").unwrap();
        assert!(matches!(ArrayFile::read(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn field_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for g in [Grid::new_1d(7).unwrap(), Grid::new_2d(4, 3).unwrap()] {
            let f = Field::from_fn(g, 2, |k, x| (k as f64 + 1.0) * x[0].sin() / 3.0).unwrap();
            let p = dir.path().join("f.csv");
            write_field_csv(&p, &f).unwrap();
            assert_eq!(read_field_csv(&p).unwrap(), f);
            let b = dir.path().join("f.bin");
            write_field_binary(&b, &f).unwrap();
            assert_eq!(read_field_binary(&b, &g).unwrap(), f);
        }
    }
}
