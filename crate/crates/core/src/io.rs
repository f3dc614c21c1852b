//! `fvecs` / `bvecs` / `ivecs` files: each record is a little-endian `u32`
//! dimension followed by that many elements.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::codec::ByteReader;
use crate::error::{MrqError, Result};
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    F32,
    U8,
    I32,
}

impl ElementKind {
    pub fn size(self) -> usize {
        match self {
            ElementKind::F32 | ElementKind::I32 => 4,
            ElementKind::U8 => 1,
        }
    }

    /// Kind implied by a `.fvecs`, `.bvecs` or `.ivecs` extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

impl FromStr for ElementKind {
    type Err = MrqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fvecs" | "f32" => Ok(ElementKind::F32),
            "bvecs" | "u8" => Ok(ElementKind::U8),
            "ivecs" | "i32" => Ok(ElementKind::I32),
            _ => Err(MrqError::config(format!("unknown vector file kind {s:?}"))),
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementKind::F32 => "fvecs",
            ElementKind::U8 => "bvecs",
            ElementKind::I32 => "ivecs",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetFile {
    pub path: PathBuf,
    pub kind: ElementKind,
    pub count: usize,
    pub dim: usize,
}

impl DatasetFile {
    /// Reads the first record header and checks the file size against it.
    pub fn inspect(path: impl AsRef<Path>, kind: ElementKind) -> Result<Self> {
        let path = path.as_ref();
        let len = std::fs::metadata(path)?.len() as usize;
        let dim = if len == 0 {
            0
        } else {
            let mut head = [0u8; 4];
            let mut f = std::fs::File::open(path)?;
            std::io::Read::read_exact(&mut f, &mut head)
                .map_err(|_| MrqError::format(0, "truncated record header"))?;
            u32::from_le_bytes(head) as usize
        };
        let record = 4 + dim * kind.size();
        if len > 0 && (dim == 0 || !len.is_multiple_of(record)) {
            return Err(MrqError::format(
                len - len % record.max(1),
                format!("file size {len} is not a multiple of the {record}-byte record"),
            ));
        }
        Ok(Self {
            path: path.to_path_buf(),
            kind,
            count: if len == 0 { 0 } else { len / record },
            dim,
        })
    }
}

/// Parses a whole vecs buffer into a row-major matrix of `f32`.
pub fn parse_vecs(bytes: &[u8], kind: ElementKind) -> Result<Matrix> {
    let mut r = ByteReader::new(bytes);
    let mut dim = None;
    let mut data = Vec::new();
    let mut record = 0;
    while r.remaining() > 0 {
        let at = r.position();
        let got = r.u32()? as usize;
        match dim {
            None if got == 0 => return Err(MrqError::format(at, "record dimension is zero")),
            None => {
                dim = Some(got);
                let per = 4 + got * kind.size();
                data.reserve(bytes.len() / per * got);
            }
            Some(d) if d != got => {
                return Err(MrqError::InconsistentDimension {
                    record,
                    expected: d,
                    got,
                })
            }
            Some(_) => {}
        }
        let raw = r.take(got * kind.size())?;
        match kind {
            ElementKind::F32 => data.extend(
                raw.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap())),
            ),
            ElementKind::I32 => data.extend(
                raw.chunks_exact(4)
                    .map(|c| i32::from_le_bytes(c.try_into().unwrap()) as f32),
            ),
            ElementKind::U8 => data.extend(raw.iter().map(|&b| b as f32)),
        }
        record += 1;
    }
    Matrix::new(record, dim.unwrap_or(0), data)
}

pub fn read_vecs(path: impl AsRef<Path>, kind: ElementKind) -> Result<Matrix> {
    parse_vecs(&std::fs::read(path)?, kind)
}

/// Integer rows of an `ivecs` file, e.g. ground-truth neighbor ids.
pub fn read_ivecs(path: impl AsRef<Path>) -> Result<Vec<Vec<u32>>> {
    let bytes = std::fs::read(path)?;
    let mut r = ByteReader::new(&bytes);
    let mut rows = Vec::new();
    while r.remaining() > 0 {
        let at = r.position();
        let dim = r.u32()? as usize;
        if let Some(first) = rows.first().map(|v: &Vec<u32>| v.len()) {
            if first != dim {
                return Err(MrqError::InconsistentDimension {
                    record: rows.len(),
                    expected: first,
                    got: dim,
                });
            }
        } else if dim == 0 {
            return Err(MrqError::format(at, "record dimension is zero"));
        }
        rows.push(r.u32s(dim)?);
    }
    Ok(rows)
}

pub fn encode_vecs(m: &Matrix, kind: ElementKind) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(m.rows() * (4 + m.cols() * kind.size()));
    for (i, row) in m.iter_rows().enumerate() {
        out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
        for &v in row {
            match kind {
                ElementKind::F32 => out.extend_from_slice(&v.to_le_bytes()),
                ElementKind::I32 => {
                    if v.fract() != 0.0 || v.abs() > 16_777_216.0 {
                        return Err(MrqError::config(format!(
                            "row {i}: {v} is not an exact integer"
                        )));
                    }
                    out.extend_from_slice(&(v as i32).to_le_bytes())
                }
                ElementKind::U8 => {
                    if v.fract() != 0.0 || !(0.0..=255.0).contains(&v) {
                        return Err(MrqError::config(format!(
                            "row {i}: {v} does not fit in a byte"
                        )));
                    }
                    out.push(v as u8)
                }
            }
        }
    }
    Ok(out)
}

pub fn write_vecs(path: impl AsRef<Path>, m: &Matrix, kind: ElementKind) -> Result<()> {
    let bytes = encode_vecs(m, kind)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn write_ivecs(path: impl AsRef<Path>, rows: &[Vec<u32>]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for row in rows {
        w.write_all(&(row.len() as u32).to_le_bytes())?;
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(dim: u32, vals: &[f32]) -> Vec<u8> {
        let mut b = dim.to_le_bytes().to_vec();
        for v in vals {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn minimal_file() {
        let m = parse_vecs(&record(2, &[1.0, 2.0]), ElementKind::F32).unwrap();
        assert_eq!((m.rows(), m.cols()), (1, 2));
        assert_eq!(m.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn inconsistent_dimension_names_the_record() {
        let mut b = record(2, &[1.0, 2.0]);
        b.extend(record(2, &[3.0, 4.0]));
        b.extend(record(3, &[5.0, 6.0, 7.0]));
        match parse_vecs(&b, ElementKind::F32) {
            Err(MrqError::InconsistentDimension {
                record: 2,
                expected: 2,
                got: 3,
            }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncation_reports_offset() {
        let mut b = record(2, &[1.0, 2.0]);
        b.extend(record(2, &[3.0, 4.0]));
        b.truncate(b.len() - 2);
        match parse_vecs(&b, ElementKind::F32) {
            Err(MrqError::Format { offset: 16, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_vecs(&[1, 0], ElementKind::F32),
            Err(MrqError::Format { offset: 0, .. })
        ));
        assert!(parse_vecs(&record(0, &[]), ElementKind::F32).is_err());
    }

    #[test]
    fn round_trips_every_kind() {
        let dir = tempfile::tempdir().unwrap();
        let m = Matrix::from_rows(&[vec![1.0, 255.0, 0.0], vec![7.0, 3.0, 9.0]]).unwrap();
        for kind in [ElementKind::F32, ElementKind::U8, ElementKind::I32] {
            let p = dir.path().join(format!("x.{kind}"));
            write_vecs(&p, &m, kind).unwrap();
            assert_eq!(ElementKind::from_path(&p), Some(kind));
            assert_eq!(read_vecs(&p, kind).unwrap(), m);
            let info = DatasetFile::inspect(&p, kind).unwrap();
            assert_eq!((info.count, info.dim), (2, 3));
        }
        let neg = Matrix::from_rows(&[vec![-1.0]]).unwrap();
        assert!(encode_vecs(&neg, ElementKind::U8).is_err());
        assert!(encode_vecs(&Matrix::from_rows(&[vec![0.5]]).unwrap(), ElementKind::I32).is_err());
    }

    #[test]
    fn floats_round_trip_bit_exactly() {
        let m = Matrix::from_rows(&[vec![f32::MIN_POSITIVE, -0.0, 1.0e30, std::f32::consts::PI]])
            .unwrap();
        let back = parse_vecs(
            &encode_vecs(&m, ElementKind::F32).unwrap(),
            ElementKind::F32,
        )
        .unwrap();
        let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn ivecs_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gt.ivecs");
        let rows = vec![vec![3, 1, 2], vec![0, 4, 5]];
        write_ivecs(&p, &rows).unwrap();
        assert_eq!(read_ivecs(&p).unwrap(), rows);
        std::fs::write(&p, [1u8, 0, 0, 0, 9]).unwrap();
        assert!(matches!(read_ivecs(&p), Err(MrqError::Format { .. })));
    }

    #[test]
    fn inspect_rejects_bad_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.fvecs");
        let mut b = record(2, &[1.0, 2.0]);
        b.push(0);
        std::fs::write(&p, &b).unwrap();
        assert!(matches!(
            DatasetFile::inspect(&p, ElementKind::F32),
            Err(MrqError::Format { .. })
        ));
        let empty = dir.path().join("empty.fvecs");
        std::fs::write(&empty, []).unwrap();
        assert_eq!(
            DatasetFile::inspect(&empty, ElementKind::F32)
                .unwrap()
                .count,
            0
        );
        assert_eq!(read_vecs(&empty, ElementKind::F32).unwrap().rows(), 0);
    }
}
