//! File formats: CSV with a header row, the `GMSP` binary snapshot and
//! 8-bit PGM images with a bounds sidecar.
//!
//! Snapshot layout, all little-endian:
//!
//! | bytes  | content                         |
//! |--------|---------------------------------|
//! | 0..4   | `b"GMSP"`                       |
//! | 4..8   | format version, `u32`           |
//! | 8..12  | dim, `u32`                      |
//! | 12..16 | nx, `u32`                       |
//! | 16..20 | ny, `u32` (1 in one dimension)  |
//! | 20..24 | field count, `u32`              |
//! | 24..32 | time, `f64`                     |
//! | 32..   | `f64` payload, field-major, row-major within a field |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fields::Field;
use crate::functionals::{FunctionalTrace, TraceStatistics, COLUMNS, INTEGER_COLUMNS};
use crate::spectral_basis::SpectralBasis;

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"GMSP";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const SNAPSHOT_HEADER_BYTES: usize = 32;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Header row then one line per row; cells are written verbatim.
pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    write_file(path.as_ref(), s.as_bytes())
}

fn cell(column: &str, x: f64) -> String {
    if INTEGER_COLUMNS.contains(&column) {
        format!("{}", x as u64)
    } else {
        fmt_float(x)
    }
}

/// One row per observation in [`COLUMNS`] order.
pub fn write_trace(trace: &FunctionalTrace, path: impl AsRef<Path>) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..trace.len())
        .map(|i| trace.row(i).iter().zip(COLUMNS).map(|(&x, c)| cell(c, x)).collect())
        .collect();
    write_csv(path, &COLUMNS, &rows)
}

/// Columns `mean_<name>` and `se_<name>` for each trace column except time.
pub fn write_statistics(stats: &TraceStatistics, path: impl AsRef<Path>) -> Result<()> {
    let mut header = vec!["t".to_string(), "paths".to_string()];
    for c in &COLUMNS[1..] {
        header.push(format!("mean_{c}"));
        header.push(format!("se_{c}"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = stats
        .mean
        .iter()
        .zip(&stats.std_error)
        .map(|(m, s)| {
            let mut r = vec![fmt_float(m[0]), stats.paths.to_string()];
            for c in 1..COLUMNS.len() {
                r.push(fmt_float(m[c]));
                r.push(fmt_float(s[c]));
            }
            r
        })
        .collect();
    write_csv(path, &header, &rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub version: u32,
    pub dim: u32,
    pub nx: u32,
    pub ny: u32,
    pub field_count: u32,
    pub time: f64,
}

impl SnapshotHeader {
    pub fn for_basis(basis: &SpectralBasis, field_count: usize, time: f64) -> Self {
        let n = basis.grid_points() as u32;
        SnapshotHeader {
            version: SNAPSHOT_VERSION,
            dim: basis.dim() as u32,
            nx: n,
            ny: if basis.dim() == 2 { n } else { 1 },
            field_count: field_count as u32,
            time,
        }
    }

    pub fn payload_len(&self) -> usize {
        self.nx as usize * self.ny as usize * self.field_count as usize
    }

    pub fn to_bytes(&self) -> [u8; SNAPSHOT_HEADER_BYTES] {
        let mut b = [0u8; SNAPSHOT_HEADER_BYTES];
        b[0..4].copy_from_slice(&SNAPSHOT_MAGIC);
        for (i, x) in [self.version, self.dim, self.nx, self.ny, self.field_count].iter().enumerate() {
            b[4 + 4 * i..8 + 4 * i].copy_from_slice(&x.to_le_bytes());
        }
        b[24..32].copy_from_slice(&self.time.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < SNAPSHOT_HEADER_BYTES || b[0..4] != SNAPSHOT_MAGIC {
            return Err(Error::InvalidParameter("not a GMSP snapshot".into()));
        }
        let u = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
        Ok(SnapshotHeader {
            version: u(4),
            dim: u(8),
            nx: u(12),
            ny: u(16),
            field_count: u(20),
            time: f64::from_le_bytes(b[24..32].try_into().unwrap()),
        })
    }
}

/// Nodal values of `fields` at time `time`.
pub fn write_snapshot(basis: &SpectralBasis, fields: &[&Field], time: f64, path: impl AsRef<Path>) -> Result<()> {
    let header = SnapshotHeader::for_basis(basis, fields.len(), time);
    let mut bytes = Vec::with_capacity(SNAPSHOT_HEADER_BYTES + 8 * header.payload_len());
    bytes.extend_from_slice(&header.to_bytes());
    for f in fields {
        f.check_basis(basis)?;
        for x in f.to_nodal(basis)?.nodal_values()? {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    write_file(path.as_ref(), &bytes)
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<(SnapshotHeader, Vec<f64>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = SnapshotHeader::from_bytes(&bytes)?;
    let body = &bytes[SNAPSHOT_HEADER_BYTES..];
    if body.len() != 8 * header.payload_len() {
        return Err(Error::LengthMismatch {
            what: "snapshot payload bytes",
            expected: 8 * header.payload_len(),
            found: body.len(),
        });
    }
    let payload = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, payload))
}

/// `<path>.bounds.txt`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".bounds.txt");
    PathBuf::from(s)
}

/// Binary PGM with min-max scaling to `0..=255`; a constant field maps to 0.
/// One-dimensional fields become a single row.
pub fn write_image(basis: &SpectralBasis, field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    field.check_basis(basis)?;
    let f = field.to_nodal(basis)?;
    let values = f.nodal_values()?;
    let n = basis.grid_points();
    let (w, h) = if basis.dim() == 2 { (n, n) } else { (n, 1) };
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    // nodal index is i*N + j with i along x; rows of the image run along y
    for j in (0..h).rev() {
        for i in 0..w {
            let x = values[if h == 1 { i } else { i * n + j }];
            let level = if span > 0.0 { ((x - lo) / span * 255.0).round() } else { 0.0 };
            bytes.push(level as u8);
        }
    }
    write_file(path, &bytes)?;
    let side = format!("min = {}\nmax = {}\n", fmt_float(lo), fmt_float(hi));
    write_file(&sidecar_path(path), side.as_bytes())
}

/// Plain-text `key = value` lines.
pub fn write_summary(path: impl AsRef<Path>, lines: &[String]) -> Result<()> {
    let mut s = lines.join("\n");
    s.push('\n');
    write_file(path.as_ref(), s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_basis::DomainSpec;

    #[test]
    fn snapshot_roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let b = SpectralBasis::build(&DomainSpec::rectangle(1.0, 2.0, 8), 5).unwrap();
        let u = Field::from_nodal(&b, (0..64).map(|i| (i as f64).sqrt() - 3.3).collect()).unwrap();
        let v = Field::constant(&b, 0.7);
        let p = dir.path().join("s.gmsp");
        write_snapshot(&b, &[&u, &v], 0.25, &p).unwrap();
        let (h, data) = read_snapshot(&p).unwrap();
        assert_eq!((h.dim, h.nx, h.ny, h.field_count, h.time), (2, 8, 8, 2, 0.25));
        assert_eq!(&data[..64], u.nodal().unwrap());
        assert_eq!(fs::metadata(&p).unwrap().len(), 32 + 2 * 64 * 8);
    }

    #[test]
    fn constant_image_is_uniform() {
        let dir = tempfile::tempdir().unwrap();
        let b = SpectralBasis::build(&DomainSpec::rectangle(1.0, 1.0, 8), 5).unwrap();
        let p = dir.path().join("c.pgm");
        write_image(&b, &Field::constant(&b, 2.5), &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        let header = b"P5\n8 8\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert!(bytes[header.len()..].iter().all(|&x| x == bytes[header.len()]));
        assert_eq!(bytes.len(), header.len() + 64);
        let side = fs::read_to_string(sidecar_path(&p)).unwrap();
        let vals: Vec<&str> = side.lines().map(|l| l.split(" = ").nth(1).unwrap()).collect();
        assert_eq!(vals[0], vals[1]);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
    }
}
