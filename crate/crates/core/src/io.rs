//! Field files (GLF1) and error tables (CSV).
//!
//! GLF1 layout, all little-endian:
//!
//! ```text
//! "GLF1" | version u16 | kind u8 | level u16 | degree u8 | payload bytes u64 | payload f64... | checksum u64
//! ```
//!
//! Kind 1 is a complex P1 field stored as interleaved (re, im) pairs; kind 2
//! is a vector field stored as full per-Lagrange-node pairs. The checksum is
//! the wrapping sum of the payload bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fem::{ComplexField, VectorField, VectorSpace};
use crate::fem::space::shared_mesh;
use crate::model::EnergyBreakdown;

pub const MAGIC: &[u8; 4] = b"GLF1";
pub const VERSION: u16 = 1;
pub const KIND_SCALAR: u8 = 1;
pub const KIND_VECTOR: u8 = 2;
const HEADER: usize = 4 + 2 + 1 + 2 + 1 + 8;

/// A field read from disk.
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Scalar(ComplexField),
    Vector(VectorField),
}

fn encode(kind: u8, level: u32, degree: u8, data: impl Iterator<Item = f64>) -> Result<Vec<u8>> {
    let level = u16::try_from(level).map_err(|_| Error::InvalidArgument(format!("level {level} too large")))?;
    let payload: Vec<u8> = data.flat_map(f64::to_le_bytes).collect();
    let mut out = Vec::with_capacity(HEADER + payload.len() + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind);
    out.extend_from_slice(&level.to_le_bytes());
    out.push(degree);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    let sum = payload.iter().fold(0u64, |s, &b| s.wrapping_add(b as u64));
    out.extend_from_slice(&payload);
    out.extend_from_slice(&sum.to_le_bytes());
    Ok(out)
}

pub fn encode_scalar(u: &ComplexField) -> Result<Vec<u8>> {
    encode(KIND_SCALAR, u.level, 1, u.values.iter().flat_map(|v| [v.re, v.im]))
}

pub fn encode_vector(a: &VectorField) -> Result<Vec<u8>> {
    encode(KIND_VECTOR, a.level, a.degree, a.values.iter().copied())
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Field> {
    let bad = |msg: String| Error::FieldFile {
        path: path.to_path_buf(),
        msg,
    };
    if bytes.len() < HEADER + 8 {
        return Err(bad(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad("wrong magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let kind = bytes[6];
    let level = u16::from_le_bytes([bytes[7], bytes[8]]) as u32;
    let degree = bytes[9];
    let len = u64::from_le_bytes(bytes[10..18].try_into().unwrap()) as usize;
    if len % 8 != 0 || bytes.len() != HEADER + len + 8 {
        return Err(bad(format!("payload length {len} does not match file size {}", bytes.len())));
    }
    let payload = &bytes[HEADER..HEADER + len];
    let stored = u64::from_le_bytes(bytes[HEADER + len..].try_into().unwrap());
    let sum = payload.iter().fold(0u64, |s, &b| s.wrapping_add(b as u64));
    if sum != stored {
        return Err(bad(format!("checksum mismatch: stored {stored}, computed {sum}")));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    match kind {
        KIND_SCALAR => {
            let n = shared_mesh(level).map_err(|e| bad(e.to_string()))?.num_nodes();
            if degree != 1 || data.len() != 2 * n {
                return Err(bad(format!("scalar field of degree {degree} with {} values on level {level}", data.len())));
            }
            Ok(Field::Scalar(ComplexField {
                level,
                values: data.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect(),
            }))
        }
        KIND_VECTOR => {
            let space = VectorSpace::new(level, degree).map_err(|e| bad(e.to_string()))?;
            if data.len() != space.full_dim() {
                return Err(bad(format!("vector field with {} values, expected {}", data.len(), space.full_dim())));
            }
            Ok(Field::Vector(VectorField {
                level,
                degree,
                values: data,
            }))
        }
        k => Err(bad(format!("unknown kind {k}"))),
    }
}

pub fn write_scalar(path: &Path, u: &ComplexField) -> Result<()> {
    fs::write(path, encode_scalar(u)?)?;
    Ok(())
}

pub fn write_vector(path: &Path, a: &VectorField) -> Result<()> {
    fs::write(path, encode_vector(a)?)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<Field> {
    decode(&fs::read(path)?, path)
}

pub fn read_scalar(path: &Path) -> Result<ComplexField> {
    match read_field(path)? {
        Field::Scalar(u) => Ok(u),
        Field::Vector(_) => Err(Error::FieldFile {
            path: path.to_path_buf(),
            msg: "expected a scalar field".into(),
        }),
    }
}

pub fn read_vector(path: &Path) -> Result<VectorField> {
    match read_field(path)? {
        Field::Vector(a) => Ok(a),
        Field::Scalar(_) => Err(Error::FieldFile {
            path: path.to_path_buf(),
            msg: "expected a vector field".into(),
        }),
    }
}

/// One row of an error table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorRow {
    pub kappa: f64,
    pub level: u32,
    pub mesh_size: f64,
    pub err_l2_u: f64,
    pub err_h1k_u: f64,
    pub err_l2_a: f64,
    pub err_h1_a: f64,
    pub err_energy: f64,
}

pub const CSV_HEADER: &str = "kappa,level,mesh_size,err_L2_u,err_H1k_u,err_L2_A,err_H1_A,err_energy";

/// Scientific notation with 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv(w: &mut impl Write, rows: &[ErrorRow]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(r.kappa),
            r.level,
            fmt_f64(r.mesh_size),
            fmt_f64(r.err_l2_u),
            fmt_f64(r.err_h1k_u),
            fmt_f64(r.err_l2_a),
            fmt_f64(r.err_h1_a),
            fmt_f64(r.err_energy)
        )?;
    }
    Ok(())
}

pub fn read_csv(text: &str) -> Result<Vec<ErrorRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        Some(h) => {
            return Err(Error::Csv {
                row: 0,
                msg: format!("unexpected header {h:?}"),
            })
        }
        None => {
            return Err(Error::Csv {
                row: 0,
                msg: "missing header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 8 {
            return Err(Error::Csv {
                row,
                msg: format!("expected 8 fields, found {}", cols.len()),
            });
        }
        let num = |k: usize| {
            cols[k].parse::<f64>().map_err(|e| Error::Csv {
                row,
                msg: format!("field {k} {:?}: {e}", cols[k]),
            })
        };
        rows.push(ErrorRow {
            kappa: num(0)?,
            level: cols[1].parse().map_err(|e| Error::Csv {
                row,
                msg: format!("level {:?}: {e}", cols[1]),
            })?,
            mesh_size: num(2)?,
            err_l2_u: num(3)?,
            err_h1k_u: num(4)?,
            err_l2_a: num(5)?,
            err_h1_a: num(6)?,
            err_energy: num(7)?,
        });
    }
    Ok(rows)
}

pub fn write_csv_file(path: &Path, rows: &[ErrorRow]) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_csv_file(path: &Path) -> Result<Vec<ErrorRow>> {
    read_csv(&fs::read_to_string(path)?)
}

pub const ENERGY_HEADER: &str = "step,energy_gl,energy,kinetic,condensation,field,div_penalty";

/// Energy history, one row per iterate starting at step 0.
pub fn write_energy_csv(w: &mut impl Write, energies: &[EnergyBreakdown]) -> Result<()> {
    writeln!(w, "{ENERGY_HEADER}")?;
    for (n, e) in energies.iter().enumerate() {
        writeln!(
            w,
            "{n},{},{},{},{},{},{}",
            fmt_f64(e.total_gl),
            fmt_f64(e.total),
            fmt_f64(e.kinetic),
            fmt_f64(e.condensation),
            fmt_f64(e.field),
            fmt_f64(e.div_penalty)
        )?;
    }
    Ok(())
}

/// `E_GL` column of an energy-history table.
pub fn read_energy_csv(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(ENERGY_HEADER) {
        return Err(Error::Csv {
            row: 0,
            msg: "not an energy history".into(),
        });
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split(',')
                .nth(1)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Csv {
                    row: i + 1,
                    msg: format!("bad energy row {l:?}"),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_roundtrip_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut u = ComplexField::zeros(3).unwrap();
        for v in &mut u.values {
            *v = Complex64::new(rng.random::<f64>(), -rng.random::<f64>());
        }
        let bytes = encode_scalar(&u).unwrap();
        assert_eq!(&bytes[0..4], b"GLF1");
        match decode(&bytes, Path::new("mem")).unwrap() {
            Field::Scalar(v) => assert_eq!(v, u),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn vector_roundtrip_keeps_zero_entries() {
        let a = VectorField::interpolate(2, 2, |x| [x[0] + 0.1, x[1].sin()]).unwrap();
        let bytes = encode_vector(&a).unwrap();
        assert_eq!(decode(&bytes, Path::new("mem")).unwrap(), Field::Vector(a));
    }

    #[test]
    fn corrupted_payload_is_rejected() {
        let u = ComplexField::constant(1, Complex64::new(0.5, 0.25)).unwrap();
        let mut bytes = encode_scalar(&u).unwrap();
        bytes[HEADER + 3] ^= 1;
        let err = decode(&bytes, Path::new("x.glf")).unwrap_err();
        assert!(err.to_string().contains("checksum"));
        assert!(decode(&bytes[..10], Path::new("x")).is_err());
    }

    #[test]
    fn empty_table_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
        assert!(read_csv(&format!("{CSV_HEADER}\n")).unwrap().is_empty());
    }

    #[test]
    fn random_table_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<ErrorRow> = (0..1000)
            .map(|i| ErrorRow {
                kappa: rng.random_range(1.0..30.0),
                level: i % 9,
                mesh_size: rng.random::<f64>(),
                err_l2_u: rng.random::<f64>() * 1e-12,
                err_h1k_u: rng.random::<f64>() * 1e300,
                err_l2_a: -rng.random::<f64>(),
                err_h1_a: f64::MIN_POSITIVE * rng.random::<f64>(),
                err_energy: 1.0 / 3.0,
            })
            .collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let back = read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn malformed_row_reports_position() {
        let text = format!("{CSV_HEADER}\n6,2,0.25,1,1,1,1,1\n6,x,0.25,1,1,1,1,1\n");
        match read_csv(&text) {
            Err(Error::Csv { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn energy_history_roundtrip() {
        let e = EnergyBreakdown {
            kinetic: 0.1,
            condensation: 0.2,
            field: 0.3,
            div_penalty: 0.0,
            total_gl: 0.6,
            total: 0.6,
        };
        let mut buf = Vec::new();
        write_energy_csv(&mut buf, &[e, e]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(read_energy_csv(&text).unwrap(), vec![0.6, 0.6]);
    }
}
