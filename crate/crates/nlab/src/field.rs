//! Scalar fields on the grid and their file formats.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::GridDomain;
use crate::scalar::Scalar;

/// One value per grid cell (inactive cells are carried along and ignored).
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    pub n: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> Field<T> {
    pub fn constant(n: usize, v: T) -> Self {
        Field {
            n,
            values: vec![v; n * n],
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, T::zero())
    }

    pub fn from_fn<D: Scalar>(domain: &GridDomain<D>, f: impl Fn(usize) -> T) -> Self {
        Field {
            n: domain.n,
            values: (0..domain.len()).map(f).collect(),
        }
    }

    pub fn check_shape<D: Scalar>(&self, domain: &GridDomain<D>) -> Result<()> {
        if self.n != domain.n || self.values.len() != domain.len() {
            return Err(Error::Shape(format!(
                "field has {} cells ({} per axis), domain has {}",
                self.values.len(),
                self.n,
                domain.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Max over the cells selected by `mask` of `|self - other|`.
    pub fn max_diff(&self, other: &Field<T>, mask: impl Fn(usize) -> bool) -> T {
        let mut m = T::zero();
        for k in 0..self.values.len() {
            if mask(k) {
                m = m.max((self.values[k] - other.values[k]).abs());
            }
        }
        m
    }

    pub fn to_f64(&self) -> Field<f64> {
        Field {
            n: self.n,
            values: self.values.iter().map(|v| v.f64()).collect(),
        }
    }
}

/// Header of the binary field format: `"N W h count"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldHeader {
    pub dimension: usize,
    pub box_half_width: f64,
    pub spacing: f64,
    pub count: usize,
}

pub fn write_binary<T: Scalar, D: Scalar>(
    path: &Path,
    field: &Field<T>,
    domain: &GridDomain<D>,
) -> Result<()> {
    field.check_shape(domain)?;
    let mut buf = Vec::with_capacity(64 + 8 * field.len());
    writeln!(
        buf,
        "{} {} {} {}",
        domain.dimension,
        domain.box_half_width.f64(),
        domain.spacing.f64(),
        field.len()
    )?;
    for v in &field.values {
        buf.extend_from_slice(&v.f64().to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<(FieldHeader, Field<f64>)> {
    let file = fs::File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let parts: Vec<&str> = line.split_whitespace().collect();
    let bad = || Error::Config(format!("malformed field header in {}", path.display()));
    if parts.len() != 4 {
        return Err(bad());
    }
    let header = FieldHeader {
        dimension: parts[0].parse().map_err(|_| bad())?,
        box_half_width: parts[1].parse().map_err(|_| bad())?,
        spacing: parts[2].parse().map_err(|_| bad())?,
        count: parts[3].parse().map_err(|_| bad())?,
    };
    let n = (header.count as f64).sqrt().round() as usize;
    if n * n != header.count {
        return Err(Error::Config(format!(
            "field count {} is not a square grid",
            header.count
        )));
    }
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * header.count {
        return Err(Error::Config(format!(
            "expected {} bytes of data, found {}",
            8 * header.count,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((header, Field { n, values }))
}

/// `i,j,x1,x2,value` for every active cell.
pub fn write_csv<T: Scalar, D: Scalar>(
    path: &Path,
    field: &Field<T>,
    domain: &GridDomain<D>,
) -> Result<()> {
    field.check_shape(domain)?;
    let mut out = String::from("i,j,x1,x2,value\n");
    for k in 0..domain.len() {
        if !domain.active[k] {
            continue;
        }
        let (i, j) = domain.ij(k);
        let (x1, x2) = domain.center(k);
        out.push_str(&format!(
            "{i},{j},{},{},{}\n",
            x1.f64(),
            x2.f64(),
            field.values[k].f64()
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Affine map of `[lo, hi]` onto `0..=255`, rows from the top (largest `x2`) down.
pub fn pgm_bytes(field: &Field<f64>, lo: f64, hi: f64) -> Vec<u8> {
    let n = field.n;
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    let span = if hi > lo { hi - lo } else { 1.0 };
    for row in 0..n {
        let j = n - 1 - row;
        for i in 0..n {
            let v = field.values[i * n + j];
            let t = ((v - lo) / span).clamp(0.0, 1.0);
            out.push((t * 255.0).round() as u8);
        }
    }
    out
}

pub fn write_pgm(path: &Path, field: &Field<f64>, lo: f64, hi: f64) -> Result<()> {
    fs::write(path, pgm_bytes(field, lo, hi))?;
    Ok(())
}

/// Mask PGM straight from the domain (0 = obstacle, 255 = active).
pub fn write_mask_pgm<D: Scalar>(path: &Path, domain: &GridDomain<D>) -> Result<()> {
    let n = domain.n;
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    out.extend(domain.mask_bytes());
    fs::write(path, out)?;
    Ok(())
}

/// Mask as a 0/1 field, so that rendering it over `[0,1]` reproduces the mask image.
pub fn mask_field<D: Scalar>(domain: &GridDomain<D>) -> Field<f64> {
    Field::from_fn(domain, |k| if domain.active[k] { 1.0 } else { 0.0 })
}

/// Min and max over finite values.
pub fn value_range(field: &Field<f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in field.values.iter().filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let d = GridDomain::<f64>::free(4, 1.0, 1);
        let f = Field::from_fn(&d, |k| k as f64 * 0.25 - 1.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        write_binary(&p, &f, &d).unwrap();
        let (h, g) = read_binary(&p).unwrap();
        assert_eq!(h.count, 16);
        assert_eq!(h.dimension, 2);
        assert_eq!(h.spacing, 0.5);
        assert_eq!(g, f);
        let text = std::fs::read(&p).unwrap();
        assert!(text.starts_with(b"2 1 0.5 16\n"));
    }

    #[test]
    fn constant_field_renders_constant() {
        let f = Field::constant(3, 0.4);
        let bytes = pgm_bytes(&f, 0.0, 1.0);
        let body = &bytes[bytes.len() - 9..];
        assert!(body.iter().all(|&b| b == 102));
    }

    #[test]
    fn mask_render_matches_mask_export() {
        let mut d = GridDomain::<f64>::free(5, 1.0, 1);
        d.active[7] = false;
        d.active[13] = false;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        write_mask_pgm(&p, &d).unwrap();
        assert_eq!(
            std::fs::read(&p).unwrap(),
            pgm_bytes(&mask_field(&d), 0.0, 1.0)
        );
    }
}
