//! Binary snapshot container.
//!
//! Layout (all little-endian): 8 magic bytes, then `time: f64`,
//! `dim_x: u64`, `n_x: u64`, `l_x: f64`, `n_v: u64`, `l_v: f64`, followed by
//! the payload as `f64` values. Distribution fields use magic `LNDF0001` and
//! store one value per cell, x-major then v. Coefficient fields use magic
//! `LNDC0001`, the header describes the single x-cell they belong to
//! (`dim_x = 0`, `n_x = 1`, `l_x` = x-cell index), and the payload holds ten
//! values per velocity cell: `a11 a12 a13 a22 a23 a33 b1 b2 b3 c`.

use std::io::{Read, Write};

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::field::DistributionField;
use crate::grid::{PhaseGrid, SpatialGrid, VelocityGrid};
use crate::scalar::Real;

pub const FIELD_MAGIC: &[u8; 8] = b"LNDF0001";
pub const COEFF_MAGIC: &[u8; 8] = b"LNDC0001";

struct Header {
    time: f64,
    dim_x: u64,
    n_x: u64,
    l_x: f64,
    n_v: u64,
    l_v: f64,
}

fn write_header<W: Write>(w: &mut W, magic: &[u8; 8], h: &Header) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&h.time.to_le_bytes())?;
    w.write_all(&h.dim_x.to_le_bytes())?;
    w.write_all(&h.n_x.to_le_bytes())?;
    w.write_all(&h.l_x.to_le_bytes())?;
    w.write_all(&h.n_v.to_le_bytes())?;
    w.write_all(&h.l_v.to_le_bytes())?;
    Ok(())
}

fn read8<R: Read>(r: &mut R) -> Result<[u8; 8]> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_header<R: Read>(r: &mut R, magic: &[u8; 8]) -> Result<Header> {
    let m = read8(r)?;
    if &m != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(Header {
        time: f64::from_le_bytes(read8(r)?),
        dim_x: u64::from_le_bytes(read8(r)?),
        n_x: u64::from_le_bytes(read8(r)?),
        l_x: f64::from_le_bytes(read8(r)?),
        n_v: u64::from_le_bytes(read8(r)?),
        l_v: f64::from_le_bytes(read8(r)?),
    })
}

fn read_payload<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn write_field<T: Real, W: Write>(w: &mut W, f: &DistributionField<T>) -> Result<()> {
    let g = f.grid;
    write_header(
        w,
        FIELD_MAGIC,
        &Header {
            time: f.time.to_f64_lossy(),
            dim_x: g.x.dim as u64,
            n_x: g.x.n as u64,
            l_x: g.x.period.to_f64_lossy(),
            n_v: g.v.n as u64,
            l_v: g.v.l.to_f64_lossy(),
        },
    )?;
    let mut buf = Vec::with_capacity(f.values.len() * 8);
    for v in &f.values {
        buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field<T: Real, R: Read>(r: &mut R) -> Result<DistributionField<T>> {
    let h = read_header(r, FIELD_MAGIC)?;
    let x = SpatialGrid::new(h.dim_x as usize, h.n_x as usize, T::lit(h.l_x))?;
    let v = VelocityGrid::new(h.n_v as usize, T::lit(h.l_v))?;
    let grid = PhaseGrid::new(x, v);
    let values = read_payload(r, grid.len())?;
    DistributionField::new(grid, values.into_iter().map(T::lit).collect(), T::lit(h.time))
}

pub fn save_field<T: Real>(path: &std::path::Path, f: &DistributionField<T>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_field(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn load_field<T: Real>(path: &std::path::Path) -> Result<DistributionField<T>> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_field(&mut r)
}

pub fn write_coefficients<T: Real, W: Write>(w: &mut W, c: &CoefficientField<T>) -> Result<()> {
    write_header(
        w,
        COEFF_MAGIC,
        &Header {
            time: c.time.to_f64_lossy(),
            dim_x: 0,
            n_x: 1,
            l_x: c.x_cell as f64,
            n_v: c.grid.n as u64,
            l_v: c.grid.l.to_f64_lossy(),
        },
    )?;
    let mut buf = Vec::with_capacity(c.len() * 80);
    for i in 0..c.len() {
        for v in c.a[i].iter().chain(c.b[i].iter()).chain(std::iter::once(&c.c[i])) {
            buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_coefficients<T: Real, R: Read>(r: &mut R) -> Result<CoefficientField<T>> {
    let h = read_header(r, COEFF_MAGIC)?;
    let grid = VelocityGrid::new(h.n_v as usize, T::lit(h.l_v))?;
    let raw = read_payload(r, grid.len() * 10)?;
    let mut out = CoefficientField::zeros(grid);
    out.time = T::lit(h.time);
    out.x_cell = h.l_x as usize;
    for (i, chunk) in raw.chunks_exact(10).enumerate() {
        let t: Vec<T> = chunk.iter().map(|v| T::lit(*v)).collect();
        out.a[i] = [t[0], t[1], t[2], t[3], t[4], t[5]];
        out.b[i] = [t[6], t[7], t[8]];
        out.c[i] = t[9];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_bit_exact() {
        let g = PhaseGrid::new(SpatialGrid::new(1, 2, 3.0).unwrap(), VelocityGrid::new(4, 1.5).unwrap());
        let mut f = DistributionField::<f64>::zeros(g);
        f.time = 0.25;
        f.values[1] = 7.0;
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(&buf[..8], b"LNDF0001");
        assert_eq!(f64::from_le_bytes(buf[8..16].try_into().unwrap()), 0.25);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[24..32].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(buf[32..40].try_into().unwrap()), 3.0);
        assert_eq!(u64::from_le_bytes(buf[40..48].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(buf[48..56].try_into().unwrap()), 1.5);
        assert_eq!(buf.len(), 56 + 8 * 2 * 64);
        assert_eq!(f64::from_le_bytes(buf[64..72].try_into().unwrap()), 7.0);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let g = PhaseGrid::homogeneous(4, 1.0).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &DistributionField::<f64>::zeros(g)).unwrap();
        let mut bad = buf.clone();
        bad[3] = b'X';
        assert!(matches!(read_field::<f64, _>(&mut bad.as_slice()), Err(Error::Format(_))));
        let short = &buf[..buf.len() - 8];
        assert!(read_field::<f64, _>(&mut &short[..]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_field::<f64, _>(&mut long.as_slice()).is_err());
    }

    #[test]
    fn coefficient_container_round_trip() {
        let grid = VelocityGrid::new(4, 1.0).unwrap();
        let mut c = CoefficientField::<f64>::zeros(grid);
        c.x_cell = 3;
        c.time = 1.5;
        c.a[5] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        c.b[5] = [7.0, 8.0, 9.0];
        c.c[5] = 10.0;
        let mut buf = Vec::new();
        write_coefficients(&mut buf, &c).unwrap();
        assert_eq!(&buf[..8], b"LNDC0001");
        let back: CoefficientField<f64> = read_coefficients(&mut buf.as_slice()).unwrap();
        assert_eq!(back, c);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn field_round_trip(vals in prop::collection::vec(0.0f64..1e3, 2 * 64), t in 0.0f64..10.0) {
            let g = PhaseGrid::new(SpatialGrid::new(1, 2, 2.0).unwrap(), VelocityGrid::new(4, 1.0).unwrap());
            let f = DistributionField::new(g, vals, t).unwrap();
            let mut buf = Vec::new();
            write_field(&mut buf, &f).unwrap();
            let back: DistributionField<f64> = read_field(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
