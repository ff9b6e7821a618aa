//! Plain-text and binary dumps of fields, histograms, maps and profiles.
//!
//! CSV files carry a header row and one sample per line; numbers are written
//! with Rust's shortest round-trip formatting, so parsing a dump gives back
//! the exact doubles. Arrays use a small binary container:
//!
//! ```text
//! magic "MDLA" | version u32 | rank u32 | shape u64 × rank | f64 × Π shape
//! ```
//!
//! with every integer and float little-endian.

use std::io::{Read, Write};

use crate::competitors::SpecReport;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, VectorField};
use crate::madelung::{DriftField, FluidCouple};
use crate::benamou_brenier::TransportPlan1D;
use crate::schrodinger::WaveField;

pub const ARRAY_MAGIC: [u8; 4] = *b"MDLA";
pub const ARRAY_VERSION: u32 = 1;

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn write_grid_rows<W: Write>(
    out: W,
    grid: &GridSpec,
    header: &[&str],
    row: impl Fn(usize, usize) -> Vec<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    let xs = grid.xs();
    for j in 0..grid.n_times() {
        let t = grid.t(j);
        for (k, &x) in xs.iter().enumerate() {
            let mut rec = vec![t.to_string(), x.to_string()];
            rec.extend(row(j, k).into_iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `t,x,value`.
pub fn write_scalar_csv<W: Write>(out: W, f: &ScalarField) -> Result<()> {
    write_grid_rows(out, f.grid(), &["t", "x", "value"], |j, k| vec![f.slice(j)[k]])
}

/// `t,x,value` for a one-component vector field.
pub fn write_vector_csv<W: Write>(out: W, f: &VectorField) -> Result<()> {
    write_grid_rows(out, f.grid(), &["t", "x", "value"], |j, k| vec![f.slice(j)[k]])
}

/// `t,x,re,im`.
pub fn write_wave_csv<W: Write>(out: W, psi: &WaveField) -> Result<()> {
    write_grid_rows(out, psi.grid(), &["t", "x", "re", "im"], |j, k| {
        let c = psi.slice(j)[k];
        vec![c.re, c.im]
    })
}

/// `t,x,rho,v`.
pub fn write_couple_csv<W: Write>(out: W, c: &FluidCouple) -> Result<()> {
    write_grid_rows(out, c.grid(), &["t", "x", "rho", "v"], |j, k| {
        vec![c.rho().slice(j)[k], c.v().slice(j)[k]]
    })
}

/// `t,x,b`.
pub fn write_drift_csv<W: Write>(out: W, b: &DriftField) -> Result<()> {
    write_grid_rows(out, b.grid(), &["t", "x", "b"], |j, k| vec![b.b.slice(j)[k]])
}

/// `t,x,histogram,rho` for each `(t, histogram, rho)` triple.
pub fn write_histogram_csv<W: Write>(out: W, grid: &GridSpec, rows: &[(f64, Vec<f64>, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "histogram", "rho"]).map_err(csv_err)?;
    let xs = grid.xs();
    for (t, h, r) in rows {
        if h.len() != grid.n_x || r.len() != grid.n_x {
            return Err(Error::ShapeMismatch {
                expected: grid.n_x,
                actual: h.len().min(r.len()),
            });
        }
        for k in 0..grid.n_x {
            w.write_record([t.to_string(), xs[k].to_string(), h[k].to_string(), r[k].to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `x,T,phi`.
pub fn write_transport_csv<W: Write>(out: W, plan: &TransportPlan1D) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "T", "phi"]).map_err(csv_err)?;
    for ((x, t), p) in plan.grid.xs().iter().zip(&plan.map_samples).zip(&plan.potential_samples) {
        w.write_record([x.to_string(), t.to_string(), p.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `spec,y,A_Q,error_radius`, one line per profile point.
pub fn write_profile_csv<W: Write>(out: W, reports: &[SpecReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["spec", "y", "A_Q", "error_radius"]).map_err(csv_err)?;
    for r in reports {
        for (y, a, e) in &r.y_profile {
            w.write_record([r.seed.to_string(), y.to_string(), a.to_string(), e.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a `t,x,value` dump back onto `grid`.
pub fn read_scalar_csv<R: Read>(input: R, grid: GridSpec) -> Result<ScalarField> {
    let mut r = csv::Reader::from_reader(input);
    let mut values = Vec::with_capacity(grid.n_times() * grid.n_x);
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let v = rec
            .get(2)
            .ok_or_else(|| Error::Format("missing value column".into()))?
            .parse::<f64>()
            .map_err(|e| Error::Format(e.to_string()))?;
        values.push(v);
    }
    ScalarField::new(grid, values)
}

/// Writes an n-dimensional array in the binary container.
pub fn write_array<W: Write>(mut out: W, shape: &[usize], data: &[f64]) -> Result<()> {
    let expected: usize = shape.iter().product();
    if data.len() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            actual: data.len(),
        });
    }
    out.write_all(&ARRAY_MAGIC)?;
    out.write_all(&ARRAY_VERSION.to_le_bytes())?;
    out.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &s in shape {
        out.write_all(&(s as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(8 * data.len());
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Reads an array written by [`write_array`], returning `(shape, data)`.
pub fn read_array<R: Read>(mut input: R) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if magic != ARRAY_MAGIC {
        return Err(Error::Format("not an array file (bad magic)".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != ARRAY_VERSION {
        return Err(Error::Format(format!("unsupported array version {version}")));
    }
    input.read_exact(&mut word)?;
    let rank = u32::from_le_bytes(word) as usize;
    let mut shape = Vec::with_capacity(rank);
    let mut long = [0u8; 8];
    for _ in 0..rank {
        input.read_exact(&mut long)?;
        shape.push(u64::from_le_bytes(long) as usize);
    }
    let len = shape
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .ok_or_else(|| Error::Format("array shape overflows".into()))?;
    let mut raw = Vec::new();
    input.read_to_end(&mut raw)?;
    if raw.len() != 8 * len {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            8 * len,
            raw.len()
        )));
    }
    let data = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((shape, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_csv_round_trips_exactly() {
        let grid = GridSpec::new(-3.0, 3.0, 16, 4).unwrap();
        let f = ScalarField::from_fn(grid, |x, t| (x * 1.1).sin() * (1.0 + t) / 3.0).unwrap();
        let mut buf = Vec::new();
        write_scalar_csv(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,value\n"));
        assert_eq!(text.lines().count(), 1 + 5 * 16);
        let back = read_scalar_csv(&buf[..], grid).unwrap();
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn corrupted_arrays_are_rejected() {
        let mut buf = Vec::new();
        write_array(&mut buf, &[2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(read_array(&bad_magic[..]), Err(Error::Format(_))));
        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(read_array(truncated), Err(Error::Format(_))));
        assert!(write_array(Vec::new(), &[3], &[1.0]).is_err());
    }

    #[test]
    fn array_header_layout() {
        let mut buf = Vec::new();
        write_array(&mut buf, &[3], &[0.5, -1.0, 2.0]).unwrap();
        assert_eq!(&buf[..4], b"MDLA");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[12..20].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(buf[20..28].try_into().unwrap()), 0.5);
        assert_eq!(buf.len(), 20 + 24);
    }

    proptest! {
        #[test]
        fn arrays_round_trip(shape in proptest::collection::vec(1usize..5, 0..4), seed in any::<u64>()) {
            let len: usize = shape.iter().product();
            let data: Vec<f64> = (0..len)
                .map(|i| f64::from_bits(seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) >> 2))
                .collect();
            let mut buf = Vec::new();
            write_array(&mut buf, &shape, &data).unwrap();
            let (s, d) = read_array(&buf[..]).unwrap();
            prop_assert_eq!(s, shape);
            prop_assert_eq!(
                d.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                data.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
