//! Snapshot persistence.
//!
//! Binary layout, all little-endian:
//!
//! | offset | size | field                               |
//! |-------:|-----:|-------------------------------------|
//! | 0      | 4    | magic `b"MLTD"`                     |
//! | 4      | 2    | format version, `u16` = 1           |
//! | 6      | 2    | reserved, zero                      |
//! | 8      | 4    | `J`, `u32`                          |
//! | 12     | 4    | `n = 2J - 1`, `u32`                 |
//! | 16     | 8    | time, `f64`                         |
//! | 24     | 8    | alpha, `f64`                        |
//! | 32     | 8    | sigma, `f64`                        |
//! | 40     | 32   | `v_min, v_max, w_min, w_max`, `f64` |
//! | 72     | 8n²  | values, `f64`, row-major (`w` rows) |

use std::io::{self, Read, Write};

use ndarray::Array2;

use super::{DensityField, Domain, Grid};
use crate::stable_noise::StableSpec;

pub const BINARY_MAGIC: [u8; 4] = *b"MLTD";
pub const BINARY_VERSION: u16 = 1;
pub const BINARY_HEADER_LEN: usize = 72;

/// Writes `i,j,v,w,p` rows; `i`, `j` are the signed node indices along `v`
/// and `w`, `p` the density in original units.
pub fn write_csv<W: Write>(field: &DensityField, mut out: W) -> io::Result<()> {
    writeln!(out, "i,j,v,w,p")?;
    let n = field.grid.n();
    for r in 0..n {
        for c in 0..n {
            let s = field.node_state(r, c);
            writeln!(
                out,
                "{},{},{},{},{:e}",
                field.grid.node_index(c),
                field.grid.node_index(r),
                s.v,
                s.w,
                field.original_value(r, c)
            )?;
        }
    }
    Ok(())
}

pub fn write_binary<W: Write>(field: &DensityField, noise: &StableSpec, mut out: W) -> io::Result<()> {
    let mut header = Vec::with_capacity(BINARY_HEADER_LEN);
    header.extend_from_slice(&BINARY_MAGIC);
    header.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    header.extend_from_slice(&0u16.to_le_bytes());
    header.extend_from_slice(&(field.grid.j as u32).to_le_bytes());
    header.extend_from_slice(&(field.grid.n() as u32).to_le_bytes());
    let d = field.domain;
    for x in [
        field.time,
        noise.alpha,
        noise.sigma,
        d.v_min,
        d.v_max,
        d.w_min,
        d.w_max,
    ] {
        header.extend_from_slice(&x.to_le_bytes());
    }
    debug_assert_eq!(header.len(), BINARY_HEADER_LEN);
    out.write_all(&header)?;
    let mut body = Vec::with_capacity(8 * field.values.len());
    for x in field.values.iter() {
        body.extend_from_slice(&x.to_le_bytes());
    }
    out.write_all(&body)
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Reads a snapshot back, returning the field and the noise it was run with.
pub fn read_binary<R: Read>(mut input: R) -> io::Result<(DensityField, StableSpec)> {
    let mut header = [0u8; BINARY_HEADER_LEN];
    input.read_exact(&mut header)?;
    if header[0..4] != BINARY_MAGIC {
        return Err(invalid("bad magic"));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != BINARY_VERSION {
        return Err(invalid(format!("unsupported version {version}")));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let j = u32_at(8) as usize;
    let n = u32_at(12) as usize;
    let grid = Grid::new(j).map_err(|e| invalid(e.to_string()))?;
    if grid.n() != n {
        return Err(invalid(format!("n = {n} does not match J = {j}")));
    }
    let domain = Domain::new(f64_at(40), f64_at(48), f64_at(56), f64_at(64))
        .map_err(|e| invalid(e.to_string()))?;
    let noise = StableSpec {
        alpha: f64_at(24),
        sigma: f64_at(32),
    };
    let mut body = vec![0u8; 8 * n * n];
    input.read_exact(&mut body)?;
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let values = Array2::from_shape_vec((n, n), values).map_err(|e| invalid(e.to_string()))?;
    Ok((
        DensityField {
            grid,
            domain,
            time: f64_at(16),
            values,
        },
        noise,
    ))
}
