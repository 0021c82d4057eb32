//! File formats: the binary tensor dump (little-endian header `d, dims`
//! followed by raw values) and a plain-text symmetric band format.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dense::BandMat;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Write a tensor: `u32 d`, then `d × u64` dimensions, then the values as
/// little-endian `f64` in the tensor's native (mode-0 fastest) order.
pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&(t.order() as u32).to_le_bytes())?;
    for &n in t.dims() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for &x in t.data() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let d = u32::from_le_bytes(b4) as usize;
    if d == 0 || d > 16 {
        return Err(Error::Parse(format!("implausible tensor order {d}")));
    }
    let mut dims = Vec::with_capacity(d);
    let mut b8 = [0u8; 8];
    for _ in 0..d {
        r.read_exact(&mut b8)?;
        dims.push(u64::from_le_bytes(b8) as usize);
    }
    let len: usize = dims.iter().product();
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut b8)?;
        data.push(f64::from_le_bytes(b8));
    }
    Tensor::from_data(&dims, data)
}

/// Load a square symmetric matrix from a tensor dump (order-2, square).
pub fn read_square_matrix(path: &Path) -> Result<crate::dense::Mat> {
    let t = read_tensor(path)?;
    if t.order() != 2 || t.dims()[0] != t.dims()[1] {
        return Err(Error::Parse(format!(
            "expected a square order-2 dump, got dims {:?}",
            t.dims()
        )));
    }
    Ok(t.to_mat())
}

/// Text band format: a header line `n bandwidth`, then `n` lines; line `i`
/// holds the upper-triangle band entries `A[i][i], A[i][i+1], …` truncated
/// at the matrix edge.
pub fn write_band_text(path: &Path, b: &BandMat) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{} {}", b.n, b.bw)?;
    for i in 0..b.n {
        let hi = (i + b.bw).min(b.n - 1);
        let row: Vec<String> = (i..=hi).map(|j| format!("{:.17e}", b.get(i, j))).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_band_text(path: &Path) -> Result<BandMat> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty band file".into()))??;
    let mut it = header.split_whitespace();
    let n: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse("band header: missing n".into()))?;
    let bw: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse("band header: missing bandwidth".into()))?;
    let mut b = BandMat::zeros(n, bw);
    for i in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("band file truncated at row {i}")))??;
        let hi = (i + bw).min(n - 1);
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Parse(format!("bad number '{s}' in row {i}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != hi - i + 1 {
            return Err(Error::Parse(format!(
                "row {i}: expected {} entries, got {}",
                hi - i + 1,
                vals.len()
            )));
        }
        for (off, v) in vals.into_iter().enumerate() {
            b.set(i, i + off, v);
        }
    }
    Ok(b)
}
