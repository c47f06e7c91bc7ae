//! Binary tensor interchange format.
//!
//! Layout: magic bytes `ETEN`, little-endian u32 order `N`, `N` little-endian
//! u32 extents, then the raw little-endian f64 payload in `ivec` order.

use std::io::{Read, Write};

use crate::error::{EdrError, Result};
use crate::tensor::{DenseTensor, Shape};

const MAGIC: &[u8; 4] = b"ETEN";

pub fn write_tensor(w: &mut impl Write, t: &DenseTensor) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(t.order() as u32).to_le_bytes())?;
    for &d in t.shape().dims() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor(r: &mut impl Read) -> Result<DenseTensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(EdrError::Format("bad ETEN magic".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let order = u32::from_le_bytes(b4) as usize;
    let mut dims = Vec::with_capacity(order);
    for _ in 0..order {
        r.read_exact(&mut b4)?;
        dims.push(u32::from_le_bytes(b4) as usize);
    }
    let shape = Shape::new(dims)?;
    let mut data = vec![0.0f64; shape.num_elems()];
    let mut b8 = [0u8; 8];
    for v in &mut data {
        r.read_exact(&mut b8).map_err(|_| {
            EdrError::Format("truncated ETEN payload".into())
        })?;
        *v = f64::from_le_bytes(b8);
    }
    DenseTensor::new(shape, data)
}

pub fn write_tensor_file(path: &std::path::Path, t: &DenseTensor) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_tensor(&mut f, t)
}

pub fn read_tensor_file(path: &std::path::Path) -> Result<DenseTensor> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_tensor(&mut f)
}
