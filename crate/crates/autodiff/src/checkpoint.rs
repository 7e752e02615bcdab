//! Binary parameter checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic   8 bytes  "CADRNCKP"
//! version u32
//! count   u32
//! repeated count times:
//!   name_len u32, name utf-8 bytes
//!   rank u32, dims u64 * rank
//!   data f64 * product(dims)
//! ```
//!
//! Values are stored as raw IEEE-754 bits so a round trip is exact.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Result, TensorError};
use crate::params::ParamSet;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"CADRNCKP";
pub const VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> TensorError {
    TensorError::Checkpoint(e.to_string())
}

pub fn write_params<W: Write>(params: &ParamSet, mut w: W) -> Result<()> {
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_u32::<LittleEndian>(VERSION).map_err(io_err)?;
    w.write_u32::<LittleEndian>(params.len() as u32).map_err(io_err)?;
    for (name, t) in params.iter() {
        w.write_u32::<LittleEndian>(name.len() as u32).map_err(io_err)?;
        w.write_all(name.as_bytes()).map_err(io_err)?;
        w.write_u32::<LittleEndian>(t.rank() as u32).map_err(io_err)?;
        for &d in t.shape() {
            w.write_u64::<LittleEndian>(d as u64).map_err(io_err)?;
        }
        for &x in t.data() {
            w.write_f64::<LittleEndian>(x).map_err(io_err)?;
        }
    }
    Ok(())
}

pub fn read_params<R: Read>(mut r: R) -> Result<ParamSet> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(TensorError::Checkpoint("bad magic".into()));
    }
    let version = r.read_u32::<LittleEndian>().map_err(io_err)?;
    if version != VERSION {
        return Err(TensorError::Checkpoint(format!(
            "unsupported version {version} (expected {VERSION})"
        )));
    }
    let count = r.read_u32::<LittleEndian>().map_err(io_err)?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let len = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(io_err)?;
        let name = String::from_utf8(name).map_err(|e| TensorError::Checkpoint(e.to_string()))?;
        let rank = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
        let shape = (0..rank)
            .map(|_| r.read_u64::<LittleEndian>().map(|d| d as usize))
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(io_err)?;
        let numel: usize = shape.iter().product();
        let mut data = vec![0.0; numel];
        r.read_f64_into::<LittleEndian>(&mut data).map_err(io_err)?;
        params.insert(name, Tensor::new(shape, data)?);
    }
    Ok(params)
}

pub fn save(params: &ParamSet, path: &std::path::Path) -> Result<()> {
    let mut buf = Vec::new();
    write_params(params, &mut buf)?;
    std::fs::write(path, buf).map_err(io_err)
}

pub fn load(path: &std::path::Path) -> Result<ParamSet> {
    let bytes = std::fs::read(path).map_err(io_err)?;
    read_params(bytes.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut p = ParamSet::new();
        p.insert("a", Tensor::new(vec![2, 2], vec![0.1, -0.0, f64::MIN_POSITIVE, 1e300]).unwrap());
        p.insert("scalar", Tensor::scalar(std::f64::consts::PI));
        let mut buf = Vec::new();
        write_params(&p, &mut buf).unwrap();
        let back = read_params(buf.as_slice()).unwrap();
        assert_eq!(back.names().collect::<Vec<_>>(), vec!["a", "scalar"]);
        for ((_, x), (_, y)) in p.iter().zip(back.iter()) {
            assert_eq!(x.shape(), y.shape());
            let xb: Vec<u64> = x.data().iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u64> = y.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
    }

    #[test]
    fn rejects_corrupt_headers() {
        assert!(read_params(&b"NOTACKPT\x01\0\0\0\0\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        write_params(&ParamSet::new(), &mut buf).unwrap();
        buf[8] = 9;
        assert!(matches!(read_params(buf.as_slice()), Err(TensorError::Checkpoint(m)) if m.contains("version")));
    }

    #[test]
    fn truncated_file_is_an_error() {
        let mut p = ParamSet::new();
        p.insert("a", Tensor::zeros(&[4]));
        let mut buf = Vec::new();
        write_params(&p, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_params(buf.as_slice()).is_err());
    }
}
