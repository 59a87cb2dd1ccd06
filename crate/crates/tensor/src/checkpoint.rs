//! Named-tensor checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     8 bytes  "GFCKPT01"
//! count     u32      number of tensors
//! per tensor:
//!   name_len  u32
//!   name      name_len bytes of UTF-8
//!   ndim      u32
//!   dims      ndim × u64
//!   data      product(dims) × f64 (IEEE 754 binary64)
//! ```

use std::io::{Read, Write};

use crate::{Result, Tensor, TensorError};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GFCKPT01";

fn io(e: std::io::Error) -> TensorError {
    TensorError::Checkpoint(e.to_string())
}

pub fn write_checkpoint<W: Write>(mut out: W, tensors: &[(String, Tensor)]) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    out.write_all(&(tensors.len() as u32).to_le_bytes()).map_err(io)?;
    for (name, t) in tensors {
        out.write_all(&(name.len() as u32).to_le_bytes()).map_err(io)?;
        out.write_all(name.as_bytes()).map_err(io)?;
        out.write_all(&(t.shape().len() as u32).to_le_bytes()).map_err(io)?;
        for &d in t.shape() {
            out.write_all(&(d as u64).to_le_bytes()).map_err(io)?;
        }
        let mut buf = Vec::with_capacity(t.len() * 8);
        for x in t.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        out.write_all(&buf).map_err(io)?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(io)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Vec<(String, Tensor)>> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(io)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(TensorError::Checkpoint("bad magic".to_string()));
    }
    let count = read_u32(&mut input)?;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let len = read_u32(&mut input)? as usize;
        let mut name = vec![0u8; len];
        input.read_exact(&mut name).map_err(io)?;
        let name = String::from_utf8(name).map_err(|e| TensorError::Checkpoint(e.to_string()))?;
        let ndim = read_u32(&mut input)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let mut b = [0u8; 8];
            input.read_exact(&mut b).map_err(io)?;
            shape.push(u64::from_le_bytes(b) as usize);
        }
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 8];
        input.read_exact(&mut raw).map_err(io)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        tensors.push((name, Tensor::new(shape, data)?));
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest).map_err(io)?;
    if !rest.is_empty() {
        return Err(TensorError::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    Ok(tensors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_exact_layout() {
        let tensors = vec![
            ("w".to_string(), Tensor::matrix(1, 2, vec![1.5, -0.25]).unwrap()),
            ("b".to_string(), Tensor::vector(vec![])),
        ];
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &tensors).unwrap();
        assert_eq!(&buf[..8], b"GFCKPT01");
        assert_eq!(&buf[8..12], &2u32.to_le_bytes());
        // magic + count + (4 + 1 + 4 + 16 + 16) + (4 + 1 + 4 + 8)
        assert_eq!(buf.len(), 12 + 41 + 17);
        assert_eq!(read_checkpoint(&buf[..]).unwrap(), tensors);
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&bad[..]).is_err());
    }
}
