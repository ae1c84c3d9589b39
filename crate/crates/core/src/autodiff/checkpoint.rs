//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   8 bytes  "PSQCKPT\n"
//! version u32      currently 1
//! count   u32      number of entries
//! entry*  name_len u32, name (UTF-8), rank u32, dims u64 * rank,
//!         values f64 * product(dims)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PSQCKPT\n";
pub const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut w: W, entries: &[(String, Tensor)]) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, t) in entries {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>> {
    let magic: [u8; 8] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let count = read_u32(&mut r)?;
    let mut entries = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|e| Error::Checkpoint(format!("truncated entry name: {e}")))?;
        let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("entry name is not UTF-8".into()))?;
        let rank = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u64::from_le_bytes(read_array(&mut r)?) as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            data.push(f64::from_le_bytes(read_array(&mut r)?));
        }
        let t = Tensor::new(shape, data).map_err(|e| Error::Checkpoint(format!("entry {name}: {e}")))?;
        entries.push((name, t));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::io("reading checkpoint", e))? != 0 {
        return Err(Error::Checkpoint("trailing bytes after last entry".into()));
    }
    Ok(entries)
}

pub fn save_checkpoint(path: &Path, entries: &[(String, Tensor)]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    write_checkpoint(std::io::BufWriter::new(file), entries)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    read_checkpoint(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<(String, Tensor)> {
        vec![
            ("w".into(), Tensor::from_rows(&[[1.0, -0.0], [f64::MIN_POSITIVE, 3.5e300]]).unwrap()),
            ("b".into(), Tensor::row(vec![0.1, 0.2, 0.3])),
        ]
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample()).unwrap();
        let back = read_checkpoint(&buf[..]).unwrap();
        for ((n1, t1), (n2, t2)) in sample().iter().zip(&back) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            let bits1: Vec<u64> = t1.data().iter().map(|v| v.to_bits()).collect();
            let bits2: Vec<u64> = t2.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits1, bits2);
        }
    }

    #[test]
    fn rejects_unknown_version_and_truncation() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample()).unwrap();
        let mut bumped = buf.clone();
        bumped[8..12].copy_from_slice(&2u32.to_le_bytes());
        let err = read_checkpoint(&bumped[..]).unwrap_err().to_string();
        assert!(err.contains("version 2"), "{err}");
        assert!(read_checkpoint(&buf[..buf.len() - 3]).is_err());
        assert!(read_checkpoint(&b"garbage!"[..]).is_err());
    }
}
