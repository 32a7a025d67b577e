//! Flat binary parameter archive.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! u32 format version
//! u32 parameter count
//! per parameter:
//!   u32 name length, name bytes (UTF-8)
//!   u32 rank, rank x u64 dims
//!   product(dims) x f64 payload
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, TensorError};
use crate::params::ParamStore;
use crate::tensor::Tensor;

pub const FORMAT_VERSION: u32 = 1;

pub fn write_params<W: Write>(store: &ParamStore, mut out: W) -> Result<()> {
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(store.len() as u32).to_le_bytes())?;
    for (_, p) in store.iter() {
        let name = p.name.as_bytes();
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name)?;
        let shape = p.value.shape();
        out.write_all(&(shape.len() as u32).to_le_bytes())?;
        for &d in shape {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        for &x in p.value.data() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn to_bytes(store: &ParamStore) -> Vec<u8> {
    let mut buf = Vec::new();
    write_params(store, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

/// Reads an archive into named tensors, in file order.
pub fn read_params<R: Read>(mut input: R) -> Result<Vec<(String, Tensor)>> {
    let version = read_u32(&mut input)?;
    if version != FORMAT_VERSION {
        return Err(TensorError::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let count = read_u32(&mut input)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut input)? as usize;
        let mut name = vec![0u8; name_len];
        input.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| TensorError::Checkpoint("parameter name is not UTF-8".into()))?;
        let rank = read_u32(&mut input)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut b = [0u8; 8];
            input.read_exact(&mut b)?;
            shape.push(u64::from_le_bytes(b) as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut b = [0u8; 8];
        for _ in 0..n {
            input.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Overwrites the values of `store` with those in the archive. Every
/// parameter in the store must be present with a matching shape.
pub fn load_into<R: Read>(store: &mut ParamStore, input: R) -> Result<()> {
    let records = read_params(input)?;
    let mut seen = vec![false; store.len()];
    for (name, value) in records {
        let id = store
            .id_of(&name)
            .ok_or_else(|| TensorError::UnknownParameter(name.clone()))?;
        let p = store.get_mut(id);
        if p.value.shape() != value.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "load checkpoint",
                left: p.value.shape().to_vec(),
                right: value.shape().to_vec(),
            });
        }
        p.value = value;
        seen[id.index()] = true;
    }
    if let Some((_, p)) = store.iter().find(|(id, _)| !seen[id.index()]) {
        return Err(TensorError::Checkpoint(format!(
            "parameter `{}` missing from checkpoint",
            p.name
        )));
    }
    Ok(())
}

pub fn save(store: &ParamStore, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(store))?;
    Ok(())
}

pub fn load(store: &mut ParamStore, path: impl AsRef<Path>) -> Result<()> {
    let bytes = fs::read(path)?;
    load_into(store, bytes.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_record_layout() {
        let mut store = ParamStore::new();
        store.add("ab", Tensor::row(vec![1.5, -2.0])).unwrap();
        let bytes = to_bytes(&store);
        assert_eq!(&bytes[0..4], &1u32.to_le_bytes());
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..14], b"ab");
        assert_eq!(&bytes[14..18], &2u32.to_le_bytes());
        assert_eq!(&bytes[18..26], &1u64.to_le_bytes());
        assert_eq!(&bytes[26..34], &2u64.to_le_bytes());
        assert_eq!(&bytes[34..42], &1.5f64.to_le_bytes());
        assert_eq!(bytes.len(), 50);
    }

    #[test]
    fn load_restores_values() {
        let mut a = ParamStore::new();
        a.add("w", Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap())
            .unwrap();
        let bytes = to_bytes(&a);
        let mut b = ParamStore::new();
        let id = b.add_zeros("w", &[2, 2]).unwrap();
        load_into(&mut b, bytes.as_slice()).unwrap();
        assert_eq!(b.value(id).data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut a = ParamStore::new();
        a.add_zeros("w", &[2, 2]).unwrap();
        let bytes = to_bytes(&a);
        let mut b = ParamStore::new();
        b.add_zeros("w", &[1, 4]).unwrap();
        assert!(load_into(&mut b, bytes.as_slice()).is_err());
    }

    #[test]
    fn truncated_archive_is_error() {
        let mut a = ParamStore::new();
        a.add_zeros("w", &[3]).unwrap();
        let bytes = to_bytes(&a);
        assert!(read_params(&bytes[..bytes.len() - 1]).is_err());
    }
}
