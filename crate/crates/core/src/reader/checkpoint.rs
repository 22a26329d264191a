//! Binary checkpoint layout, all integers little-endian `u32`:
//!
//! ```text
//! magic "WMRCKPT\0" | version | len, config JSON | len, vocab JSON |
//! count | per parameter: len, name, rows, cols, rows*cols f32 (row-major)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::tape::ParamStore;
use super::{Reader, ReaderConfig, Vocab};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"WMRCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(out: &mut impl Write, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{v} does not fit in u32")))?;
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_bytes(out: &mut impl Write, bytes: &[u8]) -> Result<()> {
    put_u32(out, bytes.len())?;
    out.write_all(bytes)?;
    Ok(())
}

fn get_u32(input: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 4];
    input
        .read_exact(&mut b)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn get_bytes(input: &mut impl Read) -> Result<Vec<u8>> {
    let len = get_u32(input)?;
    let mut buf = Vec::new();
    input.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(Error::Checkpoint("truncated checkpoint".into()));
    }
    Ok(buf)
}

pub fn write_checkpoint(reader: &Reader, mut out: impl Write) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    put_bytes(&mut out, &serde_json::to_vec(&reader.config)?)?;
    put_bytes(&mut out, &serde_json::to_vec(&reader.vocab)?)?;
    put_u32(&mut out, reader.params.len())?;
    for (name, value) in reader.params.iter() {
        put_bytes(&mut out, name.as_bytes())?;
        put_u32(&mut out, value.nrows())?;
        put_u32(&mut out, value.ncols())?;
        let mut block = Vec::with_capacity(value.len() * 4);
        for &x in value.iter() {
            block.extend_from_slice(&(x as f32).to_le_bytes());
        }
        out.write_all(&block)?;
    }
    Ok(())
}

/// Rebuilds a reader with one of the built-in encoders.
pub fn read_checkpoint(mut input: impl Read) -> Result<Reader> {
    let mut magic = [0u8; 8];
    input
        .read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("not a checkpoint".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint".into()));
    }
    let version = get_u32(&mut input)? as u32;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let config: ReaderConfig = serde_json::from_slice(&get_bytes(&mut input)?)?;
    let vocab: Vocab = serde_json::from_slice(&get_bytes(&mut input)?)?;
    let count = get_u32(&mut input)?;
    let mut store = ParamStore::default();
    for _ in 0..count {
        let name = String::from_utf8(get_bytes(&mut input)?)
            .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
        let rows = get_u32(&mut input)?;
        let cols = get_u32(&mut input)?;
        let mut raw = vec![0u8; rows * cols * 4];
        input
            .read_exact(&mut raw)
            .map_err(|_| Error::Checkpoint(format!("truncated block for {name}")))?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let value = Array2::from_shape_vec((rows, cols), values).expect("length checked");
        store.add(name, value);
    }
    let mut reader = Reader::new(config, vocab)?;
    if store.len() != reader.params.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} parameters, model expects {}",
            store.len(),
            reader.params.len()
        )));
    }
    reader.set_params(&store)?;
    Ok(reader)
}

pub fn save_checkpoint(reader: &Reader, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(reader, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Reader> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Reader {
        let config = ReaderConfig {
            hidden: 8,
            layers: 1,
            heads: 2,
            ..Default::default()
        };
        Reader::new(config, Vocab::build(["a", "b"], 1)).unwrap()
    }

    #[test]
    fn round_trip_to_f32_precision() {
        let r = small();
        let mut buf = Vec::new();
        write_checkpoint(&r, &mut buf).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.config, r.config);
        assert_eq!(back.vocab, r.vocab);
        for ((_, a), (_, b)) in back.params.iter().zip(r.params.iter()) {
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-6 * y.abs().max(1.0)));
        }
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        assert!(read_checkpoint(&b"nonsense"[..]).is_err());
        let mut buf = Vec::new();
        write_checkpoint(&small(), &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_checkpoint(buf.as_slice()), Err(Error::Checkpoint(_))));
        let mut wrong = Vec::new();
        write_checkpoint(&small(), &mut wrong).unwrap();
        wrong[8] = 9;
        assert!(read_checkpoint(wrong.as_slice()).is_err());
    }
}
