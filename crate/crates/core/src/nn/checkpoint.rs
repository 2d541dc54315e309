use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::weights::{ModelWeights, Weights, TENSORS};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FSCK";
const VERSION: u32 = 1;

/// Layout, little-endian: `"FSCK"`, version u32, input length u32, tensor
/// count u32, then per tensor a u16 name length, the UTF-8 name, a u8 rank,
/// one u32 per dimension and the f32 values.
pub fn write_checkpoint<W: Write>(w: &mut W, weights: &ModelWeights) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(weights.input_len as u32)?;
    w.write_u32::<LittleEndian>(TENSORS.len() as u32)?;
    for (spec, values) in weights.iter() {
        w.write_u16::<LittleEndian>(spec.name.len() as u16)?;
        w.write_all(spec.name.as_bytes())?;
        w.write_u8(spec.shape.len() as u8)?;
        for &d in spec.shape {
            w.write_u32::<LittleEndian>(d as u32)?;
        }
        for &v in values {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<ModelWeights> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a weight checkpoint".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let input_len = r.read_u32::<LittleEndian>()? as usize;
    let count = r.read_u32::<LittleEndian>()? as usize;
    if count != TENSORS.len() {
        return Err(Error::Format(format!("expected {} tensors, found {count}", TENSORS.len())));
    }
    let mut tensors = Vec::with_capacity(count);
    for spec in TENSORS {
        let name_len = r.read_u16::<LittleEndian>()? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        if name != spec.name.as_bytes() {
            return Err(Error::Format(format!(
                "expected tensor {}, found {}",
                spec.name,
                String::from_utf8_lossy(&name)
            )));
        }
        let rank = r.read_u8()? as usize;
        let dims = (0..rank)
            .map(|_| r.read_u32::<LittleEndian>().map(|d| d as usize))
            .collect::<std::io::Result<Vec<_>>>()?;
        if dims != spec.shape {
            return Err(Error::Format(format!("tensor {} has shape {dims:?}, expected {:?}", spec.name, spec.shape)));
        }
        let mut values = vec![0f32; spec.len()];
        r.read_f32_into::<LittleEndian>(&mut values)?;
        tensors.push(values);
    }
    Weights::from_tensors(input_len, tensors)
}

pub fn save_checkpoint(path: impl AsRef<Path>, weights: &ModelWeights) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, weights)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelWeights> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::weights::init_model;
    use crate::rng::substream;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut w: ModelWeights = init_model(64, &mut substream(4, &[])).unwrap();
        w.tensor_mut(0)[0] = f32::MIN_POSITIVE / 2.0;
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &w).unwrap();
        let back = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(back.input_len, 64);
        for ((_, a), (_, b)) in w.iter().zip(back.iter()) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let w: ModelWeights = init_model(64, &mut substream(4, &[])).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &w).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(&mut bad.as_slice()), Err(Error::Format(_))));
        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(read_checkpoint(&mut &truncated[..]), Err(Error::Io(_))));
        let mut renamed = buf;
        renamed[18] = b'X';
        assert!(matches!(read_checkpoint(&mut renamed.as_slice()), Err(Error::Format(_))));
    }
}
