//! Weight checkpoint files: a named-tensor archive with the owning model
//! spec.
//!
//! ```text
//! header:  magic "CFAMCWB1" (8 bytes), version u32,
//!          spec_json_len u32, spec_json bytes (ModelSpec as JSON),
//!          tensor_count u32
//! tensor:  key_len u16 + utf8 key, dtype u8 (0 = f32), ndim u8,
//!          dims u32[ndim], frozen u8, provenance_len u16 + utf8,
//!          data f32[product(dims)] little-endian
//! ```

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use cfamc_core::model::{BundleEntry, ModelSpec, WeightBundle};

use crate::{IoError, IoResult};

pub const MAGIC: &[u8; 8] = b"CFAMCWB1";
pub const VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

pub fn save_checkpoint(path: &Path, spec: &ModelSpec, bundle: &WeightBundle) -> IoResult<()> {
    let file = std::fs::File::create(path).map_err(IoError::persistence(path))?;
    let mut out = std::io::BufWriter::new(file);
    (|| -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_u32::<LittleEndian>(VERSION)?;
        let spec_json = serde_json::to_vec(spec).expect("spec serialization");
        out.write_u32::<LittleEndian>(spec_json.len() as u32)?;
        out.write_all(&spec_json)?;
        out.write_u32::<LittleEndian>(bundle.entries.len() as u32)?;
        for e in &bundle.entries {
            out.write_u16::<LittleEndian>(e.key.len() as u16)?;
            out.write_all(e.key.as_bytes())?;
            out.write_u8(DTYPE_F32)?;
            out.write_u8(e.shape.len() as u8)?;
            for &d in &e.shape {
                out.write_u32::<LittleEndian>(d as u32)?;
            }
            out.write_u8(e.frozen as u8)?;
            out.write_u16::<LittleEndian>(e.provenance.len() as u16)?;
            out.write_all(e.provenance.as_bytes())?;
            for &v in &e.data {
                out.write_f32::<LittleEndian>(v)?;
            }
        }
        out.flush()
    })()
    .map_err(IoError::persistence(path))
}

pub fn load_checkpoint(path: &Path) -> IoResult<(ModelSpec, WeightBundle)> {
    let bytes = std::fs::read(path).map_err(IoError::persistence(path))?;
    let corrupt = |reason: String| IoError::CorruptData { path: path.to_path_buf(), reason };
    let mut r = std::io::Cursor::new(&bytes);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| corrupt(e.to_string()))?;
    if &magic != MAGIC {
        return Err(corrupt(format!("bad magic {magic:?}")));
    }
    let version = r.read_u32::<LittleEndian>().map_err(|e| corrupt(e.to_string()))?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported checkpoint version {version}")));
    }
    let spec_len = r.read_u32::<LittleEndian>().map_err(|e| corrupt(e.to_string()))? as usize;
    let mut spec_json = vec![0u8; spec_len];
    r.read_exact(&mut spec_json).map_err(|e| corrupt(e.to_string()))?;
    let spec: ModelSpec =
        serde_json::from_slice(&spec_json).map_err(|e| corrupt(format!("spec json: {e}")))?;

    let count = r.read_u32::<LittleEndian>().map_err(|e| corrupt(e.to_string()))? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let key_len = r.read_u16::<LittleEndian>().map_err(|e| corrupt(e.to_string()))? as usize;
        let mut key = vec![0u8; key_len];
        r.read_exact(&mut key).map_err(|e| corrupt(e.to_string()))?;
        let key = String::from_utf8(key).map_err(|e| corrupt(e.to_string()))?;
        let dtype = r.read_u8().map_err(|e| corrupt(e.to_string()))?;
        if dtype != DTYPE_F32 {
            return Err(corrupt(format!("unsupported dtype {dtype} for {key}")));
        }
        let ndim = r.read_u8().map_err(|e| corrupt(e.to_string()))? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.read_u32::<LittleEndian>().map_err(|e| corrupt(e.to_string()))? as usize);
        }
        let frozen = r.read_u8().map_err(|e| corrupt(e.to_string()))? != 0;
        let prov_len = r.read_u16::<LittleEndian>().map_err(|e| corrupt(e.to_string()))? as usize;
        let mut prov = vec![0u8; prov_len];
        r.read_exact(&mut prov).map_err(|e| corrupt(e.to_string()))?;
        let provenance = String::from_utf8(prov).map_err(|e| corrupt(e.to_string()))?;
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(r.read_f32::<LittleEndian>().map_err(|e| corrupt(e.to_string()))?);
        }
        entries.push(BundleEntry { key, shape, data, frozen, provenance });
    }
    Ok((spec, WeightBundle { entries }))
}
