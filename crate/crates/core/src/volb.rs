//! The VOLB volume file format.
//!
//! Layout: magic bytes `VOLB`, version byte `0x01`, dtype byte
//! (`0x00` = u8 mask, `0x01` = f32, `0x02` = f64), three little-endian u32
//! dims `(nx, ny, nz)`, then raw row-major voxel data (x slowest, z fastest).

use crate::binio::{write_u32, TrackedReader};
use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Dims, Volume};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"VOLB";
const VERSION: u8 = 0x01;
const FORMAT: &'static str = "VOLB";

pub const DTYPE_MASK_U8: u8 = 0x00;
pub const DTYPE_F32: u8 = 0x01;
pub const DTYPE_F64: u8 = 0x02;

/// Contents of a VOLB file: a byte mask or a real-valued volume.
#[derive(Debug, Clone, PartialEq)]
pub enum VolbData {
    Mask(BinaryMask),
    Volume(Volume),
}

impl VolbData {
    pub fn dims(&self) -> Dims {
        match self {
            VolbData::Mask(m) => m.dims(),
            VolbData::Volume(v) => v.dims(),
        }
    }

    /// View as a real-valued volume, casting masks to {0.0, 1.0}.
    pub fn to_volume(&self) -> Volume {
        match self {
            VolbData::Mask(m) => m.to_volume(),
            VolbData::Volume(v) => v.clone(),
        }
    }

    /// View as a mask; real volumes are binarized at 0.5.
    pub fn to_mask(&self) -> BinaryMask {
        match self {
            VolbData::Mask(m) => m.clone(),
            VolbData::Volume(v) => v.threshold(0.5),
        }
    }
}

pub fn read<R: Read>(reader: R) -> Result<VolbData> {
    let mut r = TrackedReader::new(reader, FORMAT);
    r.expect_magic(MAGIC)?;
    let version = r.read_u8("version byte")?;
    if version != VERSION {
        return Err(r.error(format!("unsupported version {version:#04x}")));
    }
    let dtype = r.read_u8("dtype byte")?;
    let nx = r.read_u32("nx")? as usize;
    let ny = r.read_u32("ny")? as usize;
    let nz = r.read_u32("nz")? as usize;
    let dims = Dims::new(nx, ny, nz)
        .map_err(|_| r.error(format!("invalid dims ({nx}, {ny}, {nz})")))?;
    let n = dims.len();
    match dtype {
        DTYPE_MASK_U8 => {
            let mut data = vec![0u8; n];
            r.read_exact(&mut data, "u8 voxel data")?;
            r.expect_eof()?;
            if let Some(bad) = data.iter().position(|&v| v > 1) {
                return Err(Error::Format {
                    format: FORMAT,
                    offset: 14 + bad as u64,
                    detail: format!("mask voxel value {} is not 0 or 1", data[bad]),
                });
            }
            Ok(VolbData::Mask(BinaryMask::new(dims, data)?))
        }
        DTYPE_F32 => {
            let mut bytes = vec![0u8; n * 4];
            r.read_exact(&mut bytes, "f32 voxel data")?;
            r.expect_eof()?;
            let data: Vec<f64> = bytes
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
                .collect();
            Volume::new(dims, data).map(VolbData::Volume).map_err(|e| {
                Error::Format {
                    format: FORMAT,
                    offset: 14,
                    detail: format!("invalid f32 voxel data: {e}"),
                }
            })
        }
        DTYPE_F64 => {
            let data = r.read_f64_vec(n, "f64 voxel data")?;
            r.expect_eof()?;
            Volume::new(dims, data).map(VolbData::Volume).map_err(|e| {
                Error::Format {
                    format: FORMAT,
                    offset: 14,
                    detail: format!("invalid f64 voxel data: {e}"),
                }
            })
        }
        other => Err(Error::Format {
            format: FORMAT,
            offset: 5,
            detail: format!("unknown dtype byte {other:#04x}"),
        }),
    }
}

pub fn read_path(path: impl AsRef<Path>) -> Result<VolbData> {
    read(BufReader::new(File::open(path.as_ref())?))
}

fn write_header<W: Write>(w: &mut W, dtype: u8, dims: Dims) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, dtype])?;
    write_u32(w, dims.nx as u32)?;
    write_u32(w, dims.ny as u32)?;
    write_u32(w, dims.nz as u32)?;
    Ok(())
}

pub fn write_mask<W: Write>(w: &mut W, mask: &BinaryMask) -> Result<()> {
    write_header(w, DTYPE_MASK_U8, mask.dims())?;
    w.write_all(mask.data())?;
    Ok(())
}

pub fn write_volume_f64<W: Write>(w: &mut W, volume: &Volume) -> Result<()> {
    write_header(w, DTYPE_F64, volume.dims())?;
    for v in volume.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_volume_f32<W: Write>(w: &mut W, volume: &Volume) -> Result<()> {
    write_header(w, DTYPE_F32, volume.dims())?;
    for v in volume.data() {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn write_mask_path(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    write_mask(&mut w, mask)?;
    w.flush()?;
    Ok(())
}

pub fn write_volume_path(path: impl AsRef<Path>, volume: &Volume) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    write_volume_f64(&mut w, volume)?;
    w.flush()?;
    Ok(())
}
