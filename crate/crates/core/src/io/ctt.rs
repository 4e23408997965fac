//! `CTT1` array files: magic `CTT1`, u32 LE rank, rank u32 LE dims, then
//! row-major f32 LE payload.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Image, Sinogram};

pub const CTT_MAGIC: &[u8; 4] = b"CTT1";

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub(crate) fn dim_u32(d: usize) -> Result<u32> {
    u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} does not fit in u32")))
}

pub fn write_ctt<W: Write>(mut w: W, dims: &[usize], data: &[f64]) -> Result<()> {
    let count: usize = dims.iter().product();
    if count != data.len() {
        return format_err(format!("payload has {} values but dims {:?} need {}", data.len(), dims, count));
    }
    let mut buf = Vec::with_capacity(8 + 4 * dims.len() + 4 * data.len());
    buf.extend_from_slice(CTT_MAGIC);
    buf.extend_from_slice(&dim_u32(dims.len())?.to_le_bytes());
    for &d in dims {
        buf.extend_from_slice(&dim_u32(d)?.to_le_bytes());
    }
    for &v in data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_ctt<R: Read>(mut r: R) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CTT_MAGIC {
        return format_err(format!("bad magic {magic:?}, expected CTT1"));
    }
    let rank = read_u32(&mut r)? as usize;
    if rank > 8 {
        return format_err(format!("rank {rank} is not supported"));
    }
    let dims = (0..rank).map(|_| read_u32(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format("dimension product overflows".into()))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != 4 * count {
        return format_err(format!("payload is {} bytes, dims {:?} need {}", payload.len(), dims, 4 * count));
    }
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
    Ok((dims, data))
}

pub fn encode_ctt(dims: &[usize], data: &[f64]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_ctt(&mut buf, dims, data)?;
    Ok(buf)
}

pub fn load_ctt(path: impl AsRef<Path>) -> Result<(Vec<usize>, Vec<f64>)> {
    read_ctt(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save_ctt(path: impl AsRef<Path>, dims: &[usize], data: &[f64]) -> Result<()> {
    super::write_atomic(path, &encode_ctt(dims, data)?)
}

/// Images are stored as rank 2 `[height, width]`.
pub fn save_image(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    save_ctt(path, &[image.height(), image.width()], image.data())
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let (dims, data) = load_ctt(path)?;
    match dims.as_slice() {
        [h, w] => Image::from_vec(*w, *h, data).map_err(|e| Error::Format(e.to_string())),
        _ => format_err(format!("expected a rank-2 image, found dims {dims:?}")),
    }
}

/// Sinograms are stored as rank 2 `[n_angles, n_detectors]`.
pub fn save_sinogram(path: impl AsRef<Path>, sino: &Sinogram) -> Result<()> {
    save_ctt(path, &[sino.n_angles(), sino.n_detectors()], sino.data())
}

/// Reads a sinogram laid out for `geometry`.
pub fn load_sinogram(path: impl AsRef<Path>, geometry: &Geometry) -> Result<Sinogram> {
    let (dims, data) = load_ctt(path)?;
    match dims.as_slice() {
        [a, d] if *a == geometry.n_angles && *d == geometry.n_detectors => Sinogram::from_vec(geometry, data),
        _ => Err(Error::InvalidArgument(format!(
            "sinogram dims {dims:?} do not match geometry {}x{}",
            geometry.n_angles, geometry.n_detectors
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_exact() {
        let bytes = encode_ctt(&[2, 3], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(&bytes[..4], b"CTT1");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &0f32.to_le_bytes());
        assert_eq!(&bytes[36..40], &5f32.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 24);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut bytes = encode_ctt(&[2, 2], &[1.0; 4]).unwrap();
        assert!(matches!(read_ctt(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        bytes[0] = b'X';
        assert!(matches!(read_ctt(bytes.as_slice()), Err(Error::Format(_))));
        assert!(encode_ctt(&[2, 2], &[1.0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_preserves_f32_values(
            dims in prop::collection::vec(1usize..5, 0..4),
            seed in any::<u64>(),
        ) {
            let n: usize = dims.iter().product();
            let data: Vec<f64> = (0..n)
                .map(|i| (((seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)) % 100_000) as f64 / 997.0) as f32 as f64)
                .collect();
            let bytes = encode_ctt(&dims, &data).unwrap();
            let (d2, v2) = read_ctt(bytes.as_slice()).unwrap();
            prop_assert_eq!(d2, dims);
            prop_assert_eq!(v2, data);
        }
    }
}
