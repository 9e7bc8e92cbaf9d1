//! The CTXF precomputed-feature container.
//!
//! This is how external feature extractors hand datasets to the harness:
//! run images through whatever network you like, dump the activations here,
//! and point the trainer at the file. Layout (little-endian):
//!
//! ```text
//! magic  b"CTXF"
//! version u32 (currently 1)
//! n u32, d u32, num_fine u32, num_coarse u32
//! features   f64[n*d]   row-major
//! fine       u16[n]
//! coarse     u16[n]
//! ```
//!
//! `d = 0` is rejected; the round trip is lossless down to the bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"CTXF";
pub const FEATURE_VERSION: u32 = 1;

/// Writes a dataset as a CTXF feature file.
pub fn save_features(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if ds.dim() == 0 {
        return Err(Error::Parameter(
            "refusing to write a feature file with zero feature width".to_string(),
        ));
    }
    if ds.num_fine > u16::MAX as usize + 1 || ds.num_coarse > u16::MAX as usize + 1 {
        return Err(Error::Parameter(
            "CTXF stores labels as u16; too many classes".to_string(),
        ));
    }
    let mut buf = Vec::with_capacity(24 + ds.len() * (ds.dim() * 8 + 4));
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(ds.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(ds.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(ds.num_fine as u32).to_le_bytes());
    buf.extend_from_slice(&(ds.num_coarse as u32).to_le_bytes());
    for &v in ds.features.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for &l in &ds.fine_labels {
        buf.extend_from_slice(&(l as u16).to_le_bytes());
    }
    for &l in &ds.coarse_labels {
        buf.extend_from_slice(&(l as u16).to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a CTXF feature file written by [`save_features`].
pub fn load_features(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;

    if bytes.len() >= 4 && &bytes[0..4] != FEATURE_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: u32::from_le_bytes(*FEATURE_MAGIC),
            found: u32::from_le_bytes(bytes[0..4].try_into().unwrap()),
        });
    }
    if bytes.len() < 24 {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: 24,
            found: bytes.len() as u64,
        });
    }
    let le_u32 = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = le_u32(4);
    if version != FEATURE_VERSION {
        return Err(Error::BadVersion {
            path: path.to_path_buf(),
            expected: FEATURE_VERSION,
            found: version,
        });
    }
    let n = le_u32(8) as usize;
    let d = le_u32(12) as usize;
    let num_fine = le_u32(16) as usize;
    let num_coarse = le_u32(20) as usize;
    if d == 0 {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            reason: "zero feature width".to_string(),
        });
    }

    let expected = 24 + n * d * 8 + n * 2 + n * 2;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: expected as u64,
            found: bytes.len() as u64,
        });
    }

    let mut features = Matrix::zeros(n, d);
    let feat_bytes = &bytes[24..24 + n * d * 8];
    for (v, c) in features.data_mut().iter_mut().zip(feat_bytes.chunks_exact(8)) {
        *v = f64::from_le_bytes(c.try_into().unwrap());
    }
    let fine_off = 24 + n * d * 8;
    let coarse_off = fine_off + n * 2;
    let read_u16s = |off: usize| -> Vec<usize> {
        bytes[off..off + n * 2]
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect()
    };
    let fine = read_u16s(fine_off);
    let coarse = read_u16s(coarse_off);

    LabeledDataset::new(features, fine, coarse, num_fine, num_coarse).map_err(|e| match e {
        Error::Parameter(reason) => Error::Malformed {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}
