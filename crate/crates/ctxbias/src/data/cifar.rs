//! CIFAR-100 binary format parsing.
//!
//! Each record is 3074 bytes: one coarse-label byte, one fine-label byte,
//! then 3072 pixel bytes (channel-planar 32x32 RGB). A file is any whole
//! number of records; pixels are scaled by 1/255.

use std::io::Read;
use std::path::Path;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const CIFAR100_RECORD_BYTES: usize = 3074;
pub const CIFAR100_PIXELS: usize = 3072;
pub const CIFAR100_NUM_FINE: usize = 100;
pub const CIFAR100_NUM_COARSE: usize = 20;

/// Loads a CIFAR-100 binary file (train.bin or test.bin).
///
/// An empty file is a valid empty dataset.
pub fn load_cifar100(bin_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = bin_path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;

    if bytes.len() % CIFAR100_RECORD_BYTES != 0 {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: (bytes.len() / CIFAR100_RECORD_BYTES + 1) as u64 * CIFAR100_RECORD_BYTES as u64,
            found: bytes.len() as u64,
        });
    }
    let n = bytes.len() / CIFAR100_RECORD_BYTES;
    let mut features = Matrix::zeros(n, CIFAR100_PIXELS);
    let mut fine = Vec::with_capacity(n);
    let mut coarse = Vec::with_capacity(n);

    for (r, record) in bytes.chunks_exact(CIFAR100_RECORD_BYTES).enumerate() {
        let c = record[0] as usize;
        let f = record[1] as usize;
        if c >= CIFAR100_NUM_COARSE {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                reason: format!("record {r}: coarse label {c} out of range (bound {CIFAR100_NUM_COARSE})"),
            });
        }
        if f >= CIFAR100_NUM_FINE {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                reason: format!("record {r}: fine label {f} out of range (bound {CIFAR100_NUM_FINE})"),
            });
        }
        coarse.push(c);
        fine.push(f);
        for (v, &byte) in features.row_mut(r).iter_mut().zip(&record[2..]) {
            *v = byte as f64 / 255.0;
        }
    }
    LabeledDataset::new(features, fine, coarse, CIFAR100_NUM_FINE, CIFAR100_NUM_COARSE)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Serializes CIFAR-100 records from (coarse, fine, fill-byte) triples.
    pub fn cifar_records(records: &[(u8, u8, u8)]) -> Vec<u8> {
        let mut out = Vec::new();
        for &(coarse, fine, fill) in records {
            out.push(coarse);
            out.push(fine);
            out.extend_from_slice(&[fill; CIFAR100_PIXELS]);
        }
        out
    }
}
