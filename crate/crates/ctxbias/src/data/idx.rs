//! Fashion-MNIST IDX file parsing.
//!
//! IDX is big-endian: a `u32` magic (0x00000803 for 3-D `u8` image tensors,
//! 0x00000801 for 1-D `u8` label vectors), one `u32` per dimension, then the
//! raw `u8` payload. Images must be 28x28; pixels are scaled by 1/255.

use std::io::Read;
use std::path::Path;

use crate::data::{LabeledDataset, SuperclassMap};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    Ok(bytes)
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let end = offset + 4;
    if end > bytes.len() {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: end as u64,
            found: bytes.len() as u64,
        });
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Loads an IDX image/label file pair; coarse labels come from `map`.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    map: &SuperclassMap,
) -> Result<LabeledDataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();

    // Image header: magic, count, rows, cols.
    let img = read_all(images_path)?;
    let magic = be_u32(&img, 0, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::BadMagic {
            path: images_path.to_path_buf(),
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let n = be_u32(&img, 4, images_path)? as usize;
    let rows = be_u32(&img, 8, images_path)? as usize;
    let cols = be_u32(&img, 12, images_path)? as usize;
    if rows != 28 || cols != 28 {
        return Err(Error::Malformed {
            path: images_path.to_path_buf(),
            reason: format!("expected 28x28 images, found {rows}x{cols}"),
        });
    }
    let expected = 16 + n * rows * cols;
    if img.len() != expected {
        return Err(Error::Truncated {
            path: images_path.to_path_buf(),
            expected: expected as u64,
            found: img.len() as u64,
        });
    }

    // Label header: magic, count.
    let lab = read_all(labels_path)?;
    let lmagic = be_u32(&lab, 0, labels_path)?;
    if lmagic != IDX_LABELS_MAGIC {
        return Err(Error::BadMagic {
            path: labels_path.to_path_buf(),
            expected: IDX_LABELS_MAGIC,
            found: lmagic,
        });
    }
    let ln = be_u32(&lab, 4, labels_path)? as usize;
    if ln != n {
        return Err(Error::CountMismatch {
            path: labels_path.to_path_buf(),
            images: n,
            labels: ln,
        });
    }
    let lexpected = 8 + n;
    if lab.len() != lexpected {
        return Err(Error::Truncated {
            path: labels_path.to_path_buf(),
            expected: lexpected as u64,
            found: lab.len() as u64,
        });
    }

    let d = rows * cols;
    let mut features = Matrix::zeros(n, d);
    for (v, &byte) in features.data_mut().iter_mut().zip(&img[16..]) {
        *v = byte as f64 / 255.0;
    }
    let mut fine = Vec::with_capacity(n);
    let mut coarse = Vec::with_capacity(n);
    for &byte in &lab[8..] {
        let f = byte as usize;
        if f >= map.num_fine() {
            return Err(Error::Malformed {
                path: labels_path.to_path_buf(),
                reason: format!("label {f} out of range for {} classes", map.num_fine()),
            });
        }
        fine.push(f);
        coarse.push(map.coarse_of(f)?);
    }
    LabeledDataset::new(features, fine, coarse, map.num_fine(), map.num_coarse())
}
