//! Versioned binary model checkpoints.
//!
//! Layout (all integers and floats little-endian); per layer the order is
//! kind tag, dimensions, activation tag, raw weights:
//!
//! ```text
//! magic   b"CTXM"
//! version u32 (currently 1)
//! section u8 = 0x01          model
//!   layer_count u32
//!   per layer: kind u8
//!     0 dense:        in u32, out u32, has_bias u8, act u8,
//!                     weights f64[in*out], bias f64[out] if has_bias
//!     1 context bias: in u32, out u32, contexts u32, act u8,
//!                     weights f64[in*out], context_bias f64[out*contexts]
//!     2 dropout:      rate f64
//! section u8 = 0x02          adadelta state (optional)
//!   rho f64, eps f64, slot_count u32,
//!   per slot: rows u32, cols u32, grad_sq f64[rows*cols], delta_sq f64[rows*cols]
//! ```
//!
//! Activation tags: 0 identity, 1 elu, 2 softmax. Matrix payloads are raw
//! row-major `f64::to_le_bytes`, so a save/load round trip is bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Activation, ContextBiasDense, DenseLayer, Layer, Model};
use crate::optim::{Adadelta, AdadeltaSlot};
use crate::tensor::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CTXM";
pub const CHECKPOINT_VERSION: u32 = 1;

const SECTION_MODEL: u8 = 0x01;
const SECTION_ADADELTA: u8 = 0x02;

/// A model together with optional optimizer state, as stored on disk.
pub struct Checkpoint {
    pub model: Model,
    pub optimizer: Option<Adadelta>,
}

fn act_tag(a: Activation) -> u8 {
    match a {
        Activation::Identity => 0,
        Activation::Elu => 1,
        Activation::Softmax => 2,
    }
}

fn act_from_tag(tag: u8, path: &Path) -> Result<Activation> {
    match tag {
        0 => Ok(Activation::Identity),
        1 => Ok(Activation::Elu),
        2 => Ok(Activation::Softmax),
        t => Err(Error::Malformed {
            path: path.to_path_buf(),
            reason: format!("unknown activation tag {t}"),
        }),
    }
}

fn push_matrix(buf: &mut Vec<u8>, m: &Matrix) {
    for &v in m.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes a model (and optionally its Adadelta state) to `path`.
pub fn save_checkpoint(path: impl AsRef<Path>, model: &Model, optimizer: Option<&Adadelta>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());

    buf.push(SECTION_MODEL);
    buf.extend_from_slice(&(model.layers().len() as u32).to_le_bytes());
    for layer in model.layers() {
        match layer {
            Layer::Dense(d) => {
                buf.push(0);
                buf.extend_from_slice(&(d.weights.rows() as u32).to_le_bytes());
                buf.extend_from_slice(&(d.weights.cols() as u32).to_le_bytes());
                buf.push(d.bias.is_some() as u8);
                buf.push(act_tag(d.activation));
                push_matrix(&mut buf, &d.weights);
                if let Some(b) = &d.bias {
                    push_matrix(&mut buf, b);
                }
            }
            Layer::ContextBias(c) => {
                buf.push(1);
                buf.extend_from_slice(&(c.weights.rows() as u32).to_le_bytes());
                buf.extend_from_slice(&(c.weights.cols() as u32).to_le_bytes());
                buf.extend_from_slice(&(c.num_contexts() as u32).to_le_bytes());
                buf.push(act_tag(c.activation));
                push_matrix(&mut buf, &c.weights);
                push_matrix(&mut buf, &c.context_bias);
            }
            Layer::Dropout(rate) => {
                buf.push(2);
                buf.extend_from_slice(&rate.to_le_bytes());
            }
        }
    }

    if let Some(opt) = optimizer {
        buf.push(SECTION_ADADELTA);
        buf.extend_from_slice(&opt.rho.to_le_bytes());
        buf.extend_from_slice(&opt.eps.to_le_bytes());
        buf.extend_from_slice(&(opt.slots.len() as u32).to_le_bytes());
        for slot in &opt.slots {
            buf.extend_from_slice(&(slot.grad_sq.rows() as u32).to_le_bytes());
            buf.extend_from_slice(&(slot.grad_sq.cols() as u32).to_le_bytes());
            push_matrix(&mut buf, &slot.grad_sq);
            push_matrix(&mut buf, &slot.delta_sq);
        }
    }

    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                expected: (self.pos + n) as u64,
                found: self.bytes.len() as u64,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let raw = self.take(rows * cols * 8)?;
        let mut m = Matrix::zeros(rows, cols);
        for (v, c) in m.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(c.try_into().unwrap());
        }
        Ok(m)
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

/// Loads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path: &Path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;

    let mut r = Reader { bytes: &bytes, pos: 0, path };
    let magic = r.take(4)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: u32::from_le_bytes(*CHECKPOINT_MAGIC),
            found: u32::from_le_bytes(magic.try_into().unwrap()),
        });
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::BadVersion {
            path: path.to_path_buf(),
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let section = r.u8()?;
    if section != SECTION_MODEL {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            reason: format!("expected model section, found tag {section:#04x}"),
        });
    }

    let layer_count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        match r.u8()? {
            0 => {
                let rows = r.u32()? as usize;
                let cols = r.u32()? as usize;
                let has_bias = r.u8()? != 0;
                let act = act_from_tag(r.u8()?, path)?;
                let weights = r.matrix(rows, cols)?;
                let bias = if has_bias { Some(r.matrix(1, cols)?) } else { None };
                layers.push(Layer::Dense(DenseLayer { weights, bias, activation: act }));
            }
            1 => {
                let rows = r.u32()? as usize;
                let cols = r.u32()? as usize;
                let contexts = r.u32()? as usize;
                let act = act_from_tag(r.u8()?, path)?;
                let weights = r.matrix(rows, cols)?;
                let context_bias = r.matrix(cols, contexts)?;
                layers.push(Layer::ContextBias(ContextBiasDense {
                    weights,
                    context_bias,
                    activation: act,
                }));
            }
            2 => {
                layers.push(Layer::Dropout(r.f64()?));
            }
            k => {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    reason: format!("unknown layer kind {k}"),
                });
            }
        }
    }
    let model = Model::new(layers)?;

    let optimizer = if r.done() {
        None
    } else {
        let tag = r.u8()?;
        if tag != SECTION_ADADELTA {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                reason: format!("unknown section tag {tag:#04x}"),
            });
        }
        let rho = r.f64()?;
        let eps = r.f64()?;
        let slot_count = r.u32()? as usize;
        let mut slots = Vec::with_capacity(slot_count);
        for _ in 0..slot_count {
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let grad_sq = r.matrix(rows, cols)?;
            let delta_sq = r.matrix(rows, cols)?;
            slots.push(AdadeltaSlot { grad_sq, delta_sq });
        }
        let mut opt = Adadelta::new(rho, eps)?;
        opt.slots = slots;
        Some(opt)
    };
    if !r.done() {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            reason: format!("{} trailing bytes after final section", bytes.len() - r.pos),
        });
    }

    Ok(Checkpoint { model, optimizer })
}
