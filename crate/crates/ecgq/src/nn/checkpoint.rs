//! Model checkpoint serialization.
//!
//! A checkpoint is a single binary file:
//!
//! ```text
//! magic  b"ECGQ1"
//! u16le  format version (currently 1)
//! u8     model kind (0 autoencoder, 1 pixel U-Net, 2 latent U-Net)
//! u32le  hyperparameter-JSON byte length, then that many bytes (verbatim)
//! then per tensor, until end of file:
//!   u16le name length, name bytes (UTF-8)
//!   u8    rank, then rank × u32le dimensions
//!   f32le payload (product of dimensions)
//! ```
//!
//! Weights are stored as f32, and since the optimizer keeps every in-memory
//! weight f32-representable, `load(save(model))` reproduces the model
//! bit-for-bit. The hyperparameter JSON travels as an uninterpreted string so
//! that a round trip preserves it byte-exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Parametrized;

const MAGIC: &[u8; 5] = b"ECGQ1";
const VERSION: u16 = 1;

/// Which architecture a checkpoint holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Deterministic autoencoder.
    Autoencoder,
    /// Denoiser operating directly on normalized scalograms.
    PixelUNet,
    /// Denoiser operating on autoencoder latents.
    LatentUNet,
}

impl ModelKind {
    fn to_u8(self) -> u8 {
        match self {
            ModelKind::Autoencoder => 0,
            ModelKind::PixelUNet => 1,
            ModelKind::LatentUNet => 2,
        }
    }

    fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(ModelKind::Autoencoder),
            1 => Ok(ModelKind::PixelUNet),
            2 => Ok(ModelKind::LatentUNet),
            other => Err(Error::Format(format!("unknown model kind {other}"))),
        }
    }
}

/// Parsed checkpoint contents.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    /// Architecture tag.
    pub kind: ModelKind,
    /// Hyperparameter JSON, byte-exact as stored.
    pub hyper_json: String,
    /// Tensor name → (shape, f32 payload), ordered by name.
    pub tensors: BTreeMap<String, (Vec<usize>, Vec<f32>)>,
}

/// Write a model's parameters to `path` in the checkpoint format.
pub fn save_model(
    path: &Path,
    kind: ModelKind,
    hyper_json: &str,
    model: &dyn Parametrized,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[kind.to_u8()])?;
    let json = hyper_json.as_bytes();
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(json)?;

    let mut io_err: Option<std::io::Error> = None;
    model.for_each_param(&mut |name, shape, weights| {
        if io_err.is_some() {
            return;
        }
        let mut write = || -> std::io::Result<()> {
            let nb = name.as_bytes();
            w.write_all(&(nb.len() as u16).to_le_bytes())?;
            w.write_all(nb)?;
            w.write_all(&[shape.len() as u8])?;
            for &d in shape {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            for &v in weights {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
            Ok(())
        };
        if let Err(e) = write() {
            io_err = Some(e);
        }
    });
    if let Some(e) = io_err {
        return Err(e.into());
    }
    w.flush()?;
    Ok(())
}

fn read_exact_checked(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Format(format!("checkpoint truncated reading {what}")))
}

/// Read a checkpoint file without interpreting the tensors.
pub fn load_raw(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 5];
    read_exact_checked(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format("not a model checkpoint (bad magic)".into()));
    }
    let mut v2 = [0u8; 2];
    read_exact_checked(&mut r, &mut v2, "version")?;
    let version = u16::from_le_bytes(v2);
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let mut k1 = [0u8; 1];
    read_exact_checked(&mut r, &mut k1, "model kind")?;
    let kind = ModelKind::from_u8(k1[0])?;

    let mut l4 = [0u8; 4];
    read_exact_checked(&mut r, &mut l4, "hyperparameter length")?;
    let mut json = vec![0u8; u32::from_le_bytes(l4) as usize];
    read_exact_checked(&mut r, &mut json, "hyperparameter JSON")?;
    let hyper_json = String::from_utf8(json)
        .map_err(|_| Error::Format("hyperparameter JSON is not UTF-8".into()))?;

    let mut tensors = BTreeMap::new();
    loop {
        let mut n2 = [0u8; 2];
        match r.read_exact(&mut n2) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let mut name = vec![0u8; u16::from_le_bytes(n2) as usize];
        read_exact_checked(&mut r, &mut name, "tensor name")?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;

        let mut rank = [0u8; 1];
        read_exact_checked(&mut r, &mut rank, "tensor rank")?;
        let mut shape = Vec::with_capacity(rank[0] as usize);
        for _ in 0..rank[0] {
            let mut d4 = [0u8; 4];
            read_exact_checked(&mut r, &mut d4, "tensor dimension")?;
            shape.push(u32::from_le_bytes(d4) as usize);
        }
        let count: usize = shape.iter().product();
        let mut payload = vec![0u8; count * 4];
        read_exact_checked(&mut r, &mut payload, &format!("payload of '{name}'"))?;
        let values: Vec<f32> = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        if tensors.insert(name.clone(), (shape, values)).is_some() {
            return Err(Error::Format(format!("duplicate tensor '{name}' in checkpoint")));
        }
    }
    Ok(Checkpoint { kind, hyper_json, tensors })
}

/// Copy a checkpoint's tensors into a freshly constructed model.
///
/// The checkpoint and the model must describe exactly the same tensor set
/// (names and shapes); any mismatch is an error naming the offender.
pub fn fill_model(ckpt: &Checkpoint, model: &mut dyn Parametrized) -> Result<()> {
    let mut filled = 0usize;
    let mut problem: Option<String> = None;
    model.for_each_param_mut(&mut |name, w, g| {
        if problem.is_some() {
            return;
        }
        match ckpt.tensors.get(name) {
            None => problem = Some(format!("checkpoint is missing tensor '{name}'")),
            Some((_, values)) if values.len() != w.len() => {
                problem = Some(format!(
                    "tensor '{name}' holds {} values, model expects {}",
                    values.len(),
                    w.len()
                ));
            }
            Some((_, values)) => {
                for (dst, &src) in w.iter_mut().zip(values) {
                    *dst = src as f64;
                }
                for gv in g.iter_mut() {
                    *gv = 0.0;
                }
                filled += 1;
            }
        }
    });
    if let Some(msg) = problem {
        return Err(Error::Format(msg));
    }
    if filled != ckpt.tensors.len() {
        return Err(Error::Format(format!(
            "checkpoint holds {} tensors, model consumed {filled}",
            ckpt.tensors.len()
        )));
    }
    Ok(())
}
