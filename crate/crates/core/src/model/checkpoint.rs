use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsp::PreprocessConfig;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, SttModel, Variant};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MC2RCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    variant: Variant,
    model: ModelConfig,
    preprocess: Option<PreprocessConfig>,
}

/// A model together with the preprocessing it was trained on.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: SttModel,
    pub preprocess: Option<PreprocessConfig>,
}

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
}

/// Writes the model parameters as `f32`, in creation order.
pub fn save_checkpoint(
    model: &SttModel,
    preprocess: Option<&PreprocessConfig>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let header = Header {
        variant: model.variant(),
        model: model.config().clone(),
        preprocess: preprocess.cloned(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    let params = model.params();
    let mut buf = Vec::with_capacity(64 + json.len() + 4 * params.numel());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&u32_of(json.len(), "header length")?.to_le_bytes());
    buf.extend_from_slice(&json);
    buf.extend_from_slice(&u32_of(params.len(), "parameter count")?.to_le_bytes());
    for (name, t) in params.iter() {
        buf.extend_from_slice(&u32_of(name.len(), "name length")?.to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&u32_of(t.ndim(), "rank")?.to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&u32_of(d, "extent")?.to_le_bytes());
        }
        for &v in t.data() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("checkpoint is truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

/// Reads a checkpoint and checks every parameter name and shape against a
/// freshly built model of the stored configuration.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let ctx = |e: Error| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    };
    read(&bytes).map_err(ctx)
}

fn read(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let len = r.u32()?;
    let header: Header = serde_json::from_slice(r.take(len)?)
        .map_err(|e| Error::Format(format!("bad checkpoint header: {e}")))?;
    let mut model = SttModel::new(&header.model, header.variant, 0)
        .map_err(|e| Error::Format(format!("checkpoint configuration invalid: {e}")))?;
    let count = r.u32()?;
    if count != model.params().len() {
        return Err(Error::Format(format!(
            "checkpoint has {count} parameters, configuration implies {}",
            model.params().len()
        )));
    }
    for i in 0..count {
        let name_len = r.u32()?;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?;
        let expected = model.params().name(i);
        if name != expected {
            return Err(Error::Format(format!("parameter {i} is '{name}', expected '{expected}'")));
        }
        let ndim = r.u32()?;
        let shape = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let want = model.params().get(i).shape();
        if shape != want {
            return Err(Error::Format(format!(
                "parameter '{name}' has shape {shape:?}, configuration implies {want:?}"
            )));
        }
        let n: usize = shape.iter().product();
        let data = r
            .take(4 * n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        *model.params_mut().get_mut(i) = Tensor::new(shape, data)?;
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after parameters", bytes.len() - r.pos)));
    }
    Ok(Checkpoint {
        model,
        preprocess: header.preprocess,
    })
}
