//! Single-file checkpoints: a text manifest followed by raw little-endian
//! f64 data.
//!
//! ```text
//! MTDEA-CKPT-1
//! config model.hidden_dim=32
//! ...
//! param layer0.l1.w0 32,32
//! ...
//! data
//! <f64 LE values of every param, in manifest order>
//! ```

use std::fs;
use std::path::Path;

use super::config::ModelConfig;
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::numeric::Tensor;

pub const CHECKPOINT_HEADER: &str = "MTDEA-CKPT-1";

pub fn checkpoint_bytes(params: &ModelParams) -> Vec<u8> {
    let mut text = format!("{CHECKPOINT_HEADER}\n");
    for (k, v) in params.config().to_pairs() {
        text.push_str(&format!("config {k}={v}\n"));
    }
    for (name, t) in params.names().iter().zip(params.tensors()) {
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        text.push_str(&format!("param {name} {}\n", dims.join(",")));
    }
    text.push_str("data\n");
    let mut bytes = text.into_bytes();
    for t in params.tensors() {
        for x in t.data() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    bytes
}

pub fn checkpoint_save(params: &ModelParams, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_bytes(params))?;
    Ok(())
}

pub fn checkpoint_load(path: &Path) -> Result<ModelParams> {
    checkpoint_from_bytes(&fs::read(path)?)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<ModelParams> {
    let bad = |m: String| Error::Checkpoint(m);
    let mut pos = 0;
    let mut next_line = || -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("truncated manifest".into()))?;
        pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| bad("manifest is not UTF-8".into()))
    };

    let header = next_line()?;
    if header != CHECKPOINT_HEADER {
        return Err(bad(format!("unsupported header `{header}`, expected `{CHECKPOINT_HEADER}`")));
    }
    let mut config = ModelConfig::default();
    let mut shapes = Vec::new();
    loop {
        let line = next_line()?;
        if line == "data" {
            break;
        }
        if let Some(kv) = line.strip_prefix("config ") {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("bad config line `{line}`")))?;
            if !config.set(k, v)? {
                return Err(bad(format!("unknown config key `{k}`")));
            }
        } else if let Some(p) = line.strip_prefix("param ") {
            let (_, dims) = p.rsplit_once(' ').ok_or_else(|| bad(format!("bad param line `{line}`")))?;
            let shape = dims
                .split(',')
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad(format!("bad shape in `{line}`")))?;
            shapes.push(shape);
        } else {
            return Err(bad(format!("unexpected manifest line `{line}`")));
        }
    }

    let mut data = &bytes[pos..];
    let mut tensors = Vec::with_capacity(shapes.len());
    for shape in shapes {
        let len: usize = shape.iter().product();
        if len == 0 || data.len() < 8 * len {
            return Err(bad("truncated data section".into()));
        }
        let values = data[..8 * len]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        data = &data[8 * len..];
        tensors.push(Tensor::new(shape, values));
    }
    if !data.is_empty() {
        return Err(bad("trailing bytes after data section".into()));
    }
    ModelParams::from_tensors(config, tensors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn params() -> ModelParams {
        let cfg = ModelConfig {
            hidden_dim: 4,
            num_gnn_layers: 1,
            ..ModelConfig::default()
        };
        ModelParams::init(cfg, 3, &mut substream(9, "ckpt")).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = params();
        let q = checkpoint_from_bytes(&checkpoint_bytes(&p)).unwrap();
        for (a, b) in p.tensors().iter().zip(q.tensors()) {
            let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
        assert_eq!(p.config(), q.config());
    }

    #[test]
    fn rejects_wrong_header_and_truncation() {
        let mut bytes = checkpoint_bytes(&params());
        let mut wrong = bytes.clone();
        wrong[11] = b'9';
        assert!(matches!(checkpoint_from_bytes(&wrong), Err(Error::Checkpoint(m)) if m.contains("header")));
        bytes.truncate(bytes.len() - 3);
        assert!(checkpoint_from_bytes(&bytes).is_err());
    }

    #[test]
    fn manifest_lists_config() {
        let text = String::from_utf8_lossy(&checkpoint_bytes(&params())).to_string();
        assert!(text.contains("config model.max_tasks=2\n"));
        assert!(text.contains("param attention.logits 3,2\n"));
    }
}
