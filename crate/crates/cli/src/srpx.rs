//! `SRPX` model parameter files: magic, `u32` version, `u8` pipeline kind,
//! then length-prefixed `f64` parameter blocks in declaration order (meta
//! block with the label count first, then normalizer stats, then layer
//! tensors).

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use surreptix_core::pipeline::{PipelineKind, PipelineModel};

const VERSION: u32 = 1;

fn kind_byte(kind: PipelineKind) -> u8 {
    match kind {
        PipelineKind::Sbp => 0,
        PipelineKind::Abp => 1,
        PipelineKind::Dbp => 2,
    }
}

fn kind_from_byte(b: u8) -> Result<PipelineKind> {
    Ok(match b {
        0 => PipelineKind::Sbp,
        1 => PipelineKind::Abp,
        2 => PipelineKind::Dbp,
        other => bail!("unknown pipeline kind byte {other}"),
    })
}

pub fn encode(model: &PipelineModel) -> Vec<u8> {
    let blocks = model.param_blocks();
    let mut out = Vec::new();
    out.extend_from_slice(b"SRPX");
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind_byte(model.kind));
    for block in blocks {
        out.extend_from_slice(&(block.len() as u64).to_le_bytes());
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<PipelineModel> {
    if bytes.len() < 9 || &bytes[0..4] != b"SRPX" {
        bail!("not an SRPX model file");
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        bail!("unsupported SRPX version {version}");
    }
    let kind = kind_from_byte(bytes[8])?;
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    let mut at = 9;
    while at < bytes.len() {
        if at + 8 > bytes.len() {
            bail!("truncated block header at offset {at}");
        }
        let len = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) as usize;
        at += 8;
        if at + len * 8 > bytes.len() {
            bail!("truncated block payload at offset {at}");
        }
        let mut block = Vec::with_capacity(len);
        for c in bytes[at..at + len * 8].chunks_exact(8) {
            block.push(f64::from_le_bytes(c.try_into().unwrap()));
        }
        at += len * 8;
        blocks.push(block);
    }
    let label_count = blocks
        .first()
        .and_then(|b| b.first())
        .map(|&v| v as usize)
        .context("missing meta block")?;
    let mut model = PipelineModel::build(kind, label_count, 0)?;
    model.load_param_blocks(&blocks)?;
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<PipelineModel> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}

pub fn save_model(path: &Path, model: &PipelineModel) -> Result<()> {
    fs::write(path, encode(model)).with_context(|| format!("writing {}", path.display()))
}
