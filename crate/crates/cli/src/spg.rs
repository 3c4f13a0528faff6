//! `SPG1` spectrogram container: stage-1 attacks produce non-audio objects
//! that still need to move between commands.
//!
//! Layout (all little-endian):
//! `"SPG1"`, `u32` frames, `u32` bins, `frames * bins` `f64` power values,
//! then the params block: `u32` n_fft, `u32` win_len, `u32` hop,
//! `u32` window kind (0 = Hamming), `u32` sample rate.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use surreptix_core::dsp::{Spectrogram, StftParams, WindowKind};

pub fn encode(s: &Spectrogram) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + s.power.len() * 8 + 20);
    out.extend_from_slice(b"SPG1");
    out.extend_from_slice(&(s.frames as u32).to_le_bytes());
    out.extend_from_slice(&(s.params.n_fft as u32).to_le_bytes());
    for &v in &s.power {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(s.params.n_fft as u32).to_le_bytes());
    out.extend_from_slice(&(s.params.win_len as u32).to_le_bytes());
    out.extend_from_slice(&(s.params.hop as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&s.params.sample_rate.to_le_bytes());
    out
}

pub fn decode(bytes: &[u8]) -> Result<Spectrogram> {
    if bytes.len() < 12 || &bytes[0..4] != b"SPG1" {
        bail!("not an SPG1 spectrogram container");
    }
    let frames = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let bins = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let payload = frames * bins * 8;
    let expected = 12 + payload + 20;
    if bytes.len() != expected {
        bail!("container is {} bytes, expected {expected} for {frames} x {bins}", bytes.len());
    }
    let mut power = Vec::with_capacity(frames * bins);
    for c in bytes[12..12 + payload].chunks_exact(8) {
        power.push(f64::from_le_bytes(c.try_into().unwrap()));
    }
    let p = &bytes[12 + payload..];
    let n_fft = u32::from_le_bytes(p[0..4].try_into().unwrap()) as usize;
    let win_len = u32::from_le_bytes(p[4..8].try_into().unwrap()) as usize;
    let hop = u32::from_le_bytes(p[8..12].try_into().unwrap()) as usize;
    let window = match u32::from_le_bytes(p[12..16].try_into().unwrap()) {
        0 => WindowKind::Hamming,
        other => bail!("unknown window kind {other}"),
    };
    let sample_rate = u32::from_le_bytes(p[16..20].try_into().unwrap());
    if n_fft != bins {
        bail!("params n_fft {n_fft} does not match payload bins {bins}");
    }
    Ok(Spectrogram {
        params: StftParams { n_fft, win_len, hop, window, sample_rate },
        frames,
        power,
    })
}

pub fn read_spg(path: &Path) -> Result<Spectrogram> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}

pub fn write_spg(path: &Path, s: &Spectrogram) -> Result<()> {
    fs::write(path, encode(s)).with_context(|| format!("writing {}", path.display()))
}
